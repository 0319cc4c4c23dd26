#include "imol/motivation.hpp"

#include <algorithm>
#include <cmath>

namespace imol {

bool is_imitation(StrategyKind k) {
  return k == StrategyKind::Mimicry || k == StrategyKind::Emulation ||
         k == StrategyKind::ProceduralImitation;
}

const char* strategy_kind_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::AutonomousAction: return "autonomous-action";
    case StrategyKind::AutonomousProcedure: return "autonomous-procedure";
    case StrategyKind::Mimicry: return "mimicry";
    case StrategyKind::Emulation: return "emulation";
    case StrategyKind::ProceduralImitation: return "procedural-imitation";
  }
  return "?";
}

double competence_floor(const TaskHierarchy& h, SpaceId space) {
  return -std::sqrt(static_cast<double>(h.space(space).dim));
}

double competence(const TaskHierarchy& h, const Outcome& goal,
                  const std::optional<Outcome>& reached) {
  if (!reached) return competence_floor(h, goal.space);
  if (reached->space != goal.space || reached->values.size() != goal.values.size())
    throw std::invalid_argument("competence: dimension mismatch");
  return -h.distance(goal, *reached);
}

bool Box::contains(const Vec& p) const {
  for (size_t i = 0; i < lo.size(); ++i) {
    if (p[i] < lo[i]) return false;
    if (p[i] >= hi[i] && !(hi[i] >= 1.0 && p[i] <= 1.0)) return false;
  }
  return true;
}

double InterestMap::progress_of(const std::vector<double>& competences, int window,
                                double init) {
  const int n = static_cast<int>(competences.size());
  if (n < 2) return init;
  const int w = std::min(n, window);
  const int newest = (w + 1) / 2;
  const int oldest = w / 2;
  double mean_new = 0.0, mean_old = 0.0;
  for (int i = 0; i < newest; ++i) mean_new += competences[n - 1 - i];
  for (int i = 0; i < oldest; ++i) mean_old += competences[n - w + i];
  mean_new /= newest;
  mean_old /= oldest;
  return std::abs(mean_new - mean_old);
}

InterestMap::InterestMap(const TaskHierarchy* hierarchy,
                         std::vector<StrategyDescriptor> strategies,
                         std::map<SpaceId, std::vector<int>> available_strategies,
                         MotivationConfig cfg)
    : hierarchy_(hierarchy),
      strategies_(std::move(strategies)),
      available_(std::move(available_strategies)),
      cfg_(cfg) {
  for (const auto& s : strategies_)
    if (s.cost <= 0.0) throw std::invalid_argument("strategy cost must be positive");
  double psum = cfg_.mode_probs[0] + cfg_.mode_probs[1] + cfg_.mode_probs[2];
  if (std::abs(psum - 1.0) > 1e-9)
    throw std::invalid_argument("selector mode probabilities must sum to 1");
  // one root region per space: the initial partition R = ⊔ {Ω_i}
  for (const auto& s : hierarchy_->spaces()) {
    Region root;
    root.space = s.id;
    root.box.lo.assign(s.dim, 0.0);
    root.box.hi.assign(s.dim, 1.0);
    root.creation_index = next_creation_index_++;
    leaves_[s.id].push_back(std::move(root));
    if (!available_.count(s.id)) available_[s.id] = {};
  }
}

const std::vector<Region>& InterestMap::regions(SpaceId space) const {
  auto it = leaves_.find(space);
  if (it == leaves_.end()) throw std::invalid_argument("unknown space id");
  return it->second;
}

const std::vector<int>& InterestMap::available(SpaceId space) const {
  auto it = available_.find(space);
  if (it == available_.end()) throw std::invalid_argument("unknown space id");
  return it->second;
}

double InterestMap::progress(const Region& r, int strategy_id) const {
  std::vector<double> comps;
  auto it = r.history.find(strategy_id);
  if (it != r.history.end()) {
    comps.reserve(it->second.size());
    for (const auto& e : it->second) comps.push_back(e.competence);
  }
  return progress_of(comps, cfg_.progress_window, cfg_.interest_init);
}

double InterestMap::interest(const Region& r, int strategy_id) const {
  return strategies_.at(strategy_id).cost * progress(r, strategy_id);
}

const Region& InterestMap::leaf_of(SpaceId space, const Vec& goal_norm) const {
  for (const Region& r : regions(space))
    if (r.box.contains(goal_norm)) return r;
  throw std::logic_error("partition broken: goal not contained in any leaf");
}

Outcome InterestMap::sample_goal_in(const Region& r, Rng& rng) const {
  Vec unit(r.box.lo.size());
  for (size_t i = 0; i < unit.size(); ++i)
    unit[i] = rng.uniform(r.box.lo[i], r.box.hi[i]);
  return hierarchy_->denormalize(r.space, unit);
}

Selection InterestMap::select(Rng& rng) const {
  // spaces with at least one available strategy
  std::vector<SpaceId> spaces;
  for (const auto& s : hierarchy_->spaces())
    if (!available(s.id).empty()) spaces.push_back(s.id);
  if (spaces.empty()) throw std::logic_error("no strategy available for any space");

  const double u = rng.uniform();
  Selection sel;

  if (u < cfg_.mode_probs[0]) {
    // mode 1: everything uniform
    sel.mode = 1;
    sel.space = spaces[rng.uniform_int(static_cast<int>(spaces.size()))];
    const auto& avail = available(sel.space);
    sel.strategy_id = avail[rng.uniform_int(static_cast<int>(avail.size()))];
    const SpaceSpec& spec = hierarchy_->space(sel.space);
    Vec unit(spec.dim);
    for (double& v : unit) v = rng.uniform();
    sel.goal = hierarchy_->denormalize(sel.space, unit);
    return sel;
  }

  if (u < cfg_.mode_probs[0] + cfg_.mode_probs[1]) {
    // mode 2: (region, strategy) proportional to interest + floor
    sel.mode = 2;
    struct Cand {
      const Region* region;
      int strategy_id;
      double weight;
    };
    std::vector<Cand> cands;
    double total = 0.0;
    for (SpaceId sid : spaces)
      for (const Region& r : regions(sid))
        for (int st : available(sid)) {
          const double w = interest(r, st) + cfg_.interest_floor;
          cands.push_back({&r, st, w});
          total += w;
        }
    double x = rng.uniform() * total;
    const Cand* chosen = &cands.back();
    for (const Cand& c : cands) {
      x -= c.weight;
      if (x <= 0.0) { chosen = &c; break; }
    }
    sel.space = chosen->region->space;
    sel.strategy_id = chosen->strategy_id;
    sel.goal = sample_goal_in(*chosen->region, rng);
    return sel;
  }

  // mode 3: argmax-interest region, uniform strategy, uniform goal in region
  sel.mode = 3;
  const Region* best = nullptr;
  double best_i = -1.0;
  for (SpaceId sid : spaces)
    for (const Region& r : regions(sid))
      for (int st : available(sid)) {
        const double i = interest(r, st);
        if (i > best_i ||
            (i == best_i && best && r.creation_index < best->creation_index)) {
          best_i = i;
          best = &r;
        }
      }
  sel.space = best->space;
  const auto& avail = available(sel.space);
  sel.strategy_id = avail[rng.uniform_int(static_cast<int>(avail.size()))];
  sel.goal = sample_goal_in(*best, rng);
  return sel;
}

double InterestMap::side_interest(
    const std::map<int, std::vector<HistoryEntry>>& hist) const {
  double total = 0.0;
  for (const auto& s : strategies_) {
    std::vector<double> comps;
    auto it = hist.find(s.id);
    if (it != hist.end())
      for (const auto& e : it->second) comps.push_back(e.competence);
    total += s.cost * progress_of(comps, cfg_.progress_window, cfg_.interest_init);
  }
  return total;
}

void InterestMap::update_and_split(const Episode& ep) {
  const SpaceId sid = ep.goal.space;
  const Vec goal_norm = hierarchy_->normalize(ep.goal);
  auto& regs = leaves_.at(sid);
  size_t leaf_idx = regs.size();
  for (size_t i = 0; i < regs.size(); ++i)
    if (regs[i].box.contains(goal_norm)) { leaf_idx = i; break; }
  if (leaf_idx == regs.size())
    throw std::logic_error("partition broken: goal not contained in any leaf");

  Region& leaf = regs[leaf_idx];
  leaf.history[ep.strategy_id].push_back({ep.iteration, goal_norm, ep.competence_goal});
  leaf.total_entries += 1;

  if (leaf.total_entries > cfg_.split_threshold) split_region(sid, leaf_idx);
}

void InterestMap::split_region(SpaceId space, size_t leaf_idx) {
  auto& regs = leaves_.at(space);
  const Region parent = regs[leaf_idx];  // copy: regs is mutated below
  const int dim = static_cast<int>(parent.box.lo.size());

  // flatten goals for the median candidates
  std::vector<const HistoryEntry*> all;
  for (const auto& [st, entries] : parent.history)
    for (const auto& e : entries) all.push_back(&e);
  const int n = static_cast<int>(all.size());

  // candidate cut per dimension: median of stored goal coordinates
  double best_obj = -1.0;
  int best_dim = -1;
  double best_t = 0.0;
  for (int d = 0; d < dim; ++d) {
    std::vector<double> xs;
    xs.reserve(all.size());
    for (const auto* e : all) xs.push_back(e->goal[d]);
    std::sort(xs.begin(), xs.end());
    const double t = xs[xs.size() / 2];
    if (!(t > parent.box.lo[d] && t < parent.box.hi[d])) continue;  // degenerate cut

    std::map<int, std::vector<HistoryEntry>> left, right;
    int n_left = 0, n_right = 0;
    for (const auto& [st, entries] : parent.history)
      for (const auto& e : entries) {
        if (e.goal[d] < t) {
          left[st].push_back(e);
          ++n_left;
        } else {
          right[st].push_back(e);
          ++n_right;
        }
      }
    const double obj = std::abs(side_interest(left) - side_interest(right)) *
                       (static_cast<double>(std::min(n_left, n_right)) / n);
    if (obj > best_obj) {
      best_obj = obj;
      best_dim = d;
      best_t = t;
    }
  }
  if (best_dim < 0) return;  // every cut degenerate; retry on a later insertion

  Region left, right;
  left.space = right.space = space;
  left.box = parent.box;
  right.box = parent.box;
  left.box.hi[best_dim] = best_t;
  right.box.lo[best_dim] = best_t;
  left.creation_index = next_creation_index_++;
  right.creation_index = next_creation_index_++;
  for (const auto& [st, entries] : parent.history)
    for (const auto& e : entries) {
      Region& side = e.goal[best_dim] < best_t ? left : right;
      side.history[st].push_back(e);
      side.total_entries += 1;
    }

  regs.erase(regs.begin() + static_cast<std::ptrdiff_t>(leaf_idx));
  regs.push_back(std::move(left));
  regs.push_back(std::move(right));
}

}  // namespace imol

#include "imol/models.hpp"

#include <algorithm>
#include <cmath>

namespace imol {

bool same_structure(const std::vector<Controllable>& a, const std::vector<Controllable>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].index() != b[i].index()) return false;
    if (!is_primitive(a[i]) &&
        std::get<Outcome>(a[i]).space != std::get<Outcome>(b[i]).space)
      return false;
  }
  return true;
}

namespace {

Vec slot_params(const Controllable& c) {
  if (is_primitive(c)) return std::get<PrimitiveAction>(c).params;
  return std::get<Outcome>(c).values;
}

void set_slot_params(Controllable& c, Vec v) {
  if (is_primitive(c))
    std::get<PrimitiveAction>(c).params = std::move(v);
  else
    std::get<Outcome>(c).values = std::move(v);
}

Vec flatten(const std::vector<Controllable>& seq) {
  Vec out;
  for (const auto& c : seq) {
    const Vec p = slot_params(c);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace

ModelSet::ModelSet(const TaskHierarchy* hierarchy, const Memory* memory, ModelConfig cfg)
    : hierarchy_(hierarchy), memory_(memory), cfg_(cfg) {}

bool ModelSet::valid_for_task(SpaceId task, const Episode& ep) const {
  const auto& comps = hierarchy_->components(task);
  for (const auto& c : ep.controllables) {
    if (is_primitive(c)) {
      if (std::find(comps.begin(), comps.end(), kActionSpace) == comps.end()) return false;
    } else {
      const SpaceId s = std::get<Outcome>(c).space;
      if (std::find(comps.begin(), comps.end(), s) == comps.end()) return false;
    }
  }
  return !ep.controllables.empty();
}

std::vector<Controllable> ModelSet::inverse_infer(SpaceId task, const Outcome& goal,
                                                  Rng& rng) const {
  if (!hierarchy_->has_space(task)) throw std::invalid_argument("unknown task space");
  const auto hits =
      memory_->knn(task, goal.values, cfg_.knn_k,
                   [&](const Episode& ep) { return valid_for_task(task, ep); });

  if (hits.empty()) {
    if (!cfg_.random_fallback)
      throw EmptyModelError("no data for space " + hierarchy_->space(task).name);
    PrimitiveAction a;
    a.params.resize(cfg_.action_dim);
    for (double& v : a.params) v = rng.uniform(-1.0, 1.0);
    return {Controllable{a}};
  }

  const auto& nearest = memory_->episode(hits[0].episode).controllables;
  std::vector<std::pair<double, const std::vector<Controllable>*>> group;
  for (const auto& h : hits) {
    const auto& seq = memory_->episode(h.episode).controllables;
    if (same_structure(seq, nearest)) group.emplace_back(h.distance, &seq);
  }
  if (group.size() == 1) return nearest;

  // inverse-distance-weighted blend, slot by slot
  double wsum = 0.0;
  std::vector<double> w(group.size());
  for (size_t i = 0; i < group.size(); ++i) {
    w[i] = 1.0 / (group[i].first + cfg_.blend_epsilon);
    wsum += w[i];
  }
  std::vector<Controllable> blended = nearest;
  for (size_t slot = 0; slot < blended.size(); ++slot) {
    Vec acc(slot_params((*group[0].second)[slot]).size(), 0.0);
    for (size_t i = 0; i < group.size(); ++i) {
      const Vec p = slot_params((*group[i].second)[slot]);
      for (size_t d = 0; d < acc.size(); ++d) acc[d] += w[i] * p[d];
    }
    for (double& v : acc) v /= wsum;
    set_slot_params(blended[slot], std::move(acc));
  }
  return blended;
}

CompoundAction ModelSet::resolve(const std::vector<Controllable>& seq, Rng& rng) const {
  last_depth_ = 0;
  CompoundAction out;
  const int max_depth = hierarchy_->depth() + 1;

  std::function<void(const std::vector<Controllable>&, int)> rec =
      [&](const std::vector<Controllable>& s, int depth) {
        if (depth > max_depth)
          throw std::logic_error("resolve exceeded hierarchy depth");  // acyclicity guard
        last_depth_ = std::max(last_depth_, depth);
        for (const auto& c : s) {
          if (is_primitive(c)) {
            out.actions.push_back(std::get<PrimitiveAction>(c));
          } else {
            const Outcome& sub = std::get<Outcome>(c);
            rec(inverse_infer(sub.space, sub, rng), depth + 1);
          }
        }
      };
  rec(seq, 0);
  if (out.actions.empty()) throw EmptyModelError("resolution produced no primitives");
  return out;
}

Outcome ModelSet::forward_predict(SpaceId task, const std::vector<Controllable>& seq) const {
  if (!hierarchy_->has_space(task)) throw std::invalid_argument("unknown task space");
  std::vector<int> candidates;
  for (int i = 0; i < memory_->size(); ++i) {
    const Episode& ep = memory_->episode(i);
    if (ep.reached.count(task) && !ep.controllables.empty()) candidates.push_back(i);
  }
  if (candidates.empty())
    throw EmptyModelError("no data for space " + hierarchy_->space(task).name);

  const Vec q = flatten(seq);
  std::vector<std::pair<double, int>> same;
  for (int i : candidates) {
    const auto& c = memory_->episode(i).controllables;
    if (same_structure(c, seq)) same.emplace_back(squared_distance(q, flatten(c)), i);
  }

  auto mean_of = [&](const std::vector<int>& eps) {
    const int dim = hierarchy_->space(task).dim;
    Vec acc(dim, 0.0);
    for (int i : eps) {
      const Vec& v = memory_->episode(i).reached.at(task).values;
      for (int d = 0; d < dim; ++d) acc[d] += v[d];
    }
    for (double& v : acc) v /= static_cast<double>(eps.size());
    return Outcome{task, std::move(acc)};
  };

  if (!same.empty()) {
    std::sort(same.begin(), same.end());
    std::vector<int> take;
    for (size_t i = 0; i < same.size() && i < static_cast<size_t>(cfg_.knn_k); ++i)
      take.push_back(same[i].second);
    return mean_of(take);
  }

  // no structure-identical episode: nearest single under a prefix distance,
  // missing/extra parameters counted at the maximal gap
  double best = -1.0;
  int best_ep = -1;
  for (int i : candidates) {
    const Vec c = flatten(memory_->episode(i).controllables);
    const size_t shared = std::min(q.size(), c.size());
    double d2 = 0.0;
    for (size_t d = 0; d < shared; ++d) {
      const double diff = q[d] - c[d];
      d2 += diff * diff;
    }
    d2 += 4.0 * static_cast<double>(std::max(q.size(), c.size()) - shared);
    if (best_ep < 0 || d2 < best) {
      best = d2;
      best_ep = i;
    }
  }
  return mean_of({best_ep});
}

}  // namespace imol

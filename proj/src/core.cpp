#include "imol/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace imol {

double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// ---------------------------------------------------------------------------
// TaskHierarchy

void TaskHierarchy::add_space(SpaceSpec spec) {
  if (spec.id == kActionSpace) throw std::invalid_argument("space id reserved for actions");
  if (has_space(spec.id)) throw std::invalid_argument("duplicate space id");
  if (spec.dim <= 0 || static_cast<int>(spec.lo.size()) != spec.dim ||
      static_cast<int>(spec.hi.size()) != spec.dim)
    throw std::invalid_argument("space bounds do not match dimension");
  for (int i = 0; i < spec.dim; ++i)
    if (!(spec.lo[i] < spec.hi[i])) throw std::invalid_argument("empty bounds");
  spaces_.push_back(std::move(spec));
}

void TaskHierarchy::set_components(SpaceId task, std::vector<SpaceId> components) {
  if (!has_space(task)) throw std::invalid_argument("unknown task space");
  for (SpaceId c : components)
    if (c != kActionSpace && !has_space(c))
      throw std::invalid_argument("component is neither a space nor the action space");
  components_[task] = std::move(components);
  check_acyclic();
}

bool TaskHierarchy::has_space(SpaceId id) const {
  for (const auto& s : spaces_)
    if (s.id == id) return true;
  return false;
}

const SpaceSpec& TaskHierarchy::space(SpaceId id) const {
  for (const auto& s : spaces_)
    if (s.id == id) return s;
  throw std::invalid_argument("unknown space id");
}

const std::vector<SpaceId>& TaskHierarchy::components(SpaceId task) const {
  static const std::vector<SpaceId> kEmpty;
  auto it = components_.find(task);
  return it == components_.end() ? kEmpty : it->second;
}

bool TaskHierarchy::is_controllable(SpaceId id) const {
  for (const auto& [task, comps] : components_)
    for (SpaceId c : comps)
      if (c == id) return true;
  return false;
}

std::vector<SpaceId> TaskHierarchy::component_outcome_spaces(SpaceId task) const {
  std::vector<SpaceId> out;
  for (SpaceId c : components(task))
    if (c != kActionSpace) out.push_back(c);
  return out;
}

int TaskHierarchy::depth() const {
  std::function<int(SpaceId)> rec = [&](SpaceId id) -> int {
    int best = 1;
    for (SpaceId c : components(id))
      if (c != kActionSpace) best = std::max(best, 1 + rec(c));
    return best;
  };
  int d = 0;
  for (const auto& s : spaces_) d = std::max(d, rec(s.id));
  return d;
}

void TaskHierarchy::check_acyclic() const {
  // DFS with colors; components() edges only between declared spaces
  std::map<SpaceId, int> color;  // 0 white, 1 grey, 2 black
  std::function<void(SpaceId)> visit = [&](SpaceId id) {
    color[id] = 1;
    for (SpaceId c : components(id)) {
      if (c == kActionSpace) continue;
      if (color[c] == 1) throw std::invalid_argument("task hierarchy contains a cycle");
      if (color[c] == 0) visit(c);
    }
    color[id] = 2;
  };
  for (const auto& s : spaces_)
    if (color[s.id] == 0) visit(s.id);
}

Vec TaskHierarchy::normalize(const Outcome& o) const {
  const SpaceSpec& s = space(o.space);
  if (o.values.size() != static_cast<size_t>(s.dim))
    throw std::invalid_argument("outcome dimension mismatch");
  Vec unit(s.dim);
  for (int i = 0; i < s.dim; ++i)
    unit[i] = (o.values[i] - s.lo[i]) / (s.hi[i] - s.lo[i]);
  return unit;
}

Outcome TaskHierarchy::denormalize(SpaceId id, const Vec& unit) const {
  const SpaceSpec& s = space(id);
  Outcome o;
  o.space = id;
  o.values.resize(s.dim);
  for (int i = 0; i < s.dim; ++i)
    o.values[i] = s.lo[i] + unit[i] * (s.hi[i] - s.lo[i]);
  return o;
}

double TaskHierarchy::distance(const Outcome& a, const Outcome& b) const {
  if (a.space != b.space) throw std::invalid_argument("distance across spaces");
  return std::sqrt(squared_distance(normalize(a), normalize(b)));
}

bool TaskHierarchy::in_bounds(const Outcome& o) const {
  const SpaceSpec& s = space(o.space);
  if (o.values.size() != static_cast<size_t>(s.dim)) return false;
  for (int i = 0; i < s.dim; ++i) {
    if (!std::isfinite(o.values[i])) return false;
    if (o.values[i] < s.lo[i] - 1e-12 || o.values[i] > s.hi[i] + 1e-12) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Memory

namespace {
int cells_for_dim(int dim) {
  switch (dim) {
    case 1: return 32;
    case 2: return 16;
    case 3: return 8;
    default: return 6;
  }
}
}  // namespace

int Memory::SpaceIndex::cell_coord(double x) const {
  int c = static_cast<int>(x * cells_per_dim);
  if (c < 0) c = 0;
  if (c >= cells_per_dim) c = cells_per_dim - 1;
  return c;
}

std::uint64_t Memory::SpaceIndex::key_of(const Vec& p) const {
  std::uint64_t key = 0;
  for (int i = 0; i < dim; ++i)
    key = key * static_cast<std::uint64_t>(cells_per_dim) + cell_coord(p[i]);
  return key;
}

Memory::Memory(const TaskHierarchy* hierarchy) : hierarchy_(hierarchy) {
  for (const auto& s : hierarchy_->spaces()) {
    SpaceIndex idx;
    idx.dim = s.dim;
    idx.cells_per_dim = cells_for_dim(s.dim);
    index_[s.id] = std::move(idx);
  }
}

int Memory::record(Episode ep) {
  for (const auto& [sid, out] : ep.reached) {
    if (out.space != sid) throw std::invalid_argument("reached map key/space mismatch");
    if (!hierarchy_->in_bounds(out))
      throw std::invalid_argument("reached outcome out of bounds: space " +
                                  hierarchy_->space(sid).name);
  }
  for (const auto& a : ep.compound.actions)
    for (double v : a.params)
      if (!std::isfinite(v) || v < -1.0 - 1e-12 || v > 1.0 + 1e-12)
        throw std::invalid_argument("primitive action parameter out of [-1,1]");

  const int id = static_cast<int>(episodes_.size());
  for (const auto& [sid, out] : ep.reached) {
    SpaceIndex& idx = index_.at(sid);
    Entry e{id, hierarchy_->normalize(out)};
    idx.cells[idx.key_of(e.point)].push_back(static_cast<int>(idx.entries.size()));
    idx.entries.push_back(std::move(e));
  }
  episodes_.push_back(std::move(ep));
  return id;
}

int Memory::count(SpaceId space) const {
  auto it = index_.find(space);
  if (it == index_.end()) throw std::invalid_argument("unknown space id");
  return static_cast<int>(it->second.entries.size());
}

std::vector<KnnHit> Memory::knn(SpaceId space, const Vec& query, int k,
                                const Filter& filter) const {
  auto it = index_.find(space);
  if (it == index_.end()) throw std::invalid_argument("unknown space id");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const SpaceIndex& idx = it->second;

  Outcome q;
  q.space = space;
  q.values = query;
  const Vec qn = hierarchy_->normalize(q);
  const double cell_w = 1.0 / idx.cells_per_dim;

  // candidates as (squared distance, episode id); episode id breaks ties
  std::vector<std::pair<double, int>> best;
  auto consider = [&](int entry_id) {
    const Entry& e = idx.entries[entry_id];
    if (filter && !filter(episodes_[e.episode])) return;
    best.emplace_back(squared_distance(qn, e.point), e.episode);
  };

  std::vector<int> center(idx.dim);
  for (int i = 0; i < idx.dim; ++i) center[i] = idx.cell_coord(qn[i]);

  auto scan_ring = [&](int r) {
    // all cells with Chebyshev distance exactly r from the center cell
    std::vector<int> off(idx.dim, -r);
    while (true) {
      int cheb = 0;
      for (int v : off) cheb = std::max(cheb, std::abs(v));
      if (cheb == r) {
        bool ok = true;
        std::uint64_t key = 0;
        for (int i = 0; i < idx.dim; ++i) {
          const int c = center[i] + off[i];
          if (c < 0 || c >= idx.cells_per_dim) { ok = false; break; }
          key = key * static_cast<std::uint64_t>(idx.cells_per_dim) + c;
        }
        if (ok) {
          auto cit = idx.cells.find(key);
          if (cit != idx.cells.end())
            for (int eid : cit->second) consider(eid);
        }
      }
      int i = 0;
      for (; i < idx.dim; ++i) {
        if (off[i] < r) { ++off[i]; break; }
        off[i] = -r;
      }
      if (i == idx.dim) break;
    }
  };

  const int max_ring = idx.cells_per_dim;  // covers the whole grid
  for (int r = 0; r <= max_ring; ++r) {
    scan_ring(r);
    if (static_cast<int>(best.size()) >= k) {
      std::nth_element(best.begin(), best.begin() + (k - 1), best.end());
      const double kth = best[k - 1].first;
      // any unscanned point (ring > r) is at least r*cell_w away; strict
      // comparison so an unscanned tie cannot change the tie-break winner
      const double safe = static_cast<double>(r) * cell_w;
      if (kth < safe * safe) break;
    }
  }

  std::sort(best.begin(), best.end());
  if (static_cast<int>(best.size()) > k) best.resize(k);
  std::vector<KnnHit> out;
  out.reserve(best.size());
  for (const auto& [d2, eid] : best) out.push_back({eid, std::sqrt(d2)});
  return out;
}

int Memory::count_within(SpaceId space, const Vec& query, double radius) const {
  auto it = index_.find(space);
  if (it == index_.end()) throw std::invalid_argument("unknown space id");
  const SpaceIndex& idx = it->second;
  Outcome q;
  q.space = space;
  q.values = query;
  const Vec qn = hierarchy_->normalize(q);
  const double r2 = radius * radius;
  int n = 0;
  for (const Entry& e : idx.entries)
    if (squared_distance(qn, e.point) <= r2) ++n;
  return n;
}

}  // namespace imol

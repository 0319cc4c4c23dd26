#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace imol {

using Vec = std::vector<double>;

/// Outcome-space identifier. The primitive action space participates in the
/// hierarchy graph under the reserved id kActionSpace.
using SpaceId = int;
inline constexpr SpaceId kActionSpace = -1;

/// One motor primitive: p normalized joint targets in [-1, 1].
struct PrimitiveAction {
  Vec params;
};

/// Ordered sequence of primitives, n >= 1, all sharing the same p.
struct CompoundAction {
  std::vector<PrimitiveAction> actions;
};

struct Outcome {
  SpaceId space = 0;
  Vec values;
};

/// Element of the controllable set C = A ∪ Ω_cont.
using Controllable = std::variant<PrimitiveAction, Outcome>;

inline bool is_primitive(const Controllable& c) { return c.index() == 0; }

/// Ordered subgoal list standing for a task decomposition.
struct Procedure {
  std::vector<Outcome> subgoals;
};

struct SpaceSpec {
  SpaceId id = 0;
  std::string name;
  int dim = 0;
  Vec lo, hi;  // per-dimension bounds
};

/// Directed acyclic graph over task spaces: each task maps to the spaces
/// (or the primitive action space) that may serve as its components.
class TaskHierarchy {
 public:
  void add_space(SpaceSpec spec);
  void set_components(SpaceId task, std::vector<SpaceId> components);

  bool has_space(SpaceId id) const;
  const SpaceSpec& space(SpaceId id) const;
  const std::vector<SpaceId>& components(SpaceId task) const;
  const std::vector<SpaceSpec>& spaces() const { return spaces_; }

  /// Spaces that appear as a component of some task (Ω_cont).
  bool is_controllable(SpaceId id) const;
  /// Component spaces of `task` excluding the primitive action space.
  std::vector<SpaceId> component_outcome_spaces(SpaceId task) const;
  /// Longest component-chain length; bounds resolve() recursion.
  int depth() const;

  Vec normalize(const Outcome& o) const;
  Outcome denormalize(SpaceId space, const Vec& unit) const;
  /// Euclidean distance between two outcomes of the same space, computed in
  /// normalized [0,1]^d coordinates.
  double distance(const Outcome& a, const Outcome& b) const;
  bool in_bounds(const Outcome& o) const;

 private:
  void check_acyclic() const;

  std::vector<SpaceSpec> spaces_;
  std::map<SpaceId, std::vector<SpaceId>> components_;
};

/// One interaction record, stored for every episode including failed ones.
struct Episode {
  int iteration = 0;
  Vec context;  // environment start-state snapshot
  Outcome goal;
  int strategy_id = 0;
  std::optional<int> teacher_id;
  std::vector<Controllable> controllables;  // the chosen l_c
  CompoundAction compound;                  // what was actually executed
  std::map<SpaceId, Outcome> reached;       // hindsight: every elicited space
  double competence_goal = 0.0;
  std::optional<Outcome> emulation_target;  // teacher's target, when emulating
};

struct KnnHit {
  int episode = -1;   // index into Memory
  double distance = 0.0;
};

/// Append-only episodic memory with an exact per-space spatial index over
/// reached outcomes (uniform grid in normalized coordinates).
class Memory {
 public:
  explicit Memory(const TaskHierarchy* hierarchy);

  /// Appends the episode and indexes every reached outcome. Throws
  /// std::invalid_argument on out-of-bounds vectors (environment bug).
  int record(Episode ep);

  const Episode& episode(int idx) const { return episodes_[idx]; }
  int size() const { return static_cast<int>(episodes_.size()); }
  int count(SpaceId space) const;

  using Filter = std::function<bool(const Episode&)>;

  /// k nearest episodes whose reached outcome in `space` is closest to
  /// `query` (raw coordinates). Distances are Euclidean in normalized
  /// coordinates; ties broken by lower episode index (= iteration order).
  /// A filter, when given, restricts the candidate episodes.
  std::vector<KnnHit> knn(SpaceId space, const Vec& query, int k,
                          const Filter& filter = {}) const;

  /// Number of indexed outcomes within `radius` (normalized) of query (raw).
  int count_within(SpaceId space, const Vec& query, double radius) const;

  const TaskHierarchy& hierarchy() const { return *hierarchy_; }

 private:
  struct Entry {
    int episode;
    Vec point;  // normalized
  };
  struct SpaceIndex {
    int dim = 0;
    int cells_per_dim = 1;
    std::vector<Entry> entries;
    std::map<std::uint64_t, std::vector<int>> cells;  // cell key -> entry ids
    std::uint64_t key_of(const Vec& p) const;
    int cell_coord(double x) const;
  };

  const TaskHierarchy* hierarchy_;
  std::vector<Episode> episodes_;
  std::map<SpaceId, SpaceIndex> index_;
};

double squared_distance(const Vec& a, const Vec& b);

}  // namespace imol

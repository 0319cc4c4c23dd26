#pragma once

#include <array>

#include "imol/core.hpp"
#include "imol/rng.hpp"

namespace imol {

enum class StrategyKind {
  AutonomousAction,
  AutonomousProcedure,
  Mimicry,
  Emulation,
  ProceduralImitation,
};

bool is_imitation(StrategyKind k);
const char* strategy_kind_name(StrategyKind k);

struct StrategyDescriptor {
  int id = 0;
  StrategyKind kind = StrategyKind::AutonomousAction;
  int teacher = -1;    // index into the teacher set, imitation kinds only
  double cost = 1.0;   // κ ∈ (0, 1]
};

struct MotivationConfig {
  int split_threshold = 40;          // entries per region before a split
  int progress_window = 12;          // half-window mean comparison length
  double interest_init = 0.1;        // optimistic value until 2 entries exist
  double interest_floor = 1e-6;      // added to sampling weights
  std::array<double, 3> mode_probs{0.10, 0.70, 0.20};
};

/// Negative normalized Euclidean goal-to-reached distance; -sqrt(d) when the
/// goal's space was not elicited (the maximal distance in the unit cube).
double competence(const TaskHierarchy& h, const Outcome& goal,
                  const std::optional<Outcome>& reached);

double competence_floor(const TaskHierarchy& h, SpaceId space);

struct HistoryEntry {
  int iteration = 0;
  Vec goal;  // normalized
  double competence = 0.0;
};

/// Axis-aligned box in normalized coordinates; half-open on top except at
/// the space boundary so leaves tile [0,1]^d exactly.
struct Box {
  Vec lo, hi;
  bool contains(const Vec& p) const;
};

struct Region {
  SpaceId space = 0;
  Box box;
  int creation_index = 0;
  std::map<int, std::vector<HistoryEntry>> history;  // strategy id -> entries
  int total_entries = 0;
};

struct Selection {
  int strategy_id = 0;
  SpaceId space = 0;
  Outcome goal;
  int mode = 0;  // which of the three selector modes fired (1-based)
};

/// Per-space partition of the outcome space into regions carrying
/// per-strategy competence histories; the argmax machinery of the learner.
class InterestMap {
 public:
  InterestMap(const TaskHierarchy* hierarchy,
              std::vector<StrategyDescriptor> strategies,
              std::map<SpaceId, std::vector<int>> available_strategies,
              MotivationConfig cfg = {});

  const std::vector<Region>& regions(SpaceId space) const;
  const std::vector<StrategyDescriptor>& strategies() const { return strategies_; }
  const std::vector<int>& available(SpaceId space) const;
  const MotivationConfig& config() const { return cfg_; }

  double progress(const Region& r, int strategy_id) const;
  double interest(const Region& r, int strategy_id) const;

  Selection select(Rng& rng) const;

  /// Appends the episode's (goal, competence) to its leaf region and splits
  /// the leaf once when it exceeds the entry threshold.
  void update_and_split(const Episode& ep);

  /// Leaf lookup; throws if the partition were ever broken.
  const Region& leaf_of(SpaceId space, const Vec& goal_norm) const;

  /// Mean over the last `progress_window` entries split into newest/oldest
  /// halves; exposed for reuse by the split objective and tests.
  static double progress_of(const std::vector<double>& competences, int window,
                            double init);

 private:
  Outcome sample_goal_in(const Region& r, Rng& rng) const;
  void split_region(SpaceId space, size_t leaf_idx);
  double side_interest(const std::map<int, std::vector<HistoryEntry>>& hist) const;

  const TaskHierarchy* hierarchy_;
  std::vector<StrategyDescriptor> strategies_;
  std::map<SpaceId, std::vector<int>> available_;
  MotivationConfig cfg_;
  std::map<SpaceId, std::vector<Region>> leaves_;
  int next_creation_index_ = 0;
};

}  // namespace imol

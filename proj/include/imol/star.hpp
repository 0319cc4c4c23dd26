#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imol/rng.hpp"

namespace imol::star {

struct Cell {
  int row = 0, col = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

enum Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Grid world with absorbing goal; moving into a wall or off the grid stays.
class GridMaze {
 public:
  static GridMaze from_text(const std::string& text);
  static GridMaze from_file(const std::string& path);
  /// Built-in 9x9 '⊃' corridor: start bottom-left, exit top-left, the way
  /// between them walled off so the only route detours along the right side.
  static GridMaze ushape_default();

  int width() const { return width_; }
  int height() const { return height_; }
  bool wall(int row, int col) const;
  bool wall(Cell c) const { return wall(c.row, c.col); }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }

  Cell step(Cell from, Action a) const;
  int cell_index(Cell c) const { return c.row * width_ + c.col; }
  Cell cell_at(int index) const { return {index / width_, index % width_}; }
  int num_cells() const { return width_ * height_; }

  /// Normalized Euclidean distance to the task goal (r_ext = -distance).
  double goal_distance(Cell c) const;

  /// BFS shortest path length from start to goal.
  int shortest_path_length() const;

 private:
  void validate() const;
  int width_ = 0, height_ = 0;
  std::vector<std::uint8_t> walls_;
  Cell start_{}, goal_{};
};

/// Inclusive cell rectangle.
struct Rect {
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
  bool contains(Cell c) const {
    return c.row >= r0 && c.row <= r1 && c.col >= c0 && c.col <= c1;
  }
  int area() const { return (r1 - r0 + 1) * (c1 - c0 + 1); }
  bool single_cell() const { return r0 == r1 && c0 == c1; }
};

/// Partition of the grid into rectangles; abstract goals are the regions.
class Abstraction {
 public:
  static Abstraction uniform_grid(const GridMaze& maze, int rows, int cols);

  int region_of(Cell c) const;
  const std::vector<Rect>& regions() const { return regions_; }
  int size() const { return static_cast<int>(regions_.size()); }

  /// Splits region `idx`: the lower part keeps the index, the upper part is
  /// appended; returns the new region's index.
  int split(int idx, int dim, int threshold);

  /// Throws unless the rectangles tile the whole grid exactly.
  void check_partition(const GridMaze& maze) const;

 private:
  std::vector<Rect> regions_;
};

struct FeudalConfig {
  int commander_horizon = 20;  // k
  int tutor_horizon = 5;       // l
  double gamma = 0.95;
  double alpha = 0.1;
  double eps_start = 0.3;
  double eps_end = 0.05;
  int eps_decay_episodes = 1500;

  void validate() const;  // requires k > l > 1
  double epsilon(int episode) const;
};

struct RefineConfig {
  bool enabled = true;
  int min_attempts = 5;   // n_min per start cell
  double high_rate = 0.8;
  double low_rate = 0.2;
};

/// Per ordered region pair and per start cell: attempts and successes of
/// entering the commanded region within a Commander span.
class ReachabilityStats {
 public:
  void record_span(int from_region, int target_region, int start_cell, bool success);
  std::optional<double> rate(int from_region, int target_region) const;
  int attempts(int from_region, int target_region) const;
  std::optional<double> cell_rate(int start_cell, int target_region) const;
  int cell_attempts(int start_cell, int target_region) const;

  /// Region indices changed meaning: drop pair stats touching `region` and
  /// cell tallies toward it. Tallies toward other targets stay valid.
  void reset_region(int region);

  const std::map<std::pair<int, int>, std::pair<int, int>>& cell_stats() const {
    return cell_stats_;
  }

 private:
  std::map<std::pair<int, int>, std::pair<int, int>> pair_stats_;  // (i,j) -> (att, succ)
  std::map<std::pair<int, int>, std::pair<int, int>> cell_stats_;  // (cell, j) -> (att, succ)
};

/// Tabular Q functions of the three agents. Commander rows/columns are
/// duplicated to the child when a region splits.
class FeudalPolicies {
 public:
  FeudalPolicies(const GridMaze& maze, const FeudalConfig& cfg);

  double& commander_q(int from_region, int target_region);
  double& tutor_q(int cell, int target_region, int subgoal_cell);
  double& controller_q(int cell, int subgoal_cell, Action a);
  double controller_q(int cell, int subgoal_cell, Action a) const;

  int pick_commander_goal(int from_region, int num_regions, double eps, Rng& rng);
  int pick_tutor_subgoal(int cell, int target_region, const std::vector<int>& candidates,
                         double eps, Rng& rng);
  Action pick_controller_action(int cell, int subgoal_cell, double eps, Rng& rng);

  void on_region_split(int parent, int child);

  const FeudalConfig& config() const { return cfg_; }

 private:
  FeudalConfig cfg_;
  int num_cells_;
  std::map<std::pair<int, int>, double> commander_;
  std::map<std::tuple<int, int, int>, double> tutor_;
  std::vector<double> controller_;  // [cell][subgoal][action]
};

/// Cells of the region plus its 1-cell frontier, walls excluded, sorted.
std::vector<int> tutor_candidates(const GridMaze& maze, const Abstraction& abs,
                                  int target_region);

/// One Commander span, for replaying reachability bookkeeping from traces.
struct SpanRecord {
  int t0 = 0;   // trace index of the span's start state
  int len = 0;  // steps taken within the span
  int start_region = -1;
  int start_cell = -1;
  int target = -1;
  bool entered = false;
  bool counted = false;  // contributed to ReachabilityStats
};

struct EpisodeResult {
  std::vector<Cell> trace;  // includes the start state
  bool success = false;
  int steps = 0;
  std::vector<int> visited_regions;  // E: first-visit order
  std::vector<SpanRecord> spans;
};

/// One feudal episode with online Q-updates and reachability bookkeeping.
EpisodeResult run_episode(const GridMaze& maze, const Abstraction& abs,
                          FeudalPolicies& policies, ReachabilityStats& stats,
                          int horizon, double eps, Rng& rng);

/// Reachability-driven refinement over the episode's visited regions;
/// returns the number of splits performed.
int refine(const GridMaze& maze, Abstraction& abs, ReachabilityStats& stats,
           FeudalPolicies& policies, const std::vector<int>& visited,
           const RefineConfig& cfg);

/// Flat tabular Q-learning baseline with the sparse goal reward.
class FlatQ {
 public:
  FlatQ(const GridMaze& maze, double gamma = 0.95, double alpha = 0.1);
  bool run_episode(const GridMaze& maze, int horizon, double eps, Rng& rng,
                   int* steps_out = nullptr);

 private:
  double gamma_, alpha_;
  std::vector<double> q_;  // [cell][action]
};

}  // namespace imol::star

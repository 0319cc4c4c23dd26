#pragma once

#include "imol/config.hpp"

namespace imol {

struct MismatchedRunsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChoiceRow {
  int iteration = 0;
  int strategy_id = 0;
  StrategyKind kind = StrategyKind::AutonomousAction;
  int teacher = -1;
  SpaceId space = 0;
  Vec goal;
  double competence = 0.0;
  int mode = 0;
};

struct LearnerRunOutput {
  std::filesystem::path dir;
  std::vector<ChoiceRow> choices;
  /// One entry per evaluation point: (iteration, space -> mean error).
  std::vector<std::pair<int, std::map<SpaceId, double>>> eval_curve;
  /// (strategy id, space) -> episode count.
  std::map<std::pair<int, SpaceId>, int> histogram;
};

/// Per space, a fixed grid of evaluation goals, subsampled with the seed
/// when it exceeds the cap; never recorded into Memory.
std::map<SpaceId, std::vector<Outcome>> make_benchmark(const TaskHierarchy& h,
                                                       const EvalConfig& eval,
                                                       std::uint64_t seed);

/// Runs the whole learning loop and writes choices.csv, eval.csv,
/// histogram.csv, interest.csv, benchmark.csv and config.json under
/// out_root/<label>-seed<seed>/.
LearnerRunOutput run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_root);

struct StarEpisodeRow {
  int episode = 0;
  int steps = 0;
  bool success = false;
  int splits = 0;
  int regions = 0;
};

struct StarRunOutput {
  std::filesystem::path dir;
  std::vector<StarEpisodeRow> episodes;
  star::Abstraction abstraction;  // final
  int shortest_path = 0;
};

StarRunOutput run_star(const StarConfig& cfg, const std::filesystem::path& out_root);

/// Groups run directories by label, checks benchmarks match within each
/// seed, and writes a per-space comparison of final errors (median and IQR
/// across seeds, winner flagged). Returns the table as text.
std::string compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const std::filesystem::path& out_file);

}  // namespace imol

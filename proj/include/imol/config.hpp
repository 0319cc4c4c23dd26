#pragma once

#include <filesystem>
#include <string>

#include "imol/env_arm.hpp"
#include "imol/motivation.hpp"
#include "imol/star.hpp"
#include "imol/strategies.hpp"

namespace imol {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalConfig {
  int cadence = 250;
  int grid_per_dim = 5;
  int max_per_space = 200;
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::AutonomousAction;
  std::string teacher;  // name, imitation kinds only
  double cost = 1.0;
};

/// Full description of one learner run; a run is a pure function of this.
struct ExperimentConfig {
  std::string label = "run";
  std::uint64_t seed = 1;
  int budget = 1000;
  EvalConfig eval;
  WorldConfig env;
  TaskHierarchy hierarchy;  // defaults to the arm world's
  ModelConfig models;
  MotivationConfig motivation;
  ExplorationConfig exploration;
  std::vector<StrategySpec> strategies;
  std::vector<TeacherSpec> teachers;
  int fixed_mimic_period = 0;  // > 0 forces mimicry every Nth episode
};

struct StarConfig {
  std::string label = "star";
  std::uint64_t seed = 1;
  std::string engine = "star";  // "star" | "flat"
  int episodes = 3000;
  int horizon = 200;
  std::string maze_file;  // empty = built-in '⊃' maze
  star::FeudalConfig agents;
  star::RefineConfig refine;
  int init_rows = 3, init_cols = 3;
  int snapshot_cadence = 250;
};

/// Loads either kind of configuration; which one is decided by the presence
/// of an "engine"/"episodes" block. Throws ConfigError with a line-precise
/// message on parse failures and a field-path message on validation
/// failures.
bool is_star_config_file(const std::filesystem::path& path);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
StarConfig load_star_config(const std::filesystem::path& path);

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& origin = "<string>");
StarConfig parse_star_config(const std::string& json_text,
                             const std::string& origin = "<string>");

/// Canonical serialization written into each run directory; equal configs
/// serialize identically.
std::string canonical_json(const ExperimentConfig& cfg);
std::string canonical_json(const StarConfig& cfg);

StrategyKind strategy_kind_from_name(const std::string& name);

}  // namespace imol

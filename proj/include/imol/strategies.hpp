#pragma once

#include <set>

#include "imol/env_arm.hpp"
#include "imol/models.hpp"
#include "imol/motivation.hpp"

namespace imol {

struct NotExpertError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoComponentsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ActionDemo {
  CompoundAction action;
  Outcome achieved;
};

struct ProcedureDemo {
  Procedure procedure;
  Outcome achieved;
};

/// Scripted demonstrator. Immutable after construction apart from the query
/// counters; demo selection is nearest-achieved-outcome to the query goal.
class TeacherOracle {
 public:
  int id = 0;
  std::string name;
  std::set<SpaceId> expertise;
  std::map<SpaceId, std::vector<ActionDemo>> action_demos;
  std::map<SpaceId, std::vector<ProcedureDemo>> procedure_demos;
  double noise_sd = 0.0;  // correspondence error on delivered action params
  double cost = 0.7;      // κ

  /// Throws unless every expert space holds at least one demo and all demo
  /// outcomes lie in their spaces' bounds.
  void validate(const TaskHierarchy& h) const;

  bool expert_in(SpaceId s) const { return expertise.count(s) > 0; }
  bool has_action_demos(SpaceId s) const;
  bool has_procedure_demos(SpaceId s) const;

  /// Nearest action demo with delivery noise applied to every parameter.
  ActionDemo demonstrate_action(const TaskHierarchy& h, const Outcome& goal, Rng& rng) const;
  /// Achieved outcome of the nearest demo (action or procedure), as a target.
  Outcome demonstrate_outcome(const TaskHierarchy& h, const Outcome& goal) const;
  ProcedureDemo demonstrate_procedure(const TaskHierarchy& h, const Outcome& goal) const;

  void count_query(StrategyKind kind, SpaceId space) const;
  const std::map<std::pair<int, SpaceId>, int>& query_counts() const { return queries_; }

 private:
  mutable std::map<std::pair<int, SpaceId>, int> queries_;  // (kind, space) -> n
};

struct TeacherSpec {
  std::string name;
  std::vector<SpaceId> expertise;
  std::string demo_kind = "action";  // "action" | "procedure"
  int grid_per_dim = 5;
  int repertoire_cap = 0;  // 0 = unlimited; T_bad uses 3
  double noise_sd = 0.0;
  double cost = 0.7;
};

/// Generates teacher repertoires with privileged analytic IK on a grid of
/// goals, each demo verified by execution before it is admitted.
std::vector<TeacherOracle> build_teachers(const std::vector<TeacherSpec>& specs,
                                          ArmEnv& env, const TaskHierarchy& h);

struct ExplorationConfig {
  double noise_base = 0.05;       // σ_expl floor
  double noise_scale = 0.25;      // σ_expl range
  double noise_locality = 10.0;   // e-folding sample count
  double local_radius = 0.1;      // neighborhood for n_near (normalized)
  double procedure_reuse_prob = 0.5;
  double procedure_noise_sd = 0.1;  // on subgoal coordinates (normalized)
  int procedure_length = 2;
  double mimic_learner_sd = 0.02;   // repetition-with-variation
};

/// Everything a strategy needs for one episode.
struct LearnerContext {
  const TaskHierarchy* hierarchy = nullptr;
  Memory* memory = nullptr;
  const ModelSet* models = nullptr;
  ArmEnv* env = nullptr;
  ExplorationConfig expl;
  int iteration = 0;
};

/// Exploration noise σ_expl = base + scale * exp(-n_near / locality).
double exploration_sd(const ExplorationConfig& cfg, int n_near);

Episode explore_actions(LearnerContext& ctx, const StrategyDescriptor& strat,
                        const Outcome& goal, Rng& rng);
Episode explore_procedures(LearnerContext& ctx, const StrategyDescriptor& strat,
                           const Outcome& goal, Rng& rng);
Episode mimic_action(LearnerContext& ctx, const StrategyDescriptor& strat,
                     const TeacherOracle& teacher, const Outcome& goal, Rng& rng);
Episode emulate_outcome(LearnerContext& ctx, const StrategyDescriptor& strat,
                        const TeacherOracle& teacher, const Outcome& goal, Rng& rng);
Episode imitate_procedure(LearnerContext& ctx, const StrategyDescriptor& strat,
                          const TeacherOracle& teacher, const Outcome& goal, Rng& rng);

/// Dispatch on the descriptor's kind.
Episode apply_strategy(LearnerContext& ctx, const StrategyDescriptor& strat,
                       const std::vector<TeacherOracle>& teachers, const Outcome& goal,
                       Rng& rng);

/// Which strategies may serve which space: imitation iff a teacher is expert
/// there with the right demo kind; procedure kinds iff the hierarchy
/// declares component outcome spaces.
std::map<SpaceId, std::vector<int>> strategy_availability(
    const TaskHierarchy& h, const std::vector<StrategyDescriptor>& strategies,
    const std::vector<TeacherOracle>& teachers);

}  // namespace imol

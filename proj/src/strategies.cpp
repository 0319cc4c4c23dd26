#include "imol/strategies.hpp"

#include <algorithm>
#include <cmath>

namespace imol {

namespace {

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

PrimitiveAction perturbed(const PrimitiveAction& a, double sd, Rng& rng) {
  PrimitiveAction out = a;
  if (sd > 0.0)
    for (double& v : out.params) v = clamp(v + rng.normal(0.0, sd), -1.0, 1.0);
  return out;
}

CompoundAction perturbed(const CompoundAction& c, double sd, Rng& rng) {
  CompoundAction out;
  out.actions.reserve(c.actions.size());
  for (const auto& a : c.actions) out.actions.push_back(perturbed(a, sd, rng));
  return out;
}

std::optional<Outcome> reached_in(const std::map<SpaceId, Outcome>& reached, SpaceId s) {
  auto it = reached.find(s);
  if (it == reached.end()) return std::nullopt;
  return it->second;
}

/// Execute, score against the logged goal, and record.
Episode run_and_record(LearnerContext& ctx, const StrategyDescriptor& strat,
                       const Outcome& goal, std::vector<Controllable> controllables,
                       const CompoundAction& compound,
                       std::optional<Outcome> emulation_target = std::nullopt) {
  Episode ep;
  ep.iteration = ctx.iteration;
  const ArmState start = ctx.env->reset();
  ep.context = {start.joints[0], start.joints[1], start.joints[2]};
  ep.goal = goal;
  ep.strategy_id = strat.id;
  if (strat.teacher >= 0) ep.teacher_id = strat.teacher;
  ep.controllables = std::move(controllables);
  ep.compound = compound;
  ep.reached = ctx.env->execute(compound);
  ep.competence_goal = competence(*ctx.hierarchy, goal, reached_in(ep.reached, goal.space));
  ep.emulation_target = std::move(emulation_target);
  ctx.memory->record(ep);
  return ep;
}

/// Shared core of autonomous action exploration: infer toward `target`,
/// resolve, perturb with locally adapted noise, execute; competence is
/// logged against `log_goal`.
Episode explore_actions_toward(LearnerContext& ctx, const StrategyDescriptor& strat,
                               const Outcome& log_goal, const Outcome& target,
                               std::optional<Outcome> emulation_target, Rng& rng) {
  const auto seq = ctx.models->inverse_infer(target.space, target, rng);
  const CompoundAction base = ctx.models->resolve(seq, rng);
  const int n_near = ctx.memory->count_within(target.space, target.values,
                                              ctx.expl.local_radius);
  const double sd = exploration_sd(ctx.expl, n_near);
  const CompoundAction noisy = perturbed(base, sd, rng);
  std::vector<Controllable> executed;
  executed.reserve(noisy.actions.size());
  for (const auto& a : noisy.actions) executed.emplace_back(a);
  return run_and_record(ctx, strat, log_goal, std::move(executed), noisy,
                        std::move(emulation_target));
}

}  // namespace

double exploration_sd(const ExplorationConfig& cfg, int n_near) {
  return cfg.noise_base + cfg.noise_scale * std::exp(-n_near / cfg.noise_locality);
}

// ---------------------------------------------------------------------------
// TeacherOracle

void TeacherOracle::validate(const TaskHierarchy& h) const {
  if (noise_sd < 0.0) throw std::invalid_argument("teacher noise must be >= 0");
  if (cost <= 0.0) throw std::invalid_argument("teacher cost must be positive");
  for (SpaceId s : expertise) {
    const bool any = has_action_demos(s) || has_procedure_demos(s);
    if (!any)
      throw std::invalid_argument("teacher " + name + " has an empty repertoire for " +
                                  h.space(s).name);
  }
  for (const auto& [s, demos] : action_demos) {
    if (!expertise.count(s))
      throw std::invalid_argument("teacher " + name + " holds demos outside its expertise");
    for (const auto& d : demos)
      if (!h.in_bounds(d.achieved))
        throw std::invalid_argument("teacher demo outcome out of bounds");
  }
  for (const auto& [s, demos] : procedure_demos) {
    if (!expertise.count(s))
      throw std::invalid_argument("teacher " + name + " holds demos outside its expertise");
    for (const auto& d : demos)
      if (!h.in_bounds(d.achieved))
        throw std::invalid_argument("teacher demo outcome out of bounds");
  }
}

bool TeacherOracle::has_action_demos(SpaceId s) const {
  auto it = action_demos.find(s);
  return it != action_demos.end() && !it->second.empty();
}

bool TeacherOracle::has_procedure_demos(SpaceId s) const {
  auto it = procedure_demos.find(s);
  return it != procedure_demos.end() && !it->second.empty();
}

ActionDemo TeacherOracle::demonstrate_action(const TaskHierarchy& h, const Outcome& goal,
                                             Rng& rng) const {
  if (!expert_in(goal.space) || !has_action_demos(goal.space))
    throw NotExpertError(name + " has no action demos for " + h.space(goal.space).name);
  const auto& demos = action_demos.at(goal.space);
  const ActionDemo* best = nullptr;
  double best_d = 0.0;
  for (const auto& d : demos) {
    const double dist = h.distance(goal, d.achieved);
    if (!best || dist < best_d) {
      best = &d;
      best_d = dist;
    }
  }
  ActionDemo out = *best;
  out.action = perturbed(out.action, noise_sd, rng);
  return out;
}

Outcome TeacherOracle::demonstrate_outcome(const TaskHierarchy& h, const Outcome& goal) const {
  if (!expert_in(goal.space))
    throw NotExpertError(name + " is not expert in " + h.space(goal.space).name);
  const Outcome* best = nullptr;
  double best_d = 0.0;
  auto consider = [&](const Outcome& o) {
    const double dist = h.distance(goal, o);
    if (!best || dist < best_d) {
      best = &o;
      best_d = dist;
    }
  };
  if (auto it = action_demos.find(goal.space); it != action_demos.end())
    for (const auto& d : it->second) consider(d.achieved);
  if (auto it = procedure_demos.find(goal.space); it != procedure_demos.end())
    for (const auto& d : it->second) consider(d.achieved);
  if (!best) throw NotExpertError(name + " has no demos for " + h.space(goal.space).name);
  return *best;
}

ProcedureDemo TeacherOracle::demonstrate_procedure(const TaskHierarchy& h,
                                                   const Outcome& goal) const {
  if (!expert_in(goal.space) || !has_procedure_demos(goal.space))
    throw NotExpertError(name + " has no procedure demos for " + h.space(goal.space).name);
  const auto& demos = procedure_demos.at(goal.space);
  const ProcedureDemo* best = nullptr;
  double best_d = 0.0;
  for (const auto& d : demos) {
    const double dist = h.distance(goal, d.achieved);
    if (!best || dist < best_d) {
      best = &d;
      best_d = dist;
    }
  }
  return *best;
}

void TeacherOracle::count_query(StrategyKind kind, SpaceId space) const {
  queries_[{static_cast<int>(kind), space}] += 1;
}

// ---------------------------------------------------------------------------
// Strategies

Episode explore_actions(LearnerContext& ctx, const StrategyDescriptor& strat,
                        const Outcome& goal, Rng& rng) {
  return explore_actions_toward(ctx, strat, goal, goal, std::nullopt, rng);
}

Episode explore_procedures(LearnerContext& ctx, const StrategyDescriptor& strat,
                           const Outcome& goal, Rng& rng) {
  const auto comp_spaces = ctx.hierarchy->component_outcome_spaces(goal.space);
  if (comp_spaces.empty())
    throw NoComponentsError("no component outcome spaces for " +
                            ctx.hierarchy->space(goal.space).name);

  Procedure proc;
  const bool reuse = rng.uniform() < ctx.expl.procedure_reuse_prob;
  const Memory::Filter proc_filter = [&](const Episode& ep) {
    if (ep.controllables.empty()) return false;
    for (const auto& c : ep.controllables)
      if (is_primitive(c) ||
          std::find(comp_spaces.begin(), comp_spaces.end(),
                    std::get<Outcome>(c).space) == comp_spaces.end())
        return false;
    return true;
  };
  const auto stored = ctx.memory->knn(goal.space, goal.values, 1, proc_filter);

  if (reuse && !stored.empty()) {
    // nearest stored procedure, jittered on normalized subgoal coordinates
    for (const auto& c : ctx.memory->episode(stored[0].episode).controllables) {
      Outcome sub = std::get<Outcome>(c);
      Vec unit = ctx.hierarchy->normalize(sub);
      for (double& v : unit)
        v = clamp(v + rng.normal(0.0, ctx.expl.procedure_noise_sd), 0.0, 1.0);
      proc.subgoals.push_back(ctx.hierarchy->denormalize(sub.space, unit));
    }
  } else {
    for (int i = 0; i < ctx.expl.procedure_length; ++i) {
      const SpaceId s =
          comp_spaces[rng.uniform_int(static_cast<int>(comp_spaces.size()))];
      const SpaceSpec& spec = ctx.hierarchy->space(s);
      Vec unit(spec.dim);
      for (double& v : unit) v = rng.uniform();
      proc.subgoals.push_back(ctx.hierarchy->denormalize(s, unit));
    }
  }

  std::vector<Controllable> seq;
  seq.reserve(proc.subgoals.size());
  for (const auto& sub : proc.subgoals) seq.emplace_back(sub);
  const CompoundAction compound = ctx.models->resolve(seq, rng);
  return run_and_record(ctx, strat, goal, std::move(seq), compound);
}

Episode mimic_action(LearnerContext& ctx, const StrategyDescriptor& strat,
                     const TeacherOracle& teacher, const Outcome& goal, Rng& rng) {
  teacher.count_query(StrategyKind::Mimicry, goal.space);
  const ActionDemo demo = teacher.demonstrate_action(*ctx.hierarchy, goal, rng);
  const CompoundAction executed = perturbed(demo.action, ctx.expl.mimic_learner_sd, rng);
  std::vector<Controllable> seq;
  seq.reserve(executed.actions.size());
  for (const auto& a : executed.actions) seq.emplace_back(a);
  return run_and_record(ctx, strat, goal, std::move(seq), executed);
}

Episode emulate_outcome(LearnerContext& ctx, const StrategyDescriptor& strat,
                        const TeacherOracle& teacher, const Outcome& goal, Rng& rng) {
  teacher.count_query(StrategyKind::Emulation, goal.space);
  const Outcome target = teacher.demonstrate_outcome(*ctx.hierarchy, goal);
  // own inverse model toward the teacher's target; scored on the original goal
  return explore_actions_toward(ctx, strat, goal, target, target, rng);
}

Episode imitate_procedure(LearnerContext& ctx, const StrategyDescriptor& strat,
                          const TeacherOracle& teacher, const Outcome& goal, Rng& rng) {
  teacher.count_query(StrategyKind::ProceduralImitation, goal.space);
  const ProcedureDemo demo = teacher.demonstrate_procedure(*ctx.hierarchy, goal);

  // shift subgoals by (goal - demo outcome) where dimensions align: when the
  // subgoal dims partition the goal dims, each subgoal takes its slice
  Vec delta(goal.values.size());
  for (size_t i = 0; i < delta.size(); ++i)
    delta[i] = goal.values[i] - demo.achieved.values[i];

  size_t total_sub_dims = 0;
  for (const auto& s : demo.procedure.subgoals) total_sub_dims += s.values.size();

  Procedure shifted = demo.procedure;
  if (total_sub_dims == delta.size()) {
    size_t off = 0;
    for (auto& sub : shifted.subgoals) {
      const SpaceSpec& spec = ctx.hierarchy->space(sub.space);
      for (size_t d = 0; d < sub.values.size(); ++d)
        sub.values[d] = clamp(sub.values[d] + delta[off + d], spec.lo[d], spec.hi[d]);
      off += sub.values.size();
    }
  } else {
    for (auto& sub : shifted.subgoals) {
      if (sub.values.size() != delta.size()) continue;  // no alignment, no shift
      const SpaceSpec& spec = ctx.hierarchy->space(sub.space);
      for (size_t d = 0; d < sub.values.size(); ++d)
        sub.values[d] = clamp(sub.values[d] + delta[d], spec.lo[d], spec.hi[d]);
    }
  }

  std::vector<Controllable> seq;
  seq.reserve(shifted.subgoals.size());
  for (const auto& sub : shifted.subgoals) seq.emplace_back(sub);
  const CompoundAction compound = ctx.models->resolve(seq, rng);
  return run_and_record(ctx, strat, goal, std::move(seq), compound);
}

Episode apply_strategy(LearnerContext& ctx, const StrategyDescriptor& strat,
                       const std::vector<TeacherOracle>& teachers, const Outcome& goal,
                       Rng& rng) {
  switch (strat.kind) {
    case StrategyKind::AutonomousAction:
      return explore_actions(ctx, strat, goal, rng);
    case StrategyKind::AutonomousProcedure:
      return explore_procedures(ctx, strat, goal, rng);
    case StrategyKind::Mimicry:
      return mimic_action(ctx, strat, teachers.at(strat.teacher), goal, rng);
    case StrategyKind::Emulation:
      return emulate_outcome(ctx, strat, teachers.at(strat.teacher), goal, rng);
    case StrategyKind::ProceduralImitation:
      return imitate_procedure(ctx, strat, teachers.at(strat.teacher), goal, rng);
  }
  throw std::logic_error("unknown strategy kind");
}

std::map<SpaceId, std::vector<int>> strategy_availability(
    const TaskHierarchy& h, const std::vector<StrategyDescriptor>& strategies,
    const std::vector<TeacherOracle>& teachers) {
  std::map<SpaceId, std::vector<int>> out;
  for (const auto& spec : h.spaces()) {
    std::vector<int>& list = out[spec.id];
    for (const auto& s : strategies) {
      bool ok = false;
      switch (s.kind) {
        case StrategyKind::AutonomousAction:
          ok = true;
          break;
        case StrategyKind::AutonomousProcedure:
          ok = !h.component_outcome_spaces(spec.id).empty();
          break;
        case StrategyKind::Mimicry:
          ok = s.teacher >= 0 && teachers.at(s.teacher).expert_in(spec.id) &&
               teachers.at(s.teacher).has_action_demos(spec.id);
          break;
        case StrategyKind::Emulation:
          ok = s.teacher >= 0 && teachers.at(s.teacher).expert_in(spec.id);
          break;
        case StrategyKind::ProceduralImitation:
          ok = s.teacher >= 0 && teachers.at(s.teacher).expert_in(spec.id) &&
               teachers.at(s.teacher).has_procedure_demos(spec.id) &&
               !h.component_outcome_spaces(spec.id).empty();
          break;
      }
      if (ok) list.push_back(s.id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// build_teachers

namespace {

/// Grid of in-bounds 2D targets for a space, row-major.
std::vector<Point2> grid_points(const SpaceSpec& spec, int per_dim) {
  std::vector<Point2> pts;
  for (int i = 0; i < per_dim; ++i)
    for (int j = 0; j < per_dim; ++j) {
      const double fx = (i + 0.5) / per_dim;
      const double fy = (j + 0.5) / per_dim;
      pts.push_back({spec.lo[0] + fx * (spec.hi[0] - spec.lo[0]),
                     spec.lo[1] + fy * (spec.hi[1] - spec.lo[1])});
    }
  return pts;
}

bool close(const Vec& a, const Vec& b, double tol) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

std::vector<TeacherOracle> build_teachers(const std::vector<TeacherSpec>& specs,
                                          ArmEnv& env, const TaskHierarchy& h) {
  constexpr double kVerifyTol = 1e-9;
  std::vector<TeacherOracle> out;

  for (const auto& spec : specs) {
    TeacherOracle t;
    t.id = static_cast<int>(out.size());
    t.name = spec.name;
    t.noise_sd = spec.noise_sd;
    t.cost = spec.cost;
    t.expertise.insert(spec.expertise.begin(), spec.expertise.end());
    const auto grasp = env.analytic_ik(env.config().pen_position);
    if (!grasp) throw std::invalid_argument("pen grip position has no IK solution");

    for (SpaceId sid : spec.expertise) {
      const SpaceSpec& space = h.space(sid);
      const int cap = spec.repertoire_cap;

      if (spec.demo_kind == "action" && (sid == kTipSpace || sid == kPenSpace)) {
        for (const Point2& p : grid_points(space, spec.grid_per_dim)) {
          if (cap > 0 &&
              static_cast<int>(t.action_demos[sid].size()) >= cap)
            break;
          const auto ik = env.analytic_ik(p);
          if (!ik) continue;  // unreachable grid point
          CompoundAction demo;
          if (sid == kTipSpace) {
            demo.actions = {*ik};
          } else {
            demo.actions = {*grasp, *ik};
          }
          const auto reached = env.execute(demo);
          auto it = reached.find(sid);
          if (it == reached.end()) continue;
          if (!close(it->second.values, {p[0], p[1]}, kVerifyTol)) continue;
          t.action_demos[sid].push_back({demo, it->second});
        }
      } else if (spec.demo_kind == "procedure" && sid == kDrawSpace) {
        const SpaceSpec& pen = h.space(kPenSpace);
        const auto pts = grid_points(pen, spec.grid_per_dim);
        bool done = false;
        for (const Point2& a : pts) {
          for (const Point2& b : pts) {
            if (cap > 0 &&
                static_cast<int>(t.procedure_demos[sid].size()) >= cap) {
              done = true;
              break;
            }
            const auto ik_a = env.analytic_ik(a);
            const auto ik_b = env.analytic_ik(b);
            if (!ik_a || !ik_b) continue;
            // privileged realization: grasp, then visit both subgoals
            CompoundAction realization;
            realization.actions = {*grasp, *ik_a, *ik_b};
            const auto reached = env.execute(realization);
            auto it = reached.find(sid);
            if (it == reached.end()) continue;
            if (!close(it->second.values, {a[0], a[1], b[0], b[1]}, kVerifyTol)) continue;
            Procedure proc;
            proc.subgoals = {Outcome{kPenSpace, {a[0], a[1]}},
                             Outcome{kPenSpace, {b[0], b[1]}}};
            t.procedure_demos[sid].push_back({proc, it->second});
          }
          if (done) break;
        }
      } else {
        throw std::invalid_argument("teacher " + spec.name +
                                    ": unsupported demo kind for space " + space.name);
      }
    }
    t.validate(h);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace imol

#pragma once

#include <array>
#include <optional>

#include "imol/core.hpp"

namespace imol {

/// Default task-space ids of the arm world.
inline constexpr SpaceId kTipSpace = 0;   // Ω0: end-effector position
inline constexpr SpaceId kPenSpace = 1;   // Ω1: pen-tip position (requires grasp)
inline constexpr SpaceId kDrawSpace = 2;  // Ω2: (first, last) pen placement

using Point2 = std::array<double, 2>;

struct WorldConfig {
  std::array<double, 3> link_lengths{1.0, 1.0, 1.0};
  Point2 pen_position{1.2, 1.2};
  double grasp_radius = 0.15;
  double canvas_half_extent = 3.0;  // outcomes live in [-e, e]^d
  int micro_steps = 10;
};

struct ArmState {
  std::array<double, 3> joints{0.0, 0.0, 0.0};
  bool pen_held = false;
  Point2 pen_tip{0.0, 0.0};  // rests at the grip position until grasped
  std::vector<Point2> placements;
};

/// Deterministic 3-link planar arm. Reaching moves the tip (Ω0); passing
/// within the grasp radius of the pen picks it up for the rest of the
/// episode (Ω1); moving with the pen held leaves placements whose first and
/// last points form the drawing outcome (Ω2).
class ArmEnv {
 public:
  explicit ArmEnv(WorldConfig cfg = {});

  ArmState reset();
  Point2 forward_kinematics(const std::array<double, 3>& joints) const;
  void step_primitive(ArmState& state, const PrimitiveAction& a) const;

  /// Resets, runs the whole sequence, and reports every elicited outcome.
  std::map<SpaceId, Outcome> execute(const CompoundAction& compound);

  const ArmState& state() const { return state_; }
  const WorldConfig& config() const { return cfg_; }
  int action_dim() const { return 3; }

  /// Ω0/Ω1/Ω2 spaces with the drawing-over-pen-over-reach component edges.
  static TaskHierarchy default_hierarchy(const WorldConfig& cfg);

  /// Analytic inverse kinematics with the third joint fixed at 0 (links 2+3
  /// treated as one). Returns normalized params, or nothing if out of reach.
  std::optional<PrimitiveAction> analytic_ik(const Point2& target) const;

 private:
  WorldConfig cfg_;
  ArmState state_;
};

}  // namespace imol

#include "imol/env_arm.hpp"

#include <cmath>

namespace imol {

namespace {
double dist2(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}
}  // namespace

ArmEnv::ArmEnv(WorldConfig cfg) : cfg_(cfg) {
  if (cfg_.grasp_radius <= 0.0) throw std::invalid_argument("grasp radius must be positive");
  if (cfg_.micro_steps < 1) throw std::invalid_argument("micro_steps must be >= 1");
  double reach = 0.0;
  for (double l : cfg_.link_lengths) reach += l;
  if (std::sqrt(dist2(cfg_.pen_position, {0.0, 0.0})) > reach)
    throw std::invalid_argument("pen grip position is out of reach");
  reset();
}

ArmState ArmEnv::reset() {
  state_ = ArmState{};
  state_.pen_tip = cfg_.pen_position;
  return state_;
}

Point2 ArmEnv::forward_kinematics(const std::array<double, 3>& joints) const {
  double theta = 0.0, x = 0.0, y = 0.0;
  for (int i = 0; i < 3; ++i) {
    theta += joints[i];
    x += cfg_.link_lengths[i] * std::cos(theta);
    y += cfg_.link_lengths[i] * std::sin(theta);
  }
  return {x, y};
}

void ArmEnv::step_primitive(ArmState& state, const PrimitiveAction& a) const {
  if (a.params.size() != 3) throw std::invalid_argument("primitive must have 3 parameters");
  std::array<double, 3> target;
  for (int i = 0; i < 3; ++i) {
    double v = a.params[i];
    if (v < -1.0) v = -1.0;
    if (v > 1.0) v = 1.0;
    target[i] = v * M_PI;
  }

  // A primitive draws only if the pen was already held when it began;
  // the grasping motion itself leaves no placement.
  const bool held_at_start = state.pen_held;
  const std::array<double, 3> from = state.joints;
  Point2 tip{};
  for (int t = 1; t <= cfg_.micro_steps; ++t) {
    const double u = static_cast<double>(t) / cfg_.micro_steps;
    for (int i = 0; i < 3; ++i) state.joints[i] = from[i] + u * (target[i] - from[i]);
    tip = forward_kinematics(state.joints);
    if (!state.pen_held &&
        dist2(tip, cfg_.pen_position) <= cfg_.grasp_radius * cfg_.grasp_radius)
      state.pen_held = true;
    if (state.pen_held) state.pen_tip = tip;
  }
  if (held_at_start) state.placements.push_back(tip);
}

std::map<SpaceId, Outcome> ArmEnv::execute(const CompoundAction& compound) {
  if (compound.actions.empty()) throw std::invalid_argument("compound action must not be empty");
  reset();
  for (const auto& a : compound.actions) step_primitive(state_, a);

  std::map<SpaceId, Outcome> out;
  const Point2 tip = forward_kinematics(state_.joints);
  out[kTipSpace] = Outcome{kTipSpace, {tip[0], tip[1]}};
  if (state_.pen_held)
    out[kPenSpace] = Outcome{kPenSpace, {state_.pen_tip[0], state_.pen_tip[1]}};
  if (state_.placements.size() >= 2) {
    const Point2& first = state_.placements.front();
    const Point2& last = state_.placements.back();
    out[kDrawSpace] = Outcome{kDrawSpace, {first[0], first[1], last[0], last[1]}};
  }
  return out;
}

TaskHierarchy ArmEnv::default_hierarchy(const WorldConfig& cfg) {
  const double e = cfg.canvas_half_extent;
  TaskHierarchy h;
  h.add_space({kTipSpace, "omega0", 2, {-e, -e}, {e, e}});
  h.add_space({kPenSpace, "omega1", 2, {-e, -e}, {e, e}});
  h.add_space({kDrawSpace, "omega2", 4, {-e, -e, -e, -e}, {e, e, e, e}});
  h.set_components(kTipSpace, {kActionSpace});
  h.set_components(kPenSpace, {kActionSpace});
  h.set_components(kDrawSpace, {kActionSpace, kPenSpace});
  return h;
}

std::optional<PrimitiveAction> ArmEnv::analytic_ik(const Point2& target) const {
  const double l1 = cfg_.link_lengths[0];
  const double l2 = cfg_.link_lengths[1] + cfg_.link_lengths[2];
  const double x = target[0], y = target[1];
  const double r2 = x * x + y * y;
  const double c = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c < -1.0 || c > 1.0) return std::nullopt;
  const double q2 = std::acos(c);  // elbow-up branch
  double q1 = std::atan2(y, x) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  q1 = std::remainder(q1, 2.0 * M_PI);  // same pose, joint range [-pi, pi]
  return PrimitiveAction{{q1 / M_PI, q2 / M_PI, 0.0}};
}

}  // namespace imol

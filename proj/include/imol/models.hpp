#pragma once

#include "imol/core.hpp"
#include "imol/rng.hpp"

namespace imol {

struct EmptyModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int knn_k = 5;
  double blend_epsilon = 1e-9;  // inverse-distance weight regularizer
  bool random_fallback = true;  // empty model -> one uniform random primitive
  int action_dim = 3;
};

/// Memory-backed forward and inverse models (M_T, L_T) plus the recursive
/// resolution of controllable sequences into pure compound actions.
///
/// Candidate episodes for a task are those whose controllable slots all lie
/// in the task's permitted component set; blending happens among the k
/// nearest candidates sharing the nearest candidate's structure (same
/// length, same variant and space per slot).
class ModelSet {
 public:
  ModelSet(const TaskHierarchy* hierarchy, const Memory* memory, ModelConfig cfg = {});

  std::vector<Controllable> inverse_infer(SpaceId task, const Outcome& goal, Rng& rng) const;

  /// Replaces every outcome-variant element by the resolution of its own
  /// inverse inference; primitives pass through unchanged.
  CompoundAction resolve(const std::vector<Controllable>& seq, Rng& rng) const;

  Outcome forward_predict(SpaceId task, const std::vector<Controllable>& seq) const;

  /// Depth reached by the last resolve() call (instrumentation).
  int last_resolve_depth() const { return last_depth_; }

  const ModelConfig& config() const { return cfg_; }

 private:
  bool valid_for_task(SpaceId task, const Episode& ep) const;

  const TaskHierarchy* hierarchy_;
  const Memory* memory_;
  ModelConfig cfg_;
  mutable int last_depth_ = 0;
};

/// True when the two sequences have the same length and every slot has the
/// same variant (and, for outcome slots, the same space).
bool same_structure(const std::vector<Controllable>& a, const std::vector<Controllable>& b);

}  // namespace imol

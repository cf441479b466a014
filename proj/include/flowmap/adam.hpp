#pragma once

#include "flowmap/mlp.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Multiplicative decay applied to lr once per decay_interval steps.
  double lr_decay = 0.992;
  int decay_interval = 1000;

  double lr_at(long long step) const;
};

// First/second moment estimates in the flattened parameter layout.
struct AdamState {
  Vec m, v;
  long long step = 0;

  static AdamState init(std::size_t n) {
    AdamState s;
    s.m = Vec::Zero(n);
    s.v = Vec::Zero(n);
    return s;
  }
};

// One bias-corrected update on the flattened vector; lr is the effective
// rate for this step (after any decay).
void adam_step_flat(Vec& theta, const Vec& grad, AdamState& state,
                    const AdamHyper& hyper, double lr);

// Convenience wrapper operating directly on network parameters; applies
// the hyper's decay schedule based on the state's step counter.
void adam_step(MlpParams& params, AdamState& state, const AdamHyper& hyper);

}  // namespace flowmap

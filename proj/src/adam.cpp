#include "flowmap/adam.hpp"

#include <cmath>

namespace flowmap {

double AdamHyper::lr_at(long long step) const {
  if (decay_interval <= 0) return lr;
  return lr * std::pow(lr_decay,
                       static_cast<double>(step / decay_interval));
}

void adam_step_flat(Vec& theta, const Vec& grad, AdamState& state,
                    const AdamHyper& hyper, double lr) {
  if (theta.size() != grad.size() || theta.size() != state.m.size())
    throw NumericError("adam shape mismatch");
  state.step += 1;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v +
            (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  Vec mhat = state.m / c1;
  Vec vhat = state.v / c2;
  theta.array() -= lr * mhat.array() / (vhat.array().sqrt() + hyper.eps);
  if (!theta.allFinite())
    throw NumericError("non-finite parameter after adam step " +
                       std::to_string(state.step));
}

void adam_step(MlpParams& params, AdamState& state, const AdamHyper& hyper) {
  Vec theta = params.flatten();
  Vec grad = params.flatten_grad();
  if (!grad.allFinite())
    throw NumericError("non-finite gradient entering adam step " +
                       std::to_string(state.step + 1));
  adam_step_flat(theta, grad, state, hyper, hyper.lr_at(state.step));
  params.unflatten(theta);
}

}  // namespace flowmap

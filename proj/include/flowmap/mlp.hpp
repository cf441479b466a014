#pragma once

#include <vector>

#include "flowmap/rng.hpp"
#include "flowmap/tape.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Fully connected network parameters. Layer i maps widths[i] -> widths[i+1];
// every layer but the last is followed by the activation.
struct MlpParams {
  std::vector<ad::ParamBlock> layers;
  Activation act = Activation::gelu;

  static MlpParams init(const std::vector<int>& widths, Activation act,
                        Rng& rng, bool zero_final);

  int in_dim() const { return static_cast<int>(layers.front().W.rows()); }
  int out_dim() const { return static_cast<int>(layers.back().W.cols()); }
  std::vector<int> widths() const;

  std::size_t param_count() const;
  void zero_grad();

  // Declaration-order (de)serialization of values and gradients; used by
  // checkpoints, finite-difference checks, and the optimizer.
  Vec flatten() const;
  void unflatten(const Vec& theta);
  Vec flatten_grad() const;

  bool params_finite() const;
};

// Plain forward pass, no tape.
Mat mlp_value(const MlpParams& p, const Mat& in);

// Forward pass carrying a tangent channel, no tape.
void mlp_dual(const MlpParams& p, const Mat& in, const Mat& in_tangent,
              Mat& out, Mat& out_tangent);

// Forward pass recorded on a tape.
ad::Node* mlp_taped(ad::Tape& tape, MlpParams& p, ad::Node* in);

}  // namespace flowmap

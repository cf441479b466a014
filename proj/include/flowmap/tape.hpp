#pragma once

#include <memory>
#include <vector>

#include "flowmap/activation.hpp"
#include "flowmap/types.hpp"

namespace flowmap::ad {

// Mixed-mode differentiation tape.
//
// Each node carries a primal batch P (rows = samples) and, when a
// directional seed is active, a tangent batch T of the same shape: the
// forward-mode derivative of P along the seeded direction (a time input or
// a spatial direction). Reverse accumulation then runs over *both*
// channels, so a scalar loss built from tangents (a directional
// derivative) still yields exact parameter gradients. That pullback
// through the tangent of an activation is what requires second
// derivatives; see act_d2.
//
// Adjoint buffers are allocated lazily. A node whose adjoints were never
// touched is unreachable from the loss and its backward is skipped, which
// also makes stop-gradient barriers cheap.
struct Node {
  Mat P;       // primal value
  Mat T;       // tangent value; 0 x 0 when no seed reaches this node
  Mat Pb, Tb;  // reverse-mode adjoints of P and T

  virtual ~Node() = default;
  virtual void backward() {}

  bool has_tangent() const { return T.size() != 0; }
  bool touched() const { return Pb.size() != 0 || Tb.size() != 0; }

  void add_padj(const Mat& g) {
    if (Pb.size() == 0) Pb = g;
    else Pb += g;
  }
  void add_tadj(const Mat& g) {
    if (Tb.size() == 0) Tb = g;
    else Tb += g;
  }
};

// Per-layer parameter block; gradient storage lives next to the values so
// linear nodes can accumulate without owning anything.
struct ParamBlock {
  Mat W;   // in x out
  Vec b;   // out
  Mat gW;
  Vec gb;

  void zero_grad() {
    gW = Mat::Zero(W.rows(), W.cols());
    gb = Vec::Zero(b.size());
  }
};

// Sinusoidal time features: for frequency count F, maps a time to
// [sin(2^k pi t), cos(2^k pi t)] for k = 0..F-1 (2F features).
struct EmbedSpec {
  int freqs = 8;
  int dim() const { return 2 * freqs; }

  void embed(const Vec& tau, Mat& out) const;
  void embed_deriv(const Vec& tau, Mat& out) const;
};

class Tape {
 public:
  // Constant leaves. The dual variant declares a tangent (e.g. a spatial
  // direction seed on x).
  Node* constant(Mat P);
  Node* constant_dual(Mat P, Mat T);

  // Time features for per-row times tau; seed is the scalar tangent of the
  // time variable itself (1 when differentiating in this time, else 0).
  Node* time_embed(const Vec& tau, double seed, const EmbedSpec& spec);

  Node* concat(const std::vector<Node*>& parts);
  Node* linear(Node* in, ParamBlock* p, int layer_index);
  Node* activation(Node* in, Activation act);

  // X = x + (t-s) * v rowwise; seed_scale = d(t-s)/dseed in {-1, 0, 1}.
  Node* ansatz(Node* x, Node* v, Vec t_minus_s, double seed_scale);

  Node* value_of(Node* in);    // drops the tangent channel
  Node* tangent_of(Node* in);  // promotes the tangent to a primal value
  Node* stop_grad(Node* in);   // barrier: forward copy, no pullback

  Node* add(Node* a, Node* b);
  Node* sub(Node* a, Node* b);
  Node* scale(Node* a, double c);
  Node* row_scale(Node* a, Vec factors);  // one factor per batch row

  // Scalar loss: mean over rows of the squared row norm.
  Node* mean_sq_norm(Node* r);

  // Reverse accumulation from a 1x1 root. Parameter gradients land in the
  // ParamBlocks referenced by linear nodes; call zero_grad on them first.
  void backward(Node* root);

  double scalar(const Node* n) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  template <typename N>
  N* push(std::unique_ptr<N> n) {
    N* raw = n.get();
    nodes_.push_back(std::move(n));
    return raw;
  }

  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace flowmap::ad

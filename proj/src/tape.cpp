#include "flowmap/tape.hpp"

#include <cmath>

namespace flowmap::ad {

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat rowscale(const Mat& m, const Vec& r) {
  return (m.array().colwise() * r.array()).matrix();
}

}  // namespace

void EmbedSpec::embed(const Vec& tau, Mat& out) const {
  out.resize(tau.size(), dim());
  for (int k = 0; k < freqs; ++k) {
    double w = std::ldexp(kPi, k);
    out.col(2 * k) = (w * tau.array()).sin();
    out.col(2 * k + 1) = (w * tau.array()).cos();
  }
}

void EmbedSpec::embed_deriv(const Vec& tau, Mat& out) const {
  out.resize(tau.size(), dim());
  for (int k = 0; k < freqs; ++k) {
    double w = std::ldexp(kPi, k);
    out.col(2 * k) = w * (w * tau.array()).cos();
    out.col(2 * k + 1) = -w * (w * tau.array()).sin();
  }
}

namespace {

struct ConstNode : Node {};

struct ConcatNode : Node {
  std::vector<Node*> in;

  void backward() override {
    Eigen::Index c0 = 0;
    for (Node* n : in) {
      Eigen::Index w = n->P.cols();
      if (Pb.size()) n->add_padj(Pb.middleCols(c0, w));
      if (Tb.size() && n->has_tangent()) n->add_tadj(Tb.middleCols(c0, w));
      c0 += w;
    }
  }
};

struct LinearNode : Node {
  Node* in = nullptr;
  ParamBlock* p = nullptr;

  void backward() override {
    if (Pb.size()) {
      p->gW.noalias() += in->P.transpose() * Pb;
      p->gb.noalias() += Pb.colwise().sum().transpose();
      in->add_padj(Pb * p->W.transpose());
    }
    if (Tb.size()) {
      // Tangent channel: T_out = T_in W, so W picks up T_in' * Tb and the
      // input tangent receives Tb W'.
      p->gW.noalias() += in->T.transpose() * Tb;
      in->add_tadj(Tb * p->W.transpose());
    }
  }
};

struct ActNode : Node {
  Node* in = nullptr;
  Activation act{};
  Mat d1;  // f'(input), reused by forward tangent and both pullbacks

  void backward() override {
    if (Pb.size()) in->add_padj(d1.cwiseProduct(Pb));
    if (Tb.size()) {
      in->add_tadj(d1.cwiseProduct(Tb));
      // T_out = f'(P_in) . T_in depends on P_in too; its pullback carries
      // the second derivative.
      Mat d2;
      act_d2(act, in->P, d2);
      in->add_padj(d2.cwiseProduct(in->T).cwiseProduct(Tb));
    }
  }
};

struct AnsatzNode : Node {
  Node* x = nullptr;
  Node* v = nullptr;
  Vec ts;             // t - s per row
  double seed = 0.0;  // d(t-s)/dseed

  void backward() override {
    if (Pb.size()) {
      x->add_padj(Pb);
      v->add_padj(rowscale(Pb, ts));
    }
    if (Tb.size()) {
      if (x->has_tangent()) x->add_tadj(Tb);
      if (seed != 0.0) v->add_padj(seed * Tb);
      if (v->has_tangent()) v->add_tadj(rowscale(Tb, ts));
    }
  }
};

struct ValueNode : Node {
  Node* in = nullptr;
  void backward() override {
    if (Pb.size()) in->add_padj(Pb);
  }
};

struct TangentNode : Node {
  Node* in = nullptr;
  void backward() override {
    if (Pb.size()) in->add_tadj(Pb);
  }
};

struct StopGradNode : Node {};

struct AddNode : Node {
  Node* a = nullptr;
  Node* b = nullptr;
  double sb = 1.0;  // +1 add, -1 sub

  void backward() override {
    if (Pb.size()) {
      a->add_padj(Pb);
      b->add_padj(sb * Pb);
    }
    if (Tb.size()) {
      if (a->has_tangent()) a->add_tadj(Tb);
      if (b->has_tangent()) b->add_tadj(sb * Tb);
    }
  }
};

struct ScaleNode : Node {
  Node* in = nullptr;
  double c = 1.0;

  void backward() override {
    if (Pb.size()) in->add_padj(c * Pb);
    if (Tb.size()) in->add_tadj(c * Tb);
  }
};

struct RowScaleNode : Node {
  Node* in = nullptr;
  Vec r;

  void backward() override {
    if (Pb.size()) in->add_padj(rowscale(Pb, r));
    if (Tb.size()) in->add_tadj(rowscale(Tb, r));
  }
};

struct MeanSqNormNode : Node {
  Node* in = nullptr;

  void backward() override {
    if (Pb.size())
      in->add_padj((2.0 / static_cast<double>(in->P.rows())) * Pb(0, 0) *
                   in->P);
  }
};

}  // namespace

Node* Tape::constant(Mat P) {
  auto n = std::make_unique<ConstNode>();
  n->P = std::move(P);
  return push(std::move(n));
}

Node* Tape::constant_dual(Mat P, Mat T) {
  if (P.rows() != T.rows() || P.cols() != T.cols())
    throw NumericError("dual constant primal/tangent shape mismatch");
  auto n = std::make_unique<ConstNode>();
  n->P = std::move(P);
  n->T = std::move(T);
  return push(std::move(n));
}

Node* Tape::time_embed(const Vec& tau, double seed, const EmbedSpec& spec) {
  auto n = std::make_unique<ConstNode>();
  spec.embed(tau, n->P);
  if (seed != 0.0) {
    spec.embed_deriv(tau, n->T);
    if (seed != 1.0) n->T *= seed;
  }
  return push(std::move(n));
}

Node* Tape::concat(const std::vector<Node*>& parts) {
  auto n = std::make_unique<ConcatNode>();
  n->in = parts;
  Eigen::Index rows = parts.front()->P.rows(), cols = 0;
  bool any_t = false;
  for (Node* p : parts) {
    cols += p->P.cols();
    any_t |= p->has_tangent();
  }
  n->P.resize(rows, cols);
  if (any_t) n->T = Mat::Zero(rows, cols);
  Eigen::Index c0 = 0;
  for (Node* p : parts) {
    Eigen::Index w = p->P.cols();
    n->P.middleCols(c0, w) = p->P;
    if (any_t && p->has_tangent()) n->T.middleCols(c0, w) = p->T;
    c0 += w;
  }
  return push(std::move(n));
}

Node* Tape::linear(Node* in, ParamBlock* p, int layer_index) {
  auto n = std::make_unique<LinearNode>();
  n->in = in;
  n->p = p;
  n->P.noalias() = in->P * p->W;
  n->P.rowwise() += p->b.transpose();
  if (!n->P.allFinite())
    throw NumericError("non-finite output at linear layer " +
                       std::to_string(layer_index));
  if (in->has_tangent()) n->T.noalias() = in->T * p->W;
  return push(std::move(n));
}

Node* Tape::activation(Node* in, Activation act) {
  auto n = std::make_unique<ActNode>();
  n->in = in;
  n->act = act;
  act_value(act, in->P, n->P);
  act_d1(act, in->P, n->d1);
  if (in->has_tangent()) n->T = n->d1.cwiseProduct(in->T);
  return push(std::move(n));
}

Node* Tape::ansatz(Node* x, Node* v, Vec t_minus_s, double seed_scale) {
  auto n = std::make_unique<AnsatzNode>();
  n->x = x;
  n->v = v;
  n->ts = std::move(t_minus_s);
  n->seed = seed_scale;
  n->P = x->P + rowscale(v->P, n->ts);
  if (x->has_tangent() || v->has_tangent() || seed_scale != 0.0) {
    n->T = Mat::Zero(n->P.rows(), n->P.cols());
    if (x->has_tangent()) n->T = x->T;
    if (seed_scale != 0.0) n->T += seed_scale * v->P;
    if (v->has_tangent()) n->T += rowscale(v->T, n->ts);
  }
  return push(std::move(n));
}

Node* Tape::value_of(Node* in) {
  auto n = std::make_unique<ValueNode>();
  n->in = in;
  n->P = in->P;
  return push(std::move(n));
}

Node* Tape::tangent_of(Node* in) {
  if (!in->has_tangent())
    throw NumericError("tangent_of on a node without a tangent channel");
  auto n = std::make_unique<TangentNode>();
  n->in = in;
  n->P = in->T;
  return push(std::move(n));
}

Node* Tape::stop_grad(Node* in) {
  auto n = std::make_unique<StopGradNode>();
  n->P = in->P;
  n->T = in->T;
  return push(std::move(n));
}

Node* Tape::add(Node* a, Node* b) {
  auto n = std::make_unique<AddNode>();
  n->a = a;
  n->b = b;
  n->P = a->P + b->P;
  if (a->has_tangent() || b->has_tangent()) {
    n->T = a->has_tangent() ? a->T : Mat(Mat::Zero(a->P.rows(), a->P.cols()));
    if (b->has_tangent()) n->T += b->T;
  }
  return push(std::move(n));
}

Node* Tape::sub(Node* a, Node* b) {
  auto n = std::make_unique<AddNode>();
  n->a = a;
  n->b = b;
  n->sb = -1.0;
  n->P = a->P - b->P;
  if (a->has_tangent() || b->has_tangent()) {
    n->T = a->has_tangent() ? a->T : Mat(Mat::Zero(a->P.rows(), a->P.cols()));
    if (b->has_tangent()) n->T -= b->T;
  }
  return push(std::move(n));
}

Node* Tape::scale(Node* in, double c) {
  auto n = std::make_unique<ScaleNode>();
  n->in = in;
  n->c = c;
  n->P = c * in->P;
  if (in->has_tangent()) n->T = c * in->T;
  return push(std::move(n));
}

Node* Tape::row_scale(Node* in, Vec factors) {
  if (factors.size() != in->P.rows())
    throw NumericError("row_scale factor count mismatch");
  auto n = std::make_unique<RowScaleNode>();
  n->in = in;
  n->r = std::move(factors);
  n->P = rowscale(in->P, n->r);
  if (in->has_tangent()) n->T = rowscale(in->T, n->r);
  return push(std::move(n));
}

Node* Tape::mean_sq_norm(Node* r) {
  auto n = std::make_unique<MeanSqNormNode>();
  n->in = r;
  n->P = Mat::Constant(1, 1, r->P.squaredNorm() /
                             static_cast<double>(r->P.rows()));
  return push(std::move(n));
}

void Tape::backward(Node* root) {
  if (root->P.rows() != 1 || root->P.cols() != 1)
    throw NumericError("backward root must be a scalar node");
  root->add_padj(Mat::Ones(1, 1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->touched()) n->backward();
  }
}

double Tape::scalar(const Node* n) const {
  if (n->P.rows() != 1 || n->P.cols() != 1)
    throw NumericError("scalar() on a non-scalar node");
  return n->P(0, 0);
}

}  // namespace flowmap::ad

#include "flowmap/model.hpp"

#include <cmath>

namespace flowmap {

namespace {

void check_times(const Vec& t, const char* what) {
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (!(t(i) >= 0.0 && t(i) <= 1.0))
      throw DomainError(std::string(what) + " time " + std::to_string(t(i)) +
                        " outside [0,1]");
}

std::vector<int> full_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

// Shared input checks; returns the one-hot block when the model needs one.
Mat check_inputs(int d, int num_classes, const Mat& x, const IVec* labels) {
  if (x.cols() != d) throw DomainError("point dimension mismatch");
  if (num_classes > 0) {
    if (!labels || labels->size() != x.rows())
      throw ConfigError("conditional model requires one label per sample");
    return one_hot(*labels, num_classes);
  }
  return Mat();
}

}  // namespace

Mat one_hot(const IVec& labels, int num_classes) {
  Mat oh = Mat::Zero(labels.size(), num_classes);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0 || labels(i) >= num_classes)
      throw DomainError("label " + std::to_string(labels(i)) +
                        " outside 0.." + std::to_string(num_classes - 1));
    oh(i, labels(i)) = 1.0;
  }
  return oh;
}

VelocityModel VelocityModel::init(int d, const std::vector<int>& hidden,
                                  Activation act, const ad::EmbedSpec& emb,
                                  int num_classes, Rng& rng) {
  VelocityModel m;
  m.d = d;
  m.num_classes = num_classes;
  m.emb = emb;
  int in = emb.dim() + d + num_classes;
  m.mlp = MlpParams::init(full_widths(in, hidden, d), act, rng,
                          /*zero_final=*/false);
  return m;
}

FlowMapModel FlowMapModel::init(int d, const std::vector<int>& hidden,
                                Activation act, const ad::EmbedSpec& emb,
                                int num_classes, Rng& rng) {
  FlowMapModel m;
  m.d = d;
  m.num_classes = num_classes;
  m.emb = emb;
  int in = 2 * emb.dim() + d + num_classes;
  // Zero final layer: v = 0 initially, so the map starts as the identity.
  m.mlp = MlpParams::init(full_widths(in, hidden, d), act, rng,
                          /*zero_final=*/true);
  return m;
}

Mat velocity_value(const VelocityModel& m, const Vec& t, const Mat& x,
                   const IVec* labels) {
  check_times(t, "velocity");
  Mat oh = check_inputs(m.d, m.num_classes, x, labels);
  Mat in(x.rows(), m.emb.dim() + m.d + m.num_classes);
  Mat te;
  m.emb.embed(t, te);
  in.leftCols(m.emb.dim()) = te;
  in.middleCols(m.emb.dim(), m.d) = x;
  if (m.num_classes > 0) in.rightCols(m.num_classes) = oh;
  return mlp_value(m.mlp, in);
}

namespace {

// Builds the flow-map feature block and its tangent for the chosen seed.
void flow_map_features(const FlowMapModel& m, const Vec& s, const Vec& t,
                       const Mat& x, SeedVar seed, const Mat* xdot,
                       const Mat& oh, Mat& in, Mat& in_t) {
  Eigen::Index n = x.rows();
  int ed = m.emb.dim();
  in.resize(n, 2 * ed + m.d + m.num_classes);
  Mat block;
  m.emb.embed(s, block);
  in.leftCols(ed) = block;
  m.emb.embed(t, block);
  in.middleCols(ed, ed) = block;
  in.middleCols(2 * ed, m.d) = x;
  if (m.num_classes > 0) in.rightCols(m.num_classes) = oh;

  if (seed == SeedVar::none) {
    in_t.resize(0, 0);
    return;
  }
  in_t = Mat::Zero(in.rows(), in.cols());
  if (seed == SeedVar::s) {
    m.emb.embed_deriv(s, block);
    in_t.leftCols(ed) = block;
  } else if (seed == SeedVar::t) {
    m.emb.embed_deriv(t, block);
    in_t.middleCols(ed, ed) = block;
  } else {
    if (!xdot) throw DomainError("spatial seed requires a direction");
    if (xdot->rows() != n || xdot->cols() != m.d)
      throw DomainError("direction shape mismatch");
    in_t.middleCols(2 * ed, m.d) = *xdot;
  }
}

}  // namespace

Mat flow_map_value(const FlowMapModel& m, const Vec& s, const Vec& t,
                   const Mat& x, const IVec* labels) {
  check_times(s, "flow map");
  check_times(t, "flow map");
  Mat oh = check_inputs(m.d, m.num_classes, x, labels);
  Mat in, in_t;
  flow_map_features(m, s, t, x, SeedVar::none, nullptr, oh, in, in_t);
  Mat v = mlp_value(m.mlp, in);
  return x + (v.array().colwise() * (t - s).array()).matrix();
}

DualEval flow_map_dual(const FlowMapModel& m, const Vec& s, const Vec& t,
                       const Mat& x, SeedVar seed, const Mat* xdot,
                       const IVec* labels) {
  check_times(s, "flow map");
  check_times(t, "flow map");
  Mat oh = check_inputs(m.d, m.num_classes, x, labels);
  Mat in, in_t;
  flow_map_features(m, s, t, x, seed, xdot, oh, in, in_t);
  if (seed == SeedVar::none)
    throw DomainError("dual evaluation needs a seed variable");

  DualEval out;
  Mat v, vt;
  mlp_dual(m.mlp, in, in_t, v, vt);
  Vec ts = t - s;
  out.value = x + (v.array().colwise() * ts.array()).matrix();
  // d/dseed [x + (t-s) v]: the (t-s) factor contributes -v for an s seed,
  // +v for a t seed; an x seed contributes the direction itself.
  out.tangent = (vt.array().colwise() * ts.array()).matrix();
  if (seed == SeedVar::s) out.tangent -= v;
  else if (seed == SeedVar::t) out.tangent += v;
  else out.tangent += *xdot;
  return out;
}

Vec velocity_eval(const VelocityModel& m, double t, const Vec& x, int label) {
  Vec tv = Vec::Constant(1, t);
  IVec lv;
  if (label >= 0) lv = IVec::Constant(1, label);
  return velocity_value(m, tv, x.transpose(), label >= 0 ? &lv : nullptr)
      .row(0);
}

namespace {

std::pair<Vec, Vec> dual_point(const FlowMapModel& m, double s, double t,
                               const Vec& x, SeedVar seed, const Vec* dir,
                               int label) {
  Vec sv = Vec::Constant(1, s), tv = Vec::Constant(1, t);
  IVec lv;
  if (label >= 0) lv = IVec::Constant(1, label);
  Mat dm;
  if (dir) dm = dir->transpose();
  DualEval de = flow_map_dual(m, sv, tv, x.transpose(), seed,
                              dir ? &dm : nullptr,
                              label >= 0 ? &lv : nullptr);
  return {de.value.row(0), de.tangent.row(0)};
}

}  // namespace

Vec flow_map_eval(const FlowMapModel& m, double s, double t, const Vec& x,
                  int label) {
  Vec sv = Vec::Constant(1, s), tv = Vec::Constant(1, t);
  IVec lv;
  if (label >= 0) lv = IVec::Constant(1, label);
  return flow_map_value(m, sv, tv, x.transpose(), label >= 0 ? &lv : nullptr)
      .row(0);
}

std::pair<Vec, Vec> flow_map_dt(const FlowMapModel& m, double s, double t,
                                const Vec& x, int label) {
  return dual_point(m, s, t, x, SeedVar::t, nullptr, label);
}

std::pair<Vec, Vec> flow_map_ds(const FlowMapModel& m, double s, double t,
                                const Vec& x, int label) {
  return dual_point(m, s, t, x, SeedVar::s, nullptr, label);
}

std::pair<Vec, Vec> flow_map_jvp_x(const FlowMapModel& m, double s, double t,
                                   const Vec& x, const Vec& dir, int label) {
  return dual_point(m, s, t, x, SeedVar::x, &dir, label);
}

ad::Node* velocity_taped(ad::Tape& tape, VelocityModel& m, const Vec& t,
                         ad::Node* x, const IVec* labels) {
  check_times(t, "velocity");
  Mat oh = check_inputs(m.d, m.num_classes, x->P, labels);
  std::vector<ad::Node*> parts;
  parts.push_back(tape.time_embed(t, 0.0, m.emb));
  parts.push_back(x);
  if (m.num_classes > 0) parts.push_back(tape.constant(std::move(oh)));
  return mlp_taped(tape, m.mlp, tape.concat(parts));
}

ad::Node* flow_map_taped(ad::Tape& tape, FlowMapModel& m, const Vec& s,
                         const Vec& t, ad::Node* x, const IVec* labels,
                         double sdot, double tdot) {
  check_times(s, "flow map");
  check_times(t, "flow map");
  Mat oh = check_inputs(m.d, m.num_classes, x->P, labels);
  std::vector<ad::Node*> parts;
  parts.push_back(tape.time_embed(s, sdot, m.emb));
  parts.push_back(tape.time_embed(t, tdot, m.emb));
  parts.push_back(x);
  if (m.num_classes > 0) parts.push_back(tape.constant(std::move(oh)));
  ad::Node* v = mlp_taped(tape, m.mlp, tape.concat(parts));
  return tape.ansatz(x, v, t - s, tdot - sdot);
}

}  // namespace flowmap

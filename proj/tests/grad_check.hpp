#pragma once

// Randomized derivative and gradient verification shared by the unit and
// acceptance suites. Each case draws a small random network, schedule, and
// batch, then checks
//   (a) the map's dt/ds/jvp operators against central differences of its
//       plain evaluation, and
//   (b) the taped parameter gradient of one training objective against a
//       central difference of the recomputed scalar loss along random
//       parameter directions.
// The ee objective contains a stop-gradient barrier, so its finite
// difference reference holds the barred branch fixed at the base
// parameters; everywhere else the plain loss value is the reference.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "flowmap/interpolant.hpp"
#include "flowmap/maps.hpp"
#include "flowmap/model.hpp"
#include "flowmap/objectives.hpp"
#include "flowmap/rng.hpp"
#include "flowmap/schedule.hpp"
#include "flowmap/types.hpp"

namespace gradcheck {

using namespace flowmap;

struct CaseSpec {
  std::uint64_t seed = 0;
  LossKind loss = LossKind::velocity;
  ScheduleKind sched = ScheduleKind::linear;
  Activation act = Activation::gelu;
  std::vector<int> hidden;
  int dim = 2;
  int classes = 0;
  int freqs = 4;
  int batch = 8;
  int pfmm_K = 2;
  double fmm_lambda = 1.0;
};

struct CaseResult {
  double max_deriv_err = 0.0;  // dt/ds/jvp vs central FD, relative
  double max_grad_err = 0.0;   // directional parameter gradient, relative
};

// Deterministic case family: the loss kind cycles so every objective gets
// an even share of any case count.
inline CaseSpec random_case(int index, std::uint64_t salt = 0) {
  Rng rng(0x5eedu + 1315423911ull * static_cast<std::uint64_t>(index) + salt);
  CaseSpec c;
  c.seed = rng.raw();
  c.loss = static_cast<LossKind>(index % 7);
  const ScheduleKind kinds[] = {ScheduleKind::linear, ScheduleKind::trig,
                                ScheduleKind::vp_diffusion};
  c.sched = kinds[rng.below(3)];
  const Activation acts[] = {Activation::gelu, Activation::silu,
                             Activation::tanh_};
  c.act = acts[rng.below(3)];
  int layers = 1 + static_cast<int>(rng.below(2));
  for (int i = 0; i < layers; ++i)
    c.hidden.push_back(8 + static_cast<int>(rng.below(3)) * 8);
  c.classes = rng.below(4) == 0 ? 2 : 0;
  c.dim = c.classes ? 2 : 1 + static_cast<int>(rng.below(3));
  c.freqs = 2 + static_cast<int>(rng.below(3));
  c.batch = 4 + static_cast<int>(rng.below(9));
  c.pfmm_K = 2 + static_cast<int>(rng.below(3));
  c.fmm_lambda = 0.5 + rng.uniform();
  return c;
}

namespace detail {

inline Coupling make_coupling(const CaseSpec& c) {
  if (c.classes)
    return Coupling::independent(std::make_shared<StandardNormal>(2),
                                 std::make_shared<Checkerboard>(true));
  Vec m = Vec::LinSpaced(c.dim, 0.5, 1.5);
  Vec sg = Vec::LinSpaced(c.dim, 0.8, 1.2);
  return Coupling::independent(
      std::make_shared<StandardNormal>(c.dim),
      std::make_shared<DiagonalGaussian>(std::move(m), std::move(sg)));
}

// Random nonzero parameters: the zero-initialized final layer would make
// every derivative path trivially zero.
template <typename M>
void scramble(M& model, Rng& rng) {
  Vec theta = 0.3 * rng.normal_vec(model.mlp.flatten().size());
  model.mlp.unflatten(theta);
}

// Times clamped into the open interval: vp-diffusion has a gamma-slope
// singularity at t = 1 that central differences cannot straddle.
inline void clamp_times(DrawBatch& batch, const Schedule& sched) {
  batch.s = batch.s.array().max(0.05).min(0.95).matrix();
  batch.t = batch.t.array().max(0.05).min(0.95).matrix();
  eval_at(batch, sched, batch.t, batch.I, batch.Idot);
}

inline double deriv_paths_vs_fd(const FlowMapModel& model,
                                const DrawBatch& batch, Rng& rng) {
  NeuralFlowMap map(&model, model.num_classes ? 0 : -1);
  const double h = 1e-5;
  double worst = 0.0;
  auto update = [&](const Mat& got, const Mat& fd) {
    for (Eigen::Index i = 0; i < got.rows(); ++i)
      for (Eigen::Index j = 0; j < got.cols(); ++j)
        worst = std::max(worst, rel_error(got(i, j), fd(i, j)));
  };
  const Vec& s = batch.s;
  const Vec& t = batch.t;
  const Mat& x = batch.I;
  Vec hs = Vec::Constant(s.size(), h);

  update(map.dt(s, t, x),
         (map.value(s, t + hs, x) - map.value(s, t - hs, x)) / (2 * h));
  update(map.ds(s, t, x),
         (map.value(s + hs, t, x) - map.value(s - hs, t, x)) / (2 * h));
  Mat dir = rng.normal_mat(x.rows(), x.cols());
  update(map.jvp(s, t, x, dir),
         (map.value(s, t, x + h * dir) - map.value(s, t, x - h * dir)) /
             (2 * h));
  return worst;
}

}  // namespace detail

inline CaseResult run_case(const CaseSpec& c) {
  Rng rng(c.seed);
  Schedule sched = Schedule::make(c.sched);
  Coupling coupling = detail::make_coupling(c);
  ad::EmbedSpec emb{c.freqs};

  FlowMapModel student =
      FlowMapModel::init(c.dim, c.hidden, c.act, emb, c.classes, rng);
  VelocityModel vel =
      VelocityModel::init(c.dim, c.hidden, c.act, emb, c.classes, rng);
  VelocityModel teacher_b =
      VelocityModel::init(c.dim, c.hidden, c.act, emb, c.classes, rng);
  FlowMapModel teacher_map =
      FlowMapModel::init(c.dim, c.hidden, c.act, emb, c.classes, rng);
  detail::scramble(student, rng);
  detail::scramble(vel, rng);
  detail::scramble(teacher_b, rng);
  detail::scramble(teacher_map, rng);

  DrawBatch batch =
      draw_interpolant_batch(sched, coupling, TimeWeight{}, c.batch, rng);
  detail::clamp_times(batch, sched);

  LossOptions opt;
  opt.pfmm_K = c.pfmm_K;
  opt.fmm_lambda = c.fmm_lambda;

  CaseResult out;
  out.max_deriv_err = detail::deriv_paths_vs_fd(student, batch, rng);

  // The trained model whose parameters the check perturbs.
  MlpParams& params =
      c.loss == LossKind::velocity ? vel.mlp : student.mlp;

  auto loss_value = [&]() {
    ad::Tape tape;
    ad::Node* root = nullptr;
    switch (c.loss) {
      case LossKind::velocity:
        root = loss_velocity_graph(tape, vel, batch);
        break;
      case LossKind::lmd:
        root = loss_lmd_graph(tape, student, teacher_b, batch, sched, opt);
        break;
      case LossKind::emd:
        root = loss_emd_graph(tape, student, teacher_b, batch, sched, opt);
        break;
      case LossKind::fmm:
        root = loss_fmm_graph(tape, student, batch, opt);
        break;
      case LossKind::pfmm:
        root = loss_pfmm_graph(tape, student, teacher_map, batch, sched, opt);
        break;
      case LossKind::ee:
        root = loss_ee_graph(tape, student, batch, sched, opt);
        break;
      case LossKind::denoiser:
        root = loss_denoiser_graph(tape, student, batch, sched, opt);
        break;
    }
    return tape.scalar(root);
  };

  // ee only: loss with the barred branch pinned to the base parameters.
  Mat Is, Isdot;
  eval_at(batch, sched, batch.s, Is, Isdot);
  const IVec* labels = c.classes ? &batch.labels : nullptr;
  Mat jvp_base;
  if (c.loss == LossKind::ee) {
    DualEval d = flow_map_dual(student, batch.s, batch.t, Is, SeedVar::x,
                               &Isdot, labels);
    jvp_base = d.tangent;
  }
  auto ee_frozen_value = [&]() {
    DualEval d = flow_map_dual(student, batch.s, batch.t, Is, SeedVar::s,
                               nullptr, labels);
    return (d.tangent + jvp_base).rowwise().squaredNorm().mean();
  };

  // Analytic gradient from one taped pass.
  params.zero_grad();
  if (c.loss == LossKind::lmd) teacher_b.mlp.zero_grad();
  {
    ad::Tape tape;
    ad::Node* root = nullptr;
    switch (c.loss) {
      case LossKind::velocity:
        root = loss_velocity_graph(tape, vel, batch);
        break;
      case LossKind::lmd:
        root = loss_lmd_graph(tape, student, teacher_b, batch, sched, opt);
        break;
      case LossKind::emd:
        root = loss_emd_graph(tape, student, teacher_b, batch, sched, opt);
        break;
      case LossKind::fmm:
        root = loss_fmm_graph(tape, student, batch, opt);
        break;
      case LossKind::pfmm:
        root = loss_pfmm_graph(tape, student, teacher_map, batch, sched, opt);
        break;
      case LossKind::ee:
        root = loss_ee_graph(tape, student, batch, sched, opt);
        break;
      case LossKind::denoiser:
        root = loss_denoiser_graph(tape, student, batch, sched, opt);
        break;
    }
    tape.backward(root);
  }
  Vec grad = params.flatten_grad();
  Vec theta = params.flatten();

  const double h = 1e-4;
  for (int k = 0; k < 2; ++k) {
    Vec dir = rng.normal_vec(theta.size());
    dir /= dir.norm();
    double analytic = grad.dot(dir);
    params.unflatten(theta + h * dir);
    double up = c.loss == LossKind::ee ? ee_frozen_value() : loss_value();
    params.unflatten(theta - h * dir);
    double dn = c.loss == LossKind::ee ? ee_frozen_value() : loss_value();
    params.unflatten(theta);
    out.max_grad_err =
        std::max(out.max_grad_err, rel_error(analytic, (up - dn) / (2 * h)));
  }
  return out;
}

}  // namespace gradcheck

#include <cmath>

#include "doctest.h"
#include "flowmap/activation.hpp"
#include "flowmap/model.hpp"
#include "flowmap/tape.hpp"
#include "grad_check.hpp"

using namespace flowmap;

TEST_CASE("activation derivatives match finite differences") {
  Mat x(1, 9);
  x << -3.0, -1.5, -0.5, -0.1, 0.0, 0.1, 0.5, 1.5, 3.0;
  const double h = 1e-5;
  for (auto a : {Activation::gelu, Activation::silu, Activation::tanh_}) {
    Mat y, d1, d2, yp, ym, d1p, d1m;
    act_value(a, x, y);
    act_d1(a, x, d1);
    act_d2(a, x, d2);
    Mat xp = x.array() + h, xm = x.array() - h;
    act_value(a, xp, yp);
    act_value(a, xm, ym);
    act_d1(a, xp, d1p);
    act_d1(a, xm, d1m);
    for (int j = 0; j < x.cols(); ++j) {
      CHECK(rel_error(d1(0, j), (yp(0, j) - ym(0, j)) / (2 * h)) < 1e-8);
      CHECK(rel_error(d2(0, j), (d1p(0, j) - d1m(0, j)) / (2 * h)) < 1e-8);
    }
  }
}

TEST_CASE("stop-grad barrier blocks the pullback on a closed form") {
  // u = a * 1, w = b * 1, loss = (u - stop(w))^2. The exact gradients are
  // dL/da = 2 (a - b), dL/db = 0.
  const double a = 1.7, b = 0.4;
  ad::ParamBlock A, B;
  A.W = Mat::Constant(1, 1, a);
  A.b = Vec::Zero(1);
  B.W = Mat::Constant(1, 1, b);
  B.b = Vec::Zero(1);
  A.zero_grad();
  B.zero_grad();

  ad::Tape tape;
  ad::Node* one = tape.constant(Mat::Ones(1, 1));
  ad::Node* u = tape.linear(one, &A, 0);
  ad::Node* w = tape.linear(one, &B, 1);
  ad::Node* loss = tape.mean_sq_norm(tape.sub(u, tape.stop_grad(w)));
  CHECK(tape.scalar(loss) == doctest::Approx((a - b) * (a - b)));
  tape.backward(loss);
  CHECK(A.gW(0, 0) == doctest::Approx(2 * (a - b)));
  CHECK(B.gW(0, 0) == 0.0);
  CHECK(B.gb(0) == 0.0);
}

TEST_CASE("ansatz is the exact identity at equal times") {
  Rng rng(21);
  FlowMapModel m = FlowMapModel::init(2, {16, 16}, Activation::gelu,
                                      ad::EmbedSpec{4}, 0, rng);
  m.mlp.unflatten(rng.normal_vec(m.mlp.flatten().size()));
  Mat x = rng.normal_mat(32, 2);
  Vec s = rng.uniform_vec(32);
  Mat X = flow_map_value(m, s, s, x);
  CHECK((X - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dual evaluation matches the taped tangent channel") {
  Rng rng(22);
  FlowMapModel m = FlowMapModel::init(2, {12}, Activation::silu,
                                      ad::EmbedSpec{3}, 0, rng);
  m.mlp.unflatten(0.4 * rng.normal_vec(m.mlp.flatten().size()));
  Mat x = rng.normal_mat(8, 2);
  Vec s = rng.uniform_vec(8, 0.1, 0.4);
  Vec t = rng.uniform_vec(8, 0.5, 0.9);

  DualEval d = flow_map_dual(m, s, t, x, SeedVar::t);
  ad::Tape tape;
  ad::Node* X = flow_map_taped(tape, m, s, t, tape.constant(x), nullptr,
                               0.0, 1.0);
  CHECK((d.value - X->P).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((d.tangent - X->T).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("velocity model gradient matches finite differences") {
  gradcheck::CaseSpec c = gradcheck::random_case(0);  // index 0 = velocity
  REQUIRE(c.loss == LossKind::velocity);
  gradcheck::CaseResult r = gradcheck::run_case(c);
  CHECK(r.max_grad_err < 1e-4);
}

TEST_CASE("randomized derivative and gradient checks across all losses") {
  // A 28-case slice of the family the acceptance gate runs 100 of: four
  // cases per objective.
  double worst_deriv = 0.0, worst_grad = 0.0;
  for (int i = 0; i < 28; ++i) {
    gradcheck::CaseResult r = gradcheck::run_case(gradcheck::random_case(i));
    worst_deriv = std::max(worst_deriv, r.max_deriv_err);
    worst_grad = std::max(worst_grad, r.max_grad_err);
  }
  CHECK(worst_deriv < 1e-5);
  CHECK(worst_grad < 1e-4);
}

TEST_CASE("gradients are bitwise deterministic") {
  auto grad_once = [](std::uint64_t seed) {
    Rng rng(seed);
    Schedule sched = Schedule::make(ScheduleKind::linear);
    Coupling coupling = Coupling::independent(
        std::make_shared<StandardNormal>(2),
        std::make_shared<DiagonalGaussian>(Vec::Ones(2), Vec::Ones(2)));
    FlowMapModel m = FlowMapModel::init(2, {24, 24}, Activation::gelu,
                                        ad::EmbedSpec{4}, 0, rng);
    m.mlp.unflatten(0.3 * rng.normal_vec(m.mlp.flatten().size()));
    DrawBatch batch =
        draw_interpolant_batch(sched, coupling, TimeWeight{}, 16, rng);
    m.mlp.zero_grad();
    ad::Tape tape;
    tape.backward(loss_fmm_graph(tape, m, batch, LossOptions{}));
    return m.mlp.flatten_grad();
  };
  Vec g1 = grad_once(99), g2 = grad_once(99);
  REQUIRE(g1.size() == g2.size());
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fd time fallback approximates the exact tangent") {
  // The debug fallback replaces the exact t-derivative with a central
  // difference; on a smooth net the two losses agree to FD accuracy.
  Rng rng(31);
  Schedule sched = Schedule::make(ScheduleKind::linear);
  Coupling coupling = Coupling::independent(
      std::make_shared<StandardNormal>(2),
      std::make_shared<DiagonalGaussian>(Vec::Ones(2), Vec::Ones(2)));
  FlowMapModel m = FlowMapModel::init(2, {16}, Activation::tanh_,
                                      ad::EmbedSpec{3}, 0, rng);
  m.mlp.unflatten(0.3 * rng.normal_vec(m.mlp.flatten().size()));
  DrawBatch batch =
      draw_interpolant_batch(sched, coupling, TimeWeight{}, 32, rng);
  batch.s = batch.s.array().max(0.05).min(0.95).matrix();
  batch.t = batch.t.array().max(0.05).min(0.95).matrix();
  eval_at(batch, sched, batch.t, batch.I, batch.Idot);

  LossOptions exact, fallback;
  fallback.fd_time_fallback = true;
  fallback.fd_h = 1e-5;
  ad::Tape t1, t2;
  double a = t1.scalar(loss_fmm_graph(t1, m, batch, exact));
  double b = t2.scalar(loss_fmm_graph(t2, m, batch, fallback));
  CHECK(rel_error(a, b) < 1e-6);
}

TEST_CASE("unreachable branches are skipped without touching gradients") {
  // A node never connected to the loss must not contribute adjoints.
  Rng rng(33);
  ad::ParamBlock A;
  A.W = rng.normal_mat(3, 3);
  A.b = rng.normal_vec(3);
  A.zero_grad();
  ad::Tape tape;
  ad::Node* x = tape.constant(rng.normal_mat(4, 3));
  ad::Node* orphan = tape.linear(x, &A, 0);
  (void)orphan;
  ad::Node* loss = tape.mean_sq_norm(x);
  tape.backward(loss);
  CHECK(A.gW.cwiseAbs().maxCoeff() == 0.0);
}

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "flowmap/integrate.hpp"
#include "flowmap/oracle.hpp"
#include "flowmap/runner.hpp"
#include "flowmap/test_hooks.hpp"

using namespace flowmap;

namespace {

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

// Relative entrywise gap between a derivative operator and central
// differences of the plain evaluation.
template <typename F, typename G>
double fd_gap(F&& value, G&& deriv, double u, double h) {
  double got = deriv(u);
  double fd = (value(u + h) - value(u - h)) / (2 * h);
  return rel_error(got, fd);
}

}  // namespace

TEST_CASE("gaussian task validation") {
  GaussianTask t = GaussianTask::defaults();
  t.validate();
  t.sigma(0) = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = GaussianTask::defaults();
  t.sigma.resize(3);
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("path moments and their derivatives") {
  GaussianTask task = GaussianTask::defaults();
  CHECK(task.sigma_at(0.0)(0) == doctest::Approx(1.0));
  CHECK(task.sigma_at(1.0)(0) == doctest::Approx(task.sigma(0)));
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (int j = 0; j < 2; ++j) {
      double gap = fd_gap([&](double u) { return task.sigma_at(u)(j); },
                          [&](double u) { return task.dsigma_at(u)(j); }, t,
                          1e-6);
      CHECK(gap < 1e-8);
    }
  }
}

TEST_CASE("map identities: equal times, semigroup, inverse") {
  GaussianTask task = GaussianTask::defaults();
  GaussianFlowMapOracle map(task);
  Rng rng(41);
  Mat x = rng.normal_mat(64, 2);
  Vec s = rng.uniform_vec(64), t = rng.uniform_vec(64), u = rng.uniform_vec(64);

  CHECK(max_abs(map.value(s, s, x) - x) < 1e-14);

  Mat via = map.value(t, u, map.value(s, t, x));
  CHECK(max_abs(via - map.value(s, u, x)) < 1e-12);

  Mat back = map.value(t, s, map.value(s, t, x));
  CHECK(max_abs(back - x) < 1e-12);
}

TEST_CASE("the drift is the time derivative of the map") {
  GaussianTask task = GaussianTask::defaults();
  GaussianFlowMapOracle map(task);
  Rng rng(42);
  Mat x = rng.normal_mat(16, 2);
  for (double t : {0.2, 0.5, 0.8}) {
    Vec tv = Vec::Constant(16, t);
    Mat drift = oracle_velocity_gaussian(task, tv, x);
    CHECK(max_abs(map.dt(tv, tv, x) - drift) < 1e-12);
  }
}

TEST_CASE("oracle derivative operators match finite differences") {
  GaussianTask task = GaussianTask::defaults();
  GaussianFlowMapOracle map(task);
  GaussianDenoiserOracle den(task);
  Rng rng(43);
  Mat x = rng.normal_mat(8, 2);
  Vec s = rng.uniform_vec(8, 0.05, 0.45), t = rng.uniform_vec(8, 0.55, 0.95);
  const double h = 1e-6;
  Vec hs = Vec::Constant(8, h);
  Mat dir = rng.normal_mat(8, 2);

  for (const TwoTimeMap* m : {static_cast<const TwoTimeMap*>(&map),
                              static_cast<const TwoTimeMap*>(&den)}) {
    Mat fd_t = (m->value(s, t + hs, x) - m->value(s, t - hs, x)) / (2 * h);
    CHECK(max_abs(m->dt(s, t, x) - fd_t) < 1e-7);
    Mat fd_s = (m->value(s + hs, t, x) - m->value(s - hs, t, x)) / (2 * h);
    CHECK(max_abs(m->ds(s, t, x) - fd_s) < 1e-7);
    Mat fd_x = (m->value(s, t, x + h * dir) - m->value(s, t, x - h * dir)) /
               (2 * h);
    CHECK(max_abs(m->jvp(s, t, x, dir) - fd_x) < 1e-7);
  }
}

TEST_CASE("denoiser collapses to the mean at (0,1)") {
  GaussianTask task = GaussianTask::defaults();
  Rng rng(44);
  Mat x = rng.normal_mat(32, 2);
  Mat y = oracle_denoiser_gaussian(task, Vec::Zero(32), Vec::Ones(32), x);
  for (int i = 0; i < 32; ++i)
    CHECK((y.row(i).transpose() - task.m).norm() < 1e-12);
}

TEST_CASE("numeric integration reproduces closed-form flows") {
  // Linear drift b = x has flow x e^{t-s}.
  FnVelocity b(1, [](const Vec&, const Mat& x) { return x; });
  Mat x0(3, 1);
  x0 << -1.0, 0.5, 2.0;
  Mat got = teacher_flowmap_numeric(b, 0.0, 1.0, x0, 1000);
  CHECK(max_abs(got - x0 * std::exp(1.0)) < 1e-10);

  // Backward in time works too.
  Mat back = teacher_flowmap_numeric(b, 1.0, 0.0, got, 1000);
  CHECK(max_abs(back - x0) < 1e-10);

  // The Gaussian oracle map agrees with integrating its own drift.
  GaussianTask task = GaussianTask::defaults();
  GaussianVelocityOracle drift(task);
  GaussianFlowMapOracle map(task);
  Rng rng(45);
  Mat x = rng.normal_mat(8, 2);
  Mat num = teacher_flowmap_numeric(drift, 0.2, 0.9, x, 4000);
  Mat exact = map.value(Vec::Constant(8, 0.2), Vec::Constant(8, 0.9), x);
  CHECK(max_abs(num - exact) < 1e-9);
}

TEST_CASE("lipschitz integral matches quadrature of the closed form") {
  GaussianTask task = GaussianTask::defaults();
  // crude Riemann cross-check of the Simpson result
  const int n = 20000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += std::abs(task.lipschitz((i + 0.5) / n)) / n;
  CHECK(task.lipschitz_integral() == doctest::Approx(acc).epsilon(1e-4));

  // isotropic unit-variance task: dsigma/sigma integrates to log 2 pieces
  GaussianTask iso = GaussianTask::isotropic((Vec(2) << 1.0, 0.0).finished());
  CHECK(iso.lipschitz_integral() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("perturbed maps are smooth deformations of the exact map") {
  GaussianTask task = GaussianTask::defaults();
  GaussianFlowMapOracle exact(task);
  Rng rng(46);
  PerturbedGaussianMap pert(task, 0.2, rng);

  Mat x = rng.normal_mat(16, 2);
  Vec s = rng.uniform_vec(16), t = rng.uniform_vec(16);
  // identity at s = t for any draw
  CHECK(max_abs(pert.value(s, s, x) - x) < 1e-14);

  // eps = 0 is the exact map
  Rng rng2(47);
  PerturbedGaussianMap zero(task, 0.0, rng2);
  CHECK(max_abs(zero.value(s, t, x) - exact.value(s, t, x)) < 1e-14);

  // derivative operators stay consistent with the perturbed values
  const double h = 1e-6;
  Vec hs = Vec::Constant(16, h);
  Mat fd_t = (pert.value(s, t + hs, x) - pert.value(s, t - hs, x)) / (2 * h);
  CHECK(max_abs(pert.dt(s, t, x) - fd_t) < 1e-7);
  Mat fd_s = (pert.value(s + hs, t, x) - pert.value(s - hs, t, x)) / (2 * h);
  CHECK(max_abs(pert.ds(s, t, x) - fd_s) < 1e-7);
  Mat dir = rng.normal_mat(16, 2);
  Mat fd_x = (pert.value(s, t, x + h * dir) - pert.value(s, t, x - h * dir)) /
             (2 * h);
  CHECK(max_abs(pert.jvp(s, t, x, dir) - fd_x) < 1e-7);
}

TEST_CASE("wasserstein bound audit on exact, identity, and perturbed maps") {
  GaussianTask task = GaussianTask::defaults();
  BoundCheckOptions opt;
  opt.loss_samples = 20000;
  opt.w2_repeats = 4;
  Rng rng(48);

  GaussianFlowMapOracle exact(task);
  BoundCheck at_truth = wasserstein_bound_check(task, exact, BoundKind::lmd,
                                                rng, opt);
  CHECK(at_truth.lhs == 0.0);
  CHECK(at_truth.holds);

  // identity candidate on the isotropic task: lhs is |m|^2 = 1 exactly and
  // the lmd constant is exp(1 + 2 log 2) = 4e
  GaussianTask iso = GaussianTask::isotropic((Vec(2) << 1.0, 0.0).finished());
  IdentityMap id(2);
  BoundCheck at_id = wasserstein_bound_check(iso, id, BoundKind::lmd, rng, opt);
  CHECK(at_id.constant == doctest::Approx(4.0 * std::exp(1.0)).epsilon(1e-6));
  CHECK(std::abs(at_id.lhs - 1.0) < 0.1);
  CHECK(at_id.holds);

  BoundCheck emd_id = wasserstein_bound_check(iso, id, BoundKind::emd, rng,
                                              opt);
  CHECK(emd_id.constant == doctest::Approx(std::exp(1.0)));
  CHECK(emd_id.holds);

  PerturbedGaussianMap pert(task, 0.15, rng);
  CHECK(wasserstein_bound_check(task, pert, BoundKind::lmd, rng, opt).holds);
  CHECK(wasserstein_bound_check(task, pert, BoundKind::emd, rng, opt).holds);
}

TEST_CASE("quick property battery passes and detects fault injection") {
  std::ostringstream sink;
  Rng rng(49);
  auto results = run_oracle_suite(rng, &sink, true);
  CHECK(results.size() >= 15);
  for (const auto& r : results) CHECK_MESSAGE(r.ok, r.name);

  // A flipped jvp sign must trip at least the emd zero-at-truth check.
  test_hooks::emd_flip_jvp_sign = true;
  Rng rng2(49);
  auto broken = run_oracle_suite(rng2, nullptr, true);
  test_hooks::emd_flip_jvp_sign = false;
  bool tripped = false;
  for (const auto& r : broken)
    if (!r.ok && r.name == "zero-at-truth-emd") tripped = true;
  CHECK(tripped);
}

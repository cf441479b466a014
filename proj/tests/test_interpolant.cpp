#include <cmath>
#include <memory>

#include "doctest.h"
#include "flowmap/interpolant.hpp"

using namespace flowmap;

namespace {

Coupling gaussian_coupling(int d) {
  return Coupling::independent(
      std::make_shared<StandardNormal>(d),
      std::make_shared<DiagonalGaussian>(Vec::Ones(d), Vec::Ones(d) * 2.0));
}

}  // namespace

TEST_CASE("time weight parsing round-trips") {
  CHECK(TimeWeight::parse("uniform-square").kind ==
        TimeWeightKind::uniform_square);
  CHECK(TimeWeight::parse("strip(4)").kind == TimeWeightKind::strip);
  CHECK(TimeWeight::parse("strip(4)").K == 4);
  CHECK(TimeWeight::parse("forward-only").kind == TimeWeightKind::forward_only);
  CHECK(TimeWeight::parse("forward-strip(8)").K == 8);
  for (const char* name :
       {"uniform-square", "strip(4)", "forward-only", "forward-strip(3)"}) {
    TimeWeight w = TimeWeight::parse(name);
    CHECK(TimeWeight::parse(w.str()).kind == w.kind);
    CHECK(TimeWeight::parse(w.str()).K == w.K);
  }
  CHECK(TimeWeight::parse("strip(1)").K == 1);  // band is the whole square
  CHECK_THROWS_AS(TimeWeight::parse("strip(0)"), ConfigError);
  CHECK_THROWS_AS(TimeWeight::parse("strip(x)"), ConfigError);
  CHECK_THROWS_AS(TimeWeight::parse("banded"), ConfigError);
}

TEST_CASE("time weight supports match their definitions") {
  Rng rng(3);
  double s, t;

  TimeWeight strip = TimeWeight::parse("strip(4)");
  CHECK(strip.symmetric());
  for (int i = 0; i < 5000; ++i) {
    strip.draw(rng, s, t);
    CHECK(std::abs(t - s) <= 0.25);
    CHECK(s >= 0.0);
    CHECK(t <= 1.0);
  }

  TimeWeight fwd = TimeWeight::parse("forward-only");
  CHECK_FALSE(fwd.symmetric());
  for (int i = 0; i < 5000; ++i) {
    fwd.draw(rng, s, t);
    CHECK(s <= t);
  }

  TimeWeight fstrip = TimeWeight::parse("forward-strip(5)");
  for (int i = 0; i < 5000; ++i) {
    fstrip.draw(rng, s, t);
    CHECK(s <= t);
    CHECK(t - s <= 0.2);
  }
}

TEST_CASE("symmetric weights are invariant under pair swap") {
  // Two-sample check on the first marginal: s and t of a symmetric law
  // have the same distribution, so their sample means and variances agree
  // within Monte-Carlo error.
  Rng rng(11);
  TimeWeight w = TimeWeight::parse("strip(4)");
  const int n = 40000;
  double ms = 0, mt = 0, qs = 0, qt = 0;
  for (int i = 0; i < n; ++i) {
    double s, t;
    w.draw(rng, s, t);
    ms += s; mt += t;
    qs += s * s; qt += t * t;
  }
  ms /= n; mt /= n; qs /= n; qt /= n;
  // se of the mean is about 0.3 / sqrt(n) ~ 1.5e-3
  CHECK(std::abs(ms - mt) < 6e-3);
  CHECK(std::abs(qs - qt) < 6e-3);
}

TEST_CASE("interpolant draws satisfy the path definition") {
  Rng rng(5);
  Schedule sched = Schedule::make(ScheduleKind::trig);
  Coupling coupling = gaussian_coupling(2);
  TimeWeight w;

  DrawBatch batch = draw_interpolant_batch(sched, coupling, w, 64, rng);
  REQUIRE(batch.rows() == 64);
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    ScheduleCoeffs c = sched.at(batch.t(i));
    Vec expect = c.alpha * batch.x0.row(i).transpose() +
                 c.beta * batch.x1.row(i).transpose() +
                 c.gamma * batch.z.row(i).transpose();
    Vec expect_dot = c.dalpha * batch.x0.row(i).transpose() +
                     c.dbeta * batch.x1.row(i).transpose() +
                     c.dgamma * batch.z.row(i).transpose();
    CHECK((batch.I.row(i).transpose() - expect).norm() < 1e-14);
    CHECK((batch.Idot.row(i).transpose() - expect_dot).norm() < 1e-14);
  }
}

TEST_CASE("eval_at reproduces the stored path at the drawn time") {
  Rng rng(6);
  Schedule sched = Schedule::make(ScheduleKind::linear);
  Coupling coupling = gaussian_coupling(3);
  TimeWeight w = TimeWeight::parse("strip(4)");

  DrawBatch batch = draw_interpolant_batch(sched, coupling, w, 32, rng);
  Mat I, Idot;
  eval_at(batch, sched, batch.t, I, Idot);
  CHECK((I - batch.I).norm() < 1e-14);
  CHECK((Idot - batch.Idot).norm() < 1e-14);

  // At the s times the path endpoints interpolate: t = 0 gives x0 exactly
  // under the linear schedule.
  eval_at(batch, sched, Vec::Zero(batch.rows()), I, Idot);
  CHECK((I - batch.x0).norm() < 1e-14);
  eval_at(batch, sched, Vec::Ones(batch.rows()), I, Idot);
  CHECK((I - batch.x1).norm() < 1e-14);
}

TEST_CASE("interpolant marginal moments match the closed form") {
  // Linear schedule between N(0, I) and N(m, diag(sigma^2)), independent
  // coupling: I_t ~ N(t m, (1-t)^2 + t^2 sigma^2) componentwise.
  Rng rng(7);
  Schedule sched = Schedule::make(ScheduleKind::linear);
  Vec m(2), sg(2);
  m << 1.5, -0.5;
  sg << 0.7, 1.3;
  Coupling coupling =
      Coupling::independent(std::make_shared<StandardNormal>(2),
                            std::make_shared<DiagonalGaussian>(m, sg));

  const int n = 200000;
  Mat x0(n, 2), x1(n, 2);
  coupling.draw(rng, n, x0, x1);
  for (double t : {0.25, 0.5, 0.75}) {
    ScheduleCoeffs c = sched.at(t);
    Mat I = c.alpha * x0 + c.beta * x1;
    Vec mean = I.colwise().mean();
    Vec var = (I.rowwise() - mean.transpose()).array().square().colwise().sum()
                  .matrix() / (n - 1);
    for (int j = 0; j < 2; ++j) {
      double want_mean = t * m(j);
      double want_var = (1 - t) * (1 - t) + t * t * sg(j) * sg(j);
      // 5 standard errors of each estimator
      CHECK(std::abs(mean(j) - want_mean) < 5 * std::sqrt(want_var / n));
      CHECK(std::abs(var(j) - want_var) <
            5 * want_var * std::sqrt(2.0 / (n - 1)));
    }
  }
}

TEST_CASE("vp-diffusion base enters through the noise channel") {
  // alpha = 0, gamma_0 = 1: the t = 0 marginal is the noise z, standard
  // normal regardless of the x0 sampler.
  Rng rng(8);
  Schedule sched = Schedule::make(ScheduleKind::vp_diffusion);
  Coupling coupling = gaussian_coupling(2);
  TimeWeight w;
  DrawBatch batch = draw_interpolant_batch(sched, coupling, w, 16, rng);
  Mat I, Idot;
  eval_at(batch, sched, Vec::Zero(16), I, Idot);
  CHECK((I - batch.z).norm() < 1e-14);
}

TEST_CASE("labeled couplings propagate labels") {
  Rng rng(9);
  auto base = std::make_shared<StandardNormal>(2);
  auto target = std::make_shared<Checkerboard>(true);
  Coupling coupling = Coupling::independent(base, target);
  CHECK(coupling.num_classes() == 2);

  DrawBatch batch = draw_interpolant_batch(
      Schedule::make(ScheduleKind::linear), coupling, TimeWeight{}, 256, rng);
  REQUIRE(batch.labels.size() == 256);
  for (Eigen::Index i = 0; i < 256; ++i) {
    CHECK(batch.labels(i) >= 0);
    CHECK(batch.labels(i) <= 1);
    CHECK(Checkerboard::contains(batch.x1(i, 0), batch.x1(i, 1),
                                 batch.labels(i)));
  }
}

TEST_CASE("paired couplings replay dataset rows") {
  Mat x0(3, 2), x1(3, 2);
  x0 << 0, 0, 1, 1, 2, 2;
  x1 << 5, 5, 6, 6, 7, 7;
  Coupling coupling = Coupling::paired(x0, x1);
  Rng rng(10);
  Mat a(8, 2), b(8, 2);
  coupling.draw(rng, 8, a, b);
  for (int i = 0; i < 8; ++i) {
    // each row of a pairs with the matching row of b
    CHECK(b(i, 0) == a(i, 0) + 5.0);
    CHECK(a(i, 0) == a(i, 1));
  }
}

#include <cmath>

#include "doctest.h"
#include "flowmap/schedule.hpp"

using namespace flowmap;

namespace {

// Central-difference check of the stored derivatives at interior points.
void check_derivatives(const Schedule& s, double lo, double hi) {
  const double h = 1e-6;
  for (int i = 1; i < 40; ++i) {
    double t = lo + (hi - lo) * i / 40.0;
    ScheduleCoeffs c = s.at(t);
    ScheduleCoeffs p = s.at(t + h), m = s.at(t - h);
    CHECK(rel_error(c.dalpha, (p.alpha - m.alpha) / (2 * h)) < 1e-7);
    CHECK(rel_error(c.dbeta, (p.beta - m.beta) / (2 * h)) < 1e-7);
    CHECK(rel_error(c.dgamma, (p.gamma - m.gamma) / (2 * h)) < 1e-7);
  }
}

}  // namespace

TEST_CASE("linear schedule endpoints and derivatives") {
  Schedule s = Schedule::make(ScheduleKind::linear);
  ScheduleCoeffs c0 = s.at(0.0), c1 = s.at(1.0);
  CHECK(c0.alpha == 1.0);
  CHECK(c0.beta == 0.0);
  CHECK(c0.gamma == 0.0);
  CHECK(c1.alpha == 0.0);
  CHECK(c1.beta == 1.0);
  CHECK(c1.gamma == 0.0);
  CHECK(s.pins_endpoints());
  CHECK_FALSE(s.gaussian_base());
  check_derivatives(s, 0.0, 1.0);
}

TEST_CASE("trig schedule endpoints and derivatives") {
  Schedule s = Schedule::make(ScheduleKind::trig);
  ScheduleCoeffs c0 = s.at(0.0), c1 = s.at(1.0);
  CHECK(c0.alpha == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c0.beta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(c1.alpha) < 1e-15);
  CHECK(c1.beta == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c0.dbeta == doctest::Approx(M_PI / 2));
  CHECK(s.pins_endpoints());
  // alpha^2 + beta^2 = 1 along the whole path
  for (int i = 0; i <= 20; ++i) {
    ScheduleCoeffs c = s.at(i / 20.0);
    CHECK(c.alpha * c.alpha + c.beta * c.beta == doctest::Approx(1.0));
  }
  check_derivatives(s, 0.0, 1.0);
}

TEST_CASE("vp-diffusion schedule carries the base in the noise channel") {
  Schedule s = Schedule::make(ScheduleKind::vp_diffusion);
  ScheduleCoeffs c0 = s.at(0.0), c1 = s.at(1.0);
  CHECK(c0.alpha == 0.0);
  CHECK(c0.gamma == 1.0);
  CHECK(c1.beta == 1.0);
  CHECK(c1.gamma == 0.0);
  CHECK(s.gaussian_base());
  CHECK(s.pins_endpoints());
  // dgamma = -t / sqrt(1 - t^2) blows up at t = 1; derivative checks stop
  // short of the endpoint.
  check_derivatives(s, 0.0, 0.99);
  CHECK(s.at(0.999).dgamma < -20.0);
}

TEST_CASE("ve-diffusion schedule does not pin the endpoints") {
  Schedule s = Schedule::make(ScheduleKind::ve_diffusion, 80.0);
  CHECK(s.at(0.0).gamma == 80.0);
  CHECK(s.at(1.0).gamma == 79.0);
  CHECK_FALSE(s.pins_endpoints());
  // The noise floor never reaches exactly one unit, so the base marginal
  // is a scaled Gaussian around the data, not a standard one.
  CHECK_FALSE(s.gaussian_base());
  check_derivatives(s, 0.0, 1.0);
}

TEST_CASE("custom schedules are derivative-checked at load time") {
  // Consistent coefficients load fine.
  Schedule ok = Schedule::custom("poly", [](double t) {
    return ScheduleCoeffs{1 - t * t, t * t, 0.0, -2 * t, 2 * t, 0.0};
  });
  CHECK(ok.kind() == ScheduleKind::custom);
  CHECK(ok.at(0.5).alpha == doctest::Approx(0.75));

  // A lying derivative is rejected up front.
  CHECK_THROWS_AS(Schedule::custom("bad",
                                   [](double t) {
                                     return ScheduleCoeffs{1 - t, t, 0.0,
                                                           -1.0,  5.0, 0.0};
                                   }),
                  ConfigError);
}

TEST_CASE("schedule names round-trip and reject unknowns") {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::trig,
                    ScheduleKind::vp_diffusion, ScheduleKind::ve_diffusion}) {
    CHECK(schedule_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(schedule_kind_from_string("cosine"), ConfigError);
}

TEST_CASE("out-of-domain times are rejected") {
  Schedule s = Schedule::make(ScheduleKind::linear);
  CHECK_THROWS_AS(s.at(-0.01), DomainError);
  CHECK_THROWS_AS(s.at(1.01), DomainError);
}

TEST_CASE("batched evaluation matches scalar evaluation") {
  Schedule s = Schedule::make(ScheduleKind::trig);
  Vec t(5);
  t << 0.0, 0.25, 0.5, 0.75, 1.0;
  Vec a, b, g, da, db, dg;
  s.at(t, a, b, g, da, db, dg);
  for (int i = 0; i < 5; ++i) {
    ScheduleCoeffs c = s.at(t(i));
    CHECK(a(i) == c.alpha);
    CHECK(b(i) == c.beta);
    CHECK(g(i) == c.gamma);
    CHECK(da(i) == c.dalpha);
    CHECK(db(i) == c.dbeta);
    CHECK(dg(i) == c.dgamma);
  }
}

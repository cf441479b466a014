#include "flowmap/schedule.hpp"

#include <cmath>
#include <limits>

namespace flowmap {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw DomainError("schedule time " + std::to_string(t) +
                      " outside [0,1]");
}

}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "trig") return ScheduleKind::trig;
  if (name == "vp-diffusion") return ScheduleKind::vp_diffusion;
  if (name == "ve-diffusion") return ScheduleKind::ve_diffusion;
  if (name == "custom") return ScheduleKind::custom;
  throw ConfigError("unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::trig: return "trig";
    case ScheduleKind::vp_diffusion: return "vp-diffusion";
    case ScheduleKind::ve_diffusion: return "ve-diffusion";
    case ScheduleKind::custom: return "custom";
  }
  return "?";
}

Schedule Schedule::make(ScheduleKind kind, double ve_horizon) {
  Schedule s;
  s.kind_ = kind;
  s.name_ = to_string(kind);
  switch (kind) {
    case ScheduleKind::linear:
      s.fn_ = [](double t) {
        return ScheduleCoeffs{1.0 - t, t, 0.0, -1.0, 1.0, 0.0};
      };
      break;
    case ScheduleKind::trig:
      s.fn_ = [](double t) {
        return ScheduleCoeffs{std::cos(kHalfPi * t), std::sin(kHalfPi * t),
                              0.0, -kHalfPi * std::sin(kHalfPi * t),
                              kHalfPi * std::cos(kHalfPi * t), 0.0};
      };
      break;
    case ScheduleKind::vp_diffusion:
      s.gaussian_base_ = true;
      s.fn_ = [](double t) {
        double g = std::sqrt(std::max(0.0, 1.0 - t * t));
        // dgamma = -t / gamma diverges as t -> 1. Time samplers draw from
        // [0,1), so training never lands here; report the true limit and
        // let finiteness checks catch any accidental use.
        double dg = (g > 0.0) ? -t / g
                              : -std::numeric_limits<double>::infinity();
        return ScheduleCoeffs{0.0, t, g, 0.0, 1.0, dg};
      };
      break;
    case ScheduleKind::ve_diffusion:
      if (!(ve_horizon > 1.0))
        throw ConfigError("ve-diffusion horizon must exceed 1");
      s.pins_endpoints_ = false;
      s.gaussian_base_ = false;
      s.fn_ = [ve_horizon](double t) {
        return ScheduleCoeffs{0.0, 1.0, ve_horizon - t, 0.0, 0.0, -1.0};
      };
      break;
    case ScheduleKind::custom:
      throw ConfigError("custom schedules require Schedule::custom");
  }
  return s;
}

Schedule Schedule::custom(std::string name, CoeffFn fn) {
  Schedule s;
  s.kind_ = ScheduleKind::custom;
  s.name_ = std::move(name);
  s.fn_ = std::move(fn);

  // Derivative consistency is enforced at construction: user-supplied
  // derivatives must agree with central differences of the coefficients.
  const double h = 1e-5;
  for (int i = 0; i <= 100; ++i) {
    double t = i / 100.0;
    double lo = std::max(0.0, t - h), hi = std::min(1.0, t + h);
    ScheduleCoeffs a = s.fn_(lo), b = s.fn_(hi), c = s.fn_(t);
    double inv = 1.0 / (hi - lo);
    if (rel_error(c.dalpha, (b.alpha - a.alpha) * inv) > 1e-4 ||
        rel_error(c.dbeta, (b.beta - a.beta) * inv) > 1e-4 ||
        rel_error(c.dgamma, (b.gamma - a.gamma) * inv) > 1e-4)
      throw ConfigError("custom schedule '" + s.name_ +
                        "' fails derivative consistency near t=" +
                        std::to_string(t));
  }

  ScheduleCoeffs c0 = s.fn_(0.0), c1 = s.fn_(1.0);
  s.pins_endpoints_ = std::abs(c0.alpha - 1.0) <= 1e-12 &&
                      std::abs(c0.beta) <= 1e-12 &&
                      std::abs(c1.alpha) <= 1e-12 &&
                      std::abs(c1.beta - 1.0) <= 1e-12 &&
                      std::abs(c1.gamma) <= 1e-12;
  s.gaussian_base_ = std::abs(c0.gamma - 1.0) <= 1e-12 &&
                     std::abs(c0.alpha) <= 1e-12;
  return s;
}

ScheduleCoeffs Schedule::at(double t) const {
  check_time(t);
  return fn_(t);
}

void Schedule::at(const Vec& t, Vec& alpha, Vec& beta, Vec& gamma, Vec& dalpha,
                  Vec& dbeta, Vec& dgamma) const {
  Eigen::Index n = t.size();
  alpha.resize(n); beta.resize(n); gamma.resize(n);
  dalpha.resize(n); dbeta.resize(n); dgamma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ScheduleCoeffs c = at(t(i));
    alpha(i) = c.alpha; beta(i) = c.beta; gamma(i) = c.gamma;
    dalpha(i) = c.dalpha; dbeta(i) = c.dbeta; dgamma(i) = c.dgamma;
  }
}

}  // namespace flowmap

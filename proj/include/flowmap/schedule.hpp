#pragma once

#include <functional>
#include <string>

#include "flowmap/types.hpp"

namespace flowmap {

// Coefficients of the stochastic interpolant I_t = alpha_t x0 + beta_t x1
// + gamma_t z, together with their time derivatives.
struct ScheduleCoeffs {
  double alpha, beta, gamma;
  double dalpha, dbeta, dgamma;
};

enum class ScheduleKind { linear, trig, vp_diffusion, ve_diffusion, custom };

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

// Interpolant schedule on t in [0,1]. Built-in kinds:
//   linear        alpha = 1-t, beta = t, gamma = 0
//   trig          alpha = cos(pi t / 2), beta = sin(pi t / 2), gamma = 0
//   vp-diffusion  alpha = 0, beta = t, gamma = sqrt(1 - t^2); the base
//                 density enters through the noise channel (gamma_0 = 1)
//   ve-diffusion  alpha = 0, beta = 1, gamma = T - t; does not satisfy the
//                 endpoint conditions (gamma_1 = T - 1 != 0), exposed for
//                 completeness only
// Custom schedules supply closed-form coefficient functions; their
// derivatives are cross-checked against finite differences at load time.
class Schedule {
 public:
  using CoeffFn = std::function<ScheduleCoeffs(double)>;

  static Schedule make(ScheduleKind kind, double ve_horizon = 80.0);
  static Schedule custom(std::string name, CoeffFn fn);

  ScheduleCoeffs at(double t) const;

  // Batched evaluation; rows of the outputs align with entries of t.
  void at(const Vec& t, Vec& alpha, Vec& beta, Vec& gamma, Vec& dalpha,
          Vec& dbeta, Vec& dgamma) const;

  ScheduleKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  // True when the base density is carried by the noise channel (I_0 = z).
  bool gaussian_base() const { return gaussian_base_; }

  // True when the schedule satisfies the endpoint conditions alpha_0 =
  // beta_1 = 1, alpha_1 = beta_0 = 0, gamma_1 = 0 (within roundoff).
  bool pins_endpoints() const { return pins_endpoints_; }

 private:
  Schedule() = default;

  ScheduleKind kind_ = ScheduleKind::linear;
  std::string name_;
  CoeffFn fn_;
  bool gaussian_base_ = false;
  bool pins_endpoints_ = true;
};

}  // namespace flowmap

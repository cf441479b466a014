#pragma once

#include "flowmap/maps.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

enum class OdeMethod { heun, rk4 };

OdeMethod ode_method_from_string(const std::string& name);
std::string to_string(OdeMethod m);

// Fixed-step integration of dy/dtau = b_tau(y) from t0 to t1 (either
// direction) on a uniform grid; one state per row of x.
Mat integrate_ode(const VelocityField& b, double t0, double t1, const Mat& x,
                  int nsteps, OdeMethod method);

// High-accuracy numeric flow map used as ground truth in tests, bound
// audits, and teacher-gap metrics. RK4; nsteps=1000 is the oracle tier.
Mat teacher_flowmap_numeric(const VelocityField& b, double s, double t,
                            const Mat& x, int nsteps = 1000);

}  // namespace flowmap

#include "flowmap/integrate.hpp"

#include <algorithm>

namespace flowmap {

OdeMethod ode_method_from_string(const std::string& name) {
  if (name == "heun") return OdeMethod::heun;
  if (name == "rk4") return OdeMethod::rk4;
  throw ConfigError("unknown ode method '" + name + "'");
}

std::string to_string(OdeMethod m) {
  return m == OdeMethod::heun ? "heun" : "rk4";
}

Mat integrate_ode(const VelocityField& b, double t0, double t1, const Mat& x,
                  int nsteps, OdeMethod method) {
  if (nsteps < 1) throw DomainError("integrator needs nsteps >= 1");
  Mat y = x;
  if (t0 == t1) return y;
  double h = (t1 - t0) / nsteps;
  double lo = std::min(t0, t1), hi = std::max(t0, t1);
  // Grid times can drift past the endpoints by an ulp; clamp so velocity
  // fields with a hard [0,1] domain are never asked a time outside it.
  auto grid = [&](double tau) { return std::clamp(tau, lo, hi); };
  Eigen::Index n = x.rows();
  for (int k = 0; k < nsteps; ++k) {
    double tau = grid(t0 + k * h);
    double tau_next = (k + 1 == nsteps) ? t1 : grid(tau + h);
    Vec tv = Vec::Constant(n, tau);
    if (method == OdeMethod::heun) {
      Mat k1 = b.value(tv, y);
      Mat k2 = b.value(Vec::Constant(n, tau_next), y + h * k1);
      y += (h / 2.0) * (k1 + k2);
    } else {
      Vec tm = Vec::Constant(n, grid(tau + h / 2.0));
      Mat k1 = b.value(tv, y);
      Mat k2 = b.value(tm, y + (h / 2.0) * k1);
      Mat k3 = b.value(tm, y + (h / 2.0) * k2);
      Mat k4 = b.value(Vec::Constant(n, tau_next), y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!y.allFinite())
      throw NumericError("non-finite state after integrator step " +
                         std::to_string(k + 1));
  }
  return y;
}

Mat teacher_flowmap_numeric(const VelocityField& b, double s, double t,
                            const Mat& x, int nsteps) {
  return integrate_ode(b, s, t, x, nsteps, OdeMethod::rk4);
}

}  // namespace flowmap

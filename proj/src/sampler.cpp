#include "flowmap/sampler.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace flowmap {

TimeGrid TimeGrid::uniform(double a, double b, int nsteps) {
  if (nsteps < 1) throw DomainError("time grid needs at least one step");
  TimeGrid g;
  g.times.resize(nsteps + 1);
  for (int k = 0; k <= nsteps; ++k)
    g.times[k] = a + (b - a) * (static_cast<double>(k) / nsteps);
  g.times.front() = a;
  g.times.back() = b;
  g.validate();
  return g;
}

TimeGrid TimeGrid::reversed() const {
  TimeGrid g;
  g.times.assign(times.rbegin(), times.rend());
  return g;
}

void TimeGrid::validate() const {
  if (times.size() < 2) throw ConfigError("time grid needs >= 2 points");
  bool inc = times.back() > times.front();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0 && times[k] <= 1.0))
      throw ConfigError("time grid point outside [0,1]");
    if (k > 0 && !(inc ? times[k] > times[k - 1] : times[k] < times[k - 1]))
      throw ConfigError("time grid must be strictly monotone");
  }
}

SampleMethod sample_method_from_string(const std::string& name) {
  if (name == "ode-heun") return SampleMethod::ode_heun;
  if (name == "ode-rk4") return SampleMethod::ode_rk4;
  if (name == "map-onestep") return SampleMethod::map_onestep;
  if (name == "map-multistep") return SampleMethod::map_multistep;
  throw ConfigError("unknown sample method '" + name + "'");
}

std::string to_string(SampleMethod m) {
  switch (m) {
    case SampleMethod::ode_heun: return "ode-heun";
    case SampleMethod::ode_rk4: return "ode-rk4";
    case SampleMethod::map_onestep: return "map-onestep";
    case SampleMethod::map_multistep: return "map-multistep";
  }
  throw ConfigError("bad sample method");
}

void SampleRun::validate() const {
  grid.validate();
  if (count < 1) throw ConfigError("sample run needs count >= 1");
  if (method == SampleMethod::map_onestep &&
      (grid.steps() != 1 || grid.times.front() != 0.0 ||
       grid.times.back() != 1.0))
    throw ConfigError("one-step sampling requires the {0,1} grid");
}

Mat integrate_over_grid(const VelocityField& b, const Mat& x0,
                        const TimeGrid& grid, OdeMethod method) {
  grid.validate();
  Mat y = x0;
  for (int k = 1; k <= grid.steps(); ++k)
    y = integrate_ode(b, grid.times[k - 1], grid.times[k], y, 1, method);
  return y;
}

Mat map_sample(const TwoTimeMap& map, const Mat& x0, const TimeGrid& grid,
               long* evals) {
  grid.validate();
  Mat y = x0;
  Eigen::Index n = x0.rows();
  for (int k = 1; k <= grid.steps(); ++k) {
    Vec sv = Vec::Constant(n, grid.times[k - 1]);
    Vec tv = Vec::Constant(n, grid.times[k]);
    y = map.value(sv, tv, y);
    if (evals) ++*evals;
    if (!y.allFinite())
      throw NumericError("non-finite sample after map step " +
                         std::to_string(k));
  }
  return y;
}

Mat invert_and_restyle(const TwoTimeMap& map_back, const TwoTimeMap& map_fwd,
                       const Mat& x1, const RestyleOptions& opt, long* evals) {
  if (!(opt.s_prime > 0.0 && opt.s_prime < 1.0))
    throw ConfigError("restyle pivot must lie strictly inside (0,1)");
  if (opt.leg_steps < 1) throw ConfigError("restyle legs need >= 1 step");
  TimeGrid leg = TimeGrid::uniform(opt.s_prime, 1.0, opt.leg_steps);
  Mat mid = map_sample(map_back, x1, leg.reversed(), evals);
  return map_sample(map_fwd, mid, leg, evals);
}

void write_points_csv(std::ostream& os, const std::string& run_id,
                      SampleMethod method, int nsteps, const Mat& points,
                      const IVec* labels) {
  if (labels && labels->size() != points.rows())
    throw ConfigError("label column length mismatch");
  os << "run,method,steps,label";
  for (Eigen::Index j = 0; j < points.cols(); ++j) os << ",c" << j;
  os << '\n';
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    os << run_id << ',' << to_string(method) << ',' << nsteps << ','
       << (labels ? (*labels)(r) : -1);
    for (Eigen::Index j = 0; j < points.cols(); ++j)
      os << ',' << points(r, j);
    os << '\n';
  }
}

}  // namespace flowmap

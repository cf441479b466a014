#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowmap/integrate.hpp"
#include "flowmap/maps.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Explicit time discretization. Canonical grids increase from a to b;
// inversion reuses the same machinery on reversed() grids, so validation
// accepts either strict ordering.
struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(double a, double b, int nsteps);
  static TimeGrid onestep() { return uniform(0.0, 1.0, 1); }

  int steps() const { return static_cast<int>(times.size()) - 1; }
  TimeGrid reversed() const;
  void validate() const;
};

enum class SampleMethod { ode_heun, ode_rk4, map_onestep, map_multistep };

SampleMethod sample_method_from_string(const std::string& name);
std::string to_string(SampleMethod m);

// Declarative description of one generation run.
struct SampleRun {
  SampleMethod method = SampleMethod::map_onestep;
  TimeGrid grid = TimeGrid::onestep();
  std::uint64_t seed = 0;
  Eigen::Index count = 0;
  int label = -1;  // -1 = unconditional

  void validate() const;  // map_onestep must use the {0,1} grid
};

// Walks the grid with one integrator step per interval.
Mat integrate_over_grid(const VelocityField& b, const Mat& x0,
                        const TimeGrid& grid, OdeMethod method);

// Iterates x <- X̂_{t_{k-1},t_k}(x) along the grid: exactly steps() batched
// map evaluations, accumulated into *evals when given.
Mat map_sample(const TwoTimeMap& map, const Mat& x0, const TimeGrid& grid,
               long* evals = nullptr);

struct RestyleOptions {
  double s_prime = 0.3;
  int leg_steps = 8;
};

// Inversion-based style transfer: pull x1 back to s' under the first map,
// push forward to 1 under the second. Maps carry their own conditioning
// (bind labels via adapters); passing the same map twice gives the cycle
// X̂_{s',1} ∘ X̂_{1,s'}, identity for an exact map.
Mat invert_and_restyle(const TwoTimeMap& map_back, const TwoTimeMap& map_fwd,
                       const Mat& x1, const RestyleOptions& opt = {},
                       long* evals = nullptr);

// One row per point: run id, method, step count, label, coordinates.
void write_points_csv(std::ostream& os, const std::string& run_id,
                      SampleMethod method, int nsteps, const Mat& points,
                      const IVec* labels = nullptr);

}  // namespace flowmap

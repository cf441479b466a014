#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "flowmap/types.hpp"

namespace flowmap {

// Deterministic random source. All randomness in the library flows through
// this class so that a run is reproducible from a single 64-bit seed.
// Gaussian variates use Box-Muller on raw 53-bit uniforms instead of
// std::normal_distribution, whose output is not pinned down by the standard
// and differs across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream for a parallel worker: independent engines from one base seed.
  static Rng for_worker(std::uint64_t base_seed, std::uint64_t worker_index) {
    return Rng(base_seed ^ (0x9e3779b97f4a7c15ull * (worker_index + 1)));
  }

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0,1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer on {0,...,n-1}.
  std::uint64_t below(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    // Box-Muller; the +0.5 offset keeps the log argument strictly positive.
    double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Mat normal_mat(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Vec uniform_vec(Eigen::Index n, double a = 0.0, double b = 1.0) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(a, b);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowmap

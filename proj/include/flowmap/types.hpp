#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace flowmap {

using Mat = Eigen::MatrixXd;   // batch in rows, coordinates in columns
using Vec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

// Thrown when an input leaves the documented domain (e.g. t outside [0,1]).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Thrown when a computation produces non-finite values; message carries
// provenance (layer index, step index, node name).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "0.1.0";

// Shared relative-error convention for derivative and gradient checks.
inline double rel_error(double a, double b) {
  double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

}  // namespace flowmap

#pragma once

#include "flowmap/dataset.hpp"
#include "flowmap/maps.hpp"
#include "flowmap/rng.hpp"
#include "flowmap/schedule.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Gaussian endpoint task under the linear schedule: base N(0, Id), target
// N(m, diag(sigma^2)), independent coupling. Everything about its
// probability flow is available in closed form, which makes it the ground
// truth for losses, maps, and the Wasserstein bound audit. Path moments:
// m_t = t m and sigma_t^2 = (1-t)^2 + t^2 sigma^2 componentwise.
struct GaussianTask {
  Vec m;
  Vec sigma;

  static GaussianTask defaults() {
    GaussianTask t;
    t.m = (Vec(2) << 1.5, -0.5).finished();
    t.sigma = (Vec(2) << 0.7, 1.3).finished();
    return t;
  }
  static GaussianTask isotropic(Vec m) {
    GaussianTask t;
    t.sigma = Vec::Ones(m.size());
    t.m = std::move(m);
    return t;
  }

  int dim() const { return static_cast<int>(m.size()); }
  void validate() const;

  Vec mean_at(double t) const { return t * m; }
  Vec sigma_at(double t) const;
  Vec dsigma_at(double t) const;

  Schedule schedule() const { return Schedule::make(ScheduleKind::linear); }
  Coupling coupling() const;

  // One-sided Lipschitz constant of the drift: the drift is affine with
  // componentwise slope dsigma_t/sigma_t, so C_t is the largest slope.
  double lipschitz(double t) const;
  double lipschitz_integral() const;  // integral of |C_t| over [0,1]
};

// Closed-form conditional expectation E[Idot_t | I_t = x]: the drift of
// the probability flow. Componentwise m + (dsigma_t/sigma_t)(x - t m).
Vec oracle_velocity_gaussian(const GaussianTask& task, double t, const Vec& x);
Mat oracle_velocity_gaussian(const GaussianTask& task, const Vec& t,
                             const Mat& x);

// Exact two-time flow map: X_{s,t}(x) = m_t + (sigma_t/sigma_s)(x - m_s).
Vec oracle_flowmap_gaussian(const GaussianTask& task, double s, double t,
                            const Vec& x);
Mat oracle_flowmap_gaussian(const GaussianTask& task, const Vec& s,
                            const Vec& t, const Mat& x);

// Conditional mean E[I_t | I_s = x]; at (s,t)=(0,1) it collapses to m for
// every x, the failure mode of the denoiser objective.
Vec oracle_denoiser_gaussian(const GaussianTask& task, double s, double t,
                             const Vec& x);
Mat oracle_denoiser_gaussian(const GaussianTask& task, const Vec& s,
                             const Vec& t, const Mat& x);

// Interface adapters over the closed forms.
class GaussianVelocityOracle : public VelocityField {
 public:
  explicit GaussianVelocityOracle(GaussianTask task) : task_(std::move(task)) {}
  int dim() const override { return task_.dim(); }
  Mat value(const Vec& t, const Mat& x) const override {
    return oracle_velocity_gaussian(task_, t, x);
  }

 private:
  GaussianTask task_;
};

class GaussianFlowMapOracle : public TwoTimeMap {
 public:
  explicit GaussianFlowMapOracle(GaussianTask task) : task_(std::move(task)) {}
  int dim() const override { return task_.dim(); }
  Mat value(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat dt(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat ds(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat jvp(const Vec& s, const Vec& t, const Mat& x,
          const Mat& dir) const override;

 private:
  GaussianTask task_;
};

class GaussianDenoiserOracle : public TwoTimeMap {
 public:
  explicit GaussianDenoiserOracle(GaussianTask task)
      : task_(std::move(task)) {}
  int dim() const override { return task_.dim(); }
  Mat value(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat dt(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat ds(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat jvp(const Vec& s, const Vec& t, const Mat& x,
          const Mat& dir) const override;

 private:
  GaussianTask task_;
};

// Smooth random perturbation of the exact Gaussian map, used by the
// randomized bound audit. Componentwise
//   X(s,t,x) = m_t + R(s,t)(x - m_s) + (t-s) * eps * u
// with R(s,t) = (sigma_t/sigma_s)(1 + eps a (t-s)); a, u drawn once at
// construction. At s = t the map is the identity for any draw.
class PerturbedGaussianMap : public TwoTimeMap {
 public:
  PerturbedGaussianMap(GaussianTask task, double eps, Rng& rng);
  int dim() const override { return task_.dim(); }
  Mat value(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat dt(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat ds(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat jvp(const Vec& s, const Vec& t, const Mat& x,
          const Mat& dir) const override;

 private:
  GaussianTask task_;
  double eps_;
  Vec a_, u_;
};

enum class BoundKind { lmd, emd };

struct BoundCheckOptions {
  Eigen::Index loss_samples = 100000;  // Monte-Carlo draws for the loss
  Eigen::Index w2_points = 512;        // points per assignment solve
  int w2_repeats = 8;
};

struct BoundCheck {
  double lhs = 0.0, lhs_se = 0.0;   // W2^2 estimate between pushforwards
  double loss = 0.0, loss_se = 0.0; // Monte-Carlo loss under w = 1
  double constant = 0.0;            // bound prefactor
  double rhs = 0.0, rhs_se = 0.0;   // constant * loss
  bool holds = false;               // lhs <= rhs + 3 * combined se

  double combined_se() const;
};

// Audits the Wasserstein control of a candidate map: the squared W2
// between the exact and candidate time-1 pushforwards must be bounded by
// e^{1+2 int |C_t|} * L_lmd (Lagrangian) or e * L_emd (Eulerian). Losses
// are recomputed under the uniform weight regardless of training weight.
BoundCheck wasserstein_bound_check(const GaussianTask& task,
                                   const TwoTimeMap& candidate,
                                   BoundKind kind, Rng& rng,
                                   const BoundCheckOptions& opt = {});

}  // namespace flowmap

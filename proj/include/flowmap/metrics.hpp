#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "flowmap/maps.hpp"
#include "flowmap/rng.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Regular histogram over a box, with per-cell smoothing mass for KL.
struct HistogramGrid {
  Vec lo, hi;
  std::vector<int> bins;
  double eps = 0.0;  // mass added to every cell before renormalizing

  // 64x64 cells over [-4.5, 4.5]^2, eps = 1e-6 / cells: the protocol all
  // reported 2D KL numbers use.
  static HistogramGrid planar_default();

  void validate() const;
  Eigen::Index cells() const;

  // Smoothed probability vector; samples outside the box are dropped.
  Vec density(const Mat& samples) const;
};

// KL(target ‖ model) from two sample sets on a common grid.
double kl_histogram(const Mat& target_samples, const Mat& model_samples,
                    const HistogramGrid& grid);

struct W2Estimate {
  double mean = 0.0;
  double se = 0.0;
  Eigen::Index n = 0;
  int repeats = 0;
};

// Squared 2-Wasserstein between sample clouds: exact linear assignment on
// squared Euclidean cost over n-vs-n subsamples, averaged over repeats.
// Subsampling is without replacement; worker count is capped by the
// FLOWMAP_THREADS environment variable (default 1), with a fixed
// per-repeat stream so results do not depend on thread count.
W2Estimate w2_assignment(const Mat& samples_p, const Mat& samples_q,
                         Eigen::Index n, int repeats, Rng& rng);

// Exact assignment cost per point between two equal-size clouds (no
// subsampling); the primitive behind w2_assignment and the bound audit.
double assignment_cost(const Mat& p, const Mat& q);

// Mean squared gap between two one-step (0 -> 1) pushforwards of the same
// base points.
double teacher_l2(const TwoTimeMap& student,
                  const std::function<Mat(const Mat&)>& teacher_0_1,
                  const Mat& x0);

// Pointwise teacher/student comparison for coupling-mismatch plots.
struct MismatchReport {
  Mat x0, teacher_out, student_out;
  Vec sq_deviation;
  std::vector<bool> flagged;
  double threshold = 1.0;
  double flagged_fraction = 0.0;
};

MismatchReport mismatch_report(const TwoTimeMap& student,
                               const std::function<Mat(const Mat&)>& teacher_0_1,
                               const Mat& x0, double threshold = 1.0);

// Evaluation panel for one trained model.
struct MetricReport {
  std::string method;
  Eigen::Index n_target = 0, n_model = 0;
  std::uint64_t seed = 0;
  double kl = 0.0;
  double w2sq = 0.0, w2_se = 0.0;
  double teacher_gap = std::numeric_limits<double>::quiet_NaN();
  int map_evals = 0;  // network evaluations per generated sample

  void validate() const;
  std::string key_value_block() const;
  std::string csv_row() const;
  static std::string csv_header();
};

}  // namespace flowmap

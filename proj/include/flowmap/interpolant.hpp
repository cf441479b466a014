#pragma once

#include <string>

#include "flowmap/dataset.hpp"
#include "flowmap/rng.hpp"
#include "flowmap/schedule.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

enum class TimeWeightKind { uniform_square, strip, forward_only, forward_strip };

// Law of the time pair (s,t) weighting the two-time losses.
//   uniform-square    (s,t) uniform on [0,1]^2
//   strip(K)          uniform on [0,1]^2 restricted to |t-s| <= 1/K
//   forward-only      uniform on the triangle s <= t
//   forward-strip(K)  uniform on s <= t <= s + 1/K
// Strip kinds use rejection sampling; acceptance for strip(K) is
// 2/K - 1/K^2, so costs stay modest for the K used in practice.
struct TimeWeight {
  TimeWeightKind kind = TimeWeightKind::uniform_square;
  int K = 4;

  static TimeWeight parse(const std::string& text);
  std::string str() const;

  // True when the law is invariant under (s,t) -> (t,s).
  bool symmetric() const {
    return kind == TimeWeightKind::uniform_square ||
           kind == TimeWeightKind::strip;
  }

  void draw(Rng& rng, double& s, double& t) const;
  void draw(Rng& rng, Vec& s, Vec& t) const;  // sizes must be preset
};

// One interpolant sample: endpoints, noise, and the path evaluated at t.
struct InterpolantDraw {
  double s = 0.0, t = 0.0;
  Vec x0, x1, z;
  Vec I, Idot;
  int label = -1;
};

// Batched draws, one sample per row. I/Idot hold the path at time t;
// losses needing the path at s re-evaluate via eval_at.
struct DrawBatch {
  Vec s, t;
  Mat x0, x1, z;
  Mat I, Idot;
  IVec labels;  // empty when the coupling is unlabeled

  Eigen::Index rows() const { return x0.rows(); }
};

InterpolantDraw draw_interpolant(const Schedule& schedule,
                                 const Coupling& coupling,
                                 const TimeWeight& weight, Rng& rng);

DrawBatch draw_interpolant_batch(const Schedule& schedule,
                                 const Coupling& coupling,
                                 const TimeWeight& weight, Eigen::Index n,
                                 Rng& rng);

// Re-evaluates the stored paths at a new time (one value per row).
void eval_at(const DrawBatch& batch, const Schedule& schedule, const Vec& tau,
             Mat& I, Mat& Idot);
void eval_at(const InterpolantDraw& draw, const Schedule& schedule, double tau,
             Vec& I, Vec& Idot);

}  // namespace flowmap

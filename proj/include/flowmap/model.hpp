#pragma once

#include <utility>
#include <vector>

#include "flowmap/mlp.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Which scalar/spatial input the forward-mode tangent follows.
enum class SeedVar { none, s, t, x };

// Estimator of the probability-flow velocity b_t(x). Input features are
// [time embedding, x, one-hot label?].
struct VelocityModel {
  int d = 0;
  int num_classes = 0;
  ad::EmbedSpec emb;
  MlpParams mlp;

  static VelocityModel init(int d, const std::vector<int>& hidden,
                            Activation act, const ad::EmbedSpec& emb,
                            int num_classes, Rng& rng);
};

// Two-time map estimator with the skip ansatz X(s,t,x) = x + (t-s) v(s,t,x),
// which makes X(s,s,.) the identity for any parameters. Input features are
// [s embedding, t embedding, x, one-hot label?].
struct FlowMapModel {
  int d = 0;
  int num_classes = 0;
  ad::EmbedSpec emb;
  MlpParams mlp;

  static FlowMapModel init(int d, const std::vector<int>& hidden,
                           Activation act, const ad::EmbedSpec& emb,
                           int num_classes, Rng& rng);
};

Mat one_hot(const IVec& labels, int num_classes);

// Batched plain evaluation; one sample per row.
Mat velocity_value(const VelocityModel& m, const Vec& t, const Mat& x,
                   const IVec* labels = nullptr);
Mat flow_map_value(const FlowMapModel& m, const Vec& s, const Vec& t,
                   const Mat& x, const IVec* labels = nullptr);

struct DualEval {
  Mat value;
  Mat tangent;
};

// Batched evaluation with an exact directional derivative from one forward
// pass: seed picks d/ds, d/dt, or a spatial direction (then xdot is the
// direction, one row per sample).
DualEval flow_map_dual(const FlowMapModel& m, const Vec& s, const Vec& t,
                       const Mat& x, SeedVar seed, const Mat* xdot = nullptr,
                       const IVec* labels = nullptr);

// Single-point convenience forms.
Vec velocity_eval(const VelocityModel& m, double t, const Vec& x,
                  int label = -1);
Vec flow_map_eval(const FlowMapModel& m, double s, double t, const Vec& x,
                  int label = -1);
std::pair<Vec, Vec> flow_map_dt(const FlowMapModel& m, double s, double t,
                                const Vec& x, int label = -1);
std::pair<Vec, Vec> flow_map_ds(const FlowMapModel& m, double s, double t,
                                const Vec& x, int label = -1);
std::pair<Vec, Vec> flow_map_jvp_x(const FlowMapModel& m, double s, double t,
                                   const Vec& x, const Vec& dir,
                                   int label = -1);

// Tape-recorded evaluation for training. x may be any graph node (of shape
// batch x d); sdot/tdot in {0,1} seed the tangent on a time input.
ad::Node* velocity_taped(ad::Tape& tape, VelocityModel& m, const Vec& t,
                         ad::Node* x, const IVec* labels = nullptr);
ad::Node* flow_map_taped(ad::Tape& tape, FlowMapModel& m, const Vec& s,
                         const Vec& t, ad::Node* x,
                         const IVec* labels = nullptr, double sdot = 0.0,
                         double tdot = 0.0);

}  // namespace flowmap

#pragma once

#include <string>

#include "flowmap/interpolant.hpp"
#include "flowmap/maps.hpp"
#include "flowmap/model.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// The training objectives. Velocity regression learns the drift; lmd/emd
// distill a flow map from a frozen velocity teacher (Lagrangian and
// Eulerian residuals); fmm trains a map directly against interpolant
// samples; pfmm distills a multi-step map into fewer steps; ee is the
// stop-gradient Eulerian estimator; denoiser is the deliberately wrong
// objective kept as a failure-mode demonstrator.
enum class LossKind { velocity, lmd, emd, fmm, pfmm, ee, denoiser };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct LossOptions {
  double fmm_lambda = 1.0;  // weight of the fmm invertibility term
  int pfmm_K = 2;           // grid points; K-1 teacher applications
  // Debug-only: estimate the t-derivative by central differences instead
  // of the exact tangent channel. Never for reported runs.
  bool fd_time_fallback = false;
  double fd_h = 1e-4;
};

// Throws ConfigError when a loss kind and time weight cannot be combined
// (fmm needs a symmetric weight; pfmm needs K >= 2).
void validate_loss_spec(LossKind kind, const TimeWeight& weight,
                        const LossOptions& opt);

// Tape-recorded batch estimators returning the scalar loss node. The
// caller owns tape and models; parameter gradients accumulate into the
// models' blocks on Tape::backward. Teachers are frozen by contract: the
// trainer only steps the student (lmd/emd teachers still receive adjoint
// traffic, which is discarded; the pfmm teacher is evaluated off-tape).
ad::Node* loss_velocity_graph(ad::Tape& tape, VelocityModel& model,
                              const DrawBatch& batch);
ad::Node* loss_lmd_graph(ad::Tape& tape, FlowMapModel& student,
                         VelocityModel& teacher, const DrawBatch& batch,
                         const Schedule& schedule, const LossOptions& opt);
ad::Node* loss_emd_graph(ad::Tape& tape, FlowMapModel& student,
                         const VelocityModel& teacher, const DrawBatch& batch,
                         const Schedule& schedule, const LossOptions& opt);
ad::Node* loss_fmm_graph(ad::Tape& tape, FlowMapModel& model,
                         const DrawBatch& batch, const LossOptions& opt);
ad::Node* loss_pfmm_graph(ad::Tape& tape, FlowMapModel& student,
                          const FlowMapModel& teacher, const DrawBatch& batch,
                          const Schedule& schedule, const LossOptions& opt);
ad::Node* loss_ee_graph(ad::Tape& tape, FlowMapModel& model,
                        const DrawBatch& batch, const Schedule& schedule,
                        const LossOptions& opt);
ad::Node* loss_denoiser_graph(ad::Tape& tape, FlowMapModel& model,
                              const DrawBatch& batch, const Schedule& schedule,
                              const LossOptions& opt);

// Interface-level (tape-free) per-sample squared residuals, one entry per
// batch row. These evaluate the same estimators against arbitrary
// TwoTimeMap/VelocityField implementations: closed-form oracles for
// zero-at-truth checks, perturbed maps for bound audits, trained models
// for reports.
Vec velocity_loss_sq(const VelocityField& bhat, const DrawBatch& batch);
Vec lmd_loss_sq(const TwoTimeMap& map, const VelocityField& b,
                const DrawBatch& batch, const Schedule& schedule);
Vec emd_loss_sq(const TwoTimeMap& map, const VelocityField& b,
                const DrawBatch& batch, const Schedule& schedule);
Vec fmm_loss_sq(const TwoTimeMap& map, const DrawBatch& batch, double lambda);
Vec pfmm_loss_sq(const TwoTimeMap& student, const TwoTimeMap& teacher, int K,
                 const DrawBatch& batch);
Vec ee_loss_sq(const TwoTimeMap& map, const DrawBatch& batch,
               const Schedule& schedule);
Vec denoiser_loss_sq(const TwoTimeMap& map, const DrawBatch& batch,
                     const Schedule& schedule);

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  Eigen::Index n = 0;
};

// Monte-Carlo loss estimate over fresh draws. Exactly one of map/velocity
// is consumed depending on kind; teacher_b serves lmd/emd, teacher_map
// serves pfmm.
McEstimate mc_loss(LossKind kind, const TwoTimeMap* map,
                   const VelocityField* velocity,
                   const VelocityField* teacher_b,
                   const TwoTimeMap* teacher_map, const Schedule& schedule,
                   const Coupling& coupling, const TimeWeight& weight,
                   Eigen::Index nsamples, Rng& rng, const LossOptions& opt);

}  // namespace flowmap

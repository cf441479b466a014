#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flowmap/adam.hpp"
#include "flowmap/config.hpp"
#include "flowmap/interpolant.hpp"
#include "flowmap/model.hpp"
#include "flowmap/objectives.hpp"

namespace flowmap {

// Config interpreters shared by the trainer, the CLI, and tests.
Schedule make_schedule(const ExperimentConfig& cfg);
Coupling make_coupling(const ExperimentConfig& cfg);
TimeWeight make_weight(const ExperimentConfig& cfg);
ad::EmbedSpec make_embed(const ExperimentConfig& cfg);
LossOptions make_loss_options(const ExperimentConfig& cfg);
std::vector<int> network_widths_hidden(const ExperimentConfig& cfg);

struct TrainLogEntry {
  long long step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  long long steps_done = 0;
  bool diverged = false;
  std::string divergence_note;
  std::vector<TrainLogEntry> curve;  // step 1, every 100th, and the last
};

// Teacher handles for distillation losses. The velocity teacher is taped
// during lmd (its input gradient participates), so it is non-const; its
// parameter gradients are discarded and zeroed every step.
struct Teachers {
  VelocityModel* velocity = nullptr;  // lmd, emd
  const FlowMapModel* flow_map = nullptr;  // pfmm
};

// Stochastic training loops. On numeric failure the model is rolled back
// to the last logged state and the result is marked diverged; the caller
// decides whether that state is worth keeping.
TrainResult train_velocity(VelocityModel& model, const ExperimentConfig& cfg,
                           Rng& rng, AdamState* state = nullptr);
TrainResult train_flow_map(FlowMapModel& model, LossKind kind,
                           const Teachers& teachers,
                           const ExperimentConfig& cfg, Rng& rng,
                           AdamState* state = nullptr);

void write_curve_csv(std::ostream& os, const std::vector<TrainLogEntry>& curve);

}  // namespace flowmap

#pragma once

#include <string>
#include <vector>

#include "flowmap/adam.hpp"
#include "flowmap/model.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

enum class ModelKind { velocity, flow_map };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

// Self-describing snapshot of a model (and optionally its optimizer
// moments). The binary layout is a fixed little-endian header followed by
// the flattened parameters in declaration order; round-trips are bit
// exact, so a reloaded model reproduces the saved one's outputs.
struct Checkpoint {
  ModelKind kind = ModelKind::velocity;
  int dim = 0;
  std::vector<int> widths;  // full chain, input through output
  Activation act = Activation::gelu;
  int emb_freqs = 8;
  int num_classes = 0;
  Vec params;
  bool has_adam = false;
  AdamState adam;

  std::vector<int> hidden() const {
    return {widths.begin() + 1, widths.end() - 1};
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot(const VelocityModel& m, const AdamState* adam = nullptr);
Checkpoint snapshot(const FlowMapModel& m, const AdamState* adam = nullptr);

// Rebuilds a model of the stored kind; throws ConfigError on kind mismatch.
VelocityModel restore_velocity(const Checkpoint& ck);
FlowMapModel restore_flow_map(const Checkpoint& ck);

}  // namespace flowmap

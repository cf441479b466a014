#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowmap/adam.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Declarative description of one experiment. The on-disk form is a flat
// key=value file with section headers; parse -> serialize is a fixed point
// on the canonical form, and the hash is taken over that form so key order
// in a hand-edited file never changes it.
struct ExperimentConfig {
  // [task] checkerboard | checkerboard-2class | gaussian
  std::string task = "checkerboard";
  std::vector<double> gaussian_mean = {1.5, -0.5};
  std::vector<double> gaussian_sigma = {0.7, 1.3};

  // [schedule]
  std::string schedule = "linear";
  double ve_horizon = 80.0;

  // [weight] time-pair law for two-time losses
  std::string weight = "uniform-square";

  // [network]
  std::vector<int> hidden = {128, 128, 128};
  std::string activation = "gelu";
  int time_frequencies = 8;

  // [optimizer]
  AdamHyper adam;

  // [train]
  std::string loss = "fmm";
  long long steps = 20000;
  int batch = 256;
  double fmm_lambda = 1.0;
  int pfmm_grid = 2;
  bool pfmm_warm_start = true;
  std::string teacher;  // checkpoint path for distillation modes

  // [eval]
  std::vector<int> map_steps = {1};
  long long kl_samples = 200000;
  int sample_rows = 20000;  // points written to sample CSVs and images
  int w2_points = 512;
  int w2_repeats = 8;
  int ode_steps = 80;
  std::string ode_method = "heun";

  // [restyle]
  double restyle_pivot = 0.3;
  int restyle_leg_steps = 8;

  // [run]
  std::uint64_t seed = 1;
  std::string out = "runs";

  void validate() const;

  // Scales the network and budget to the fidelity settings.
  void apply_paper_scale();

  int task_classes() const;  // 2 for the labeled board, else 0
  int task_dim() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization, as fixed-width hex.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace flowmap

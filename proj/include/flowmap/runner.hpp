#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "flowmap/config.hpp"
#include "flowmap/model.hpp"
#include "flowmap/oracle.hpp"
#include "flowmap/rng.hpp"

namespace flowmap {

// Command-line switches shared by every subcommand.
struct RunOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  bool paper_scale = false;
  std::string out_override;
};

ExperimentConfig load_run_config(const RunOptions& opt);

// Owns one run's output directory and the manifest bookkeeping. Every
// artifact is written through emit() so the manifest lists each file the
// run produced; the directory must start empty to keep that invariant.
class RunContext {
 public:
  RunContext(ExperimentConfig cfg, std::string kind);

  const ExperimentConfig& cfg() const { return cfg_; }
  Rng& rng() { return rng_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& dir() const { return dir_; }

  // Registers a run-relative file name and returns the path to write.
  std::string emit(const std::string& name);
  void write_text(const std::string& name, const std::string& content);
  void metric(const std::string& key, double value);

  void finish();  // writes manifest.json; further emits are an error

 private:
  ExperimentConfig cfg_;
  std::string kind_, dir_, hash_;
  std::uint64_t seed_ = 0;
  Rng rng_;
  std::vector<std::string> files_;
  std::map<std::string, double> metrics_;
  std::chrono::system_clock::time_point start_;
  bool finished_ = false;
};

// Subcommand bodies; each returns a process exit code (0 = success,
// 3 = numeric divergence with a rolled-back checkpoint on disk,
// 4 = oracle suite failure). Config and usage problems throw.
int cmd_train_velocity(const RunOptions& opt);
int cmd_distill(const RunOptions& opt, std::string mode);
int cmd_train_fmm(const RunOptions& opt);
int cmd_evaluate(const RunOptions& opt, const std::string& checkpoint);
int cmd_sample(const RunOptions& opt, const std::string& checkpoint);
int cmd_style_transfer(const RunOptions& opt, const std::string& checkpoint,
                       double s_prime, int label_from, int label_to);
int cmd_oracle_suite(const RunOptions& opt);

// One pass/fail line of the oracle battery.
struct CheckResult {
  std::string name;
  bool ok = false;
  double measured = 0.0;
  double threshold = 0.0;  // measured must be <= threshold unless noted
  std::string note;
};

std::string format_check(const CheckResult& c);

// The full property battery behind cmd_oracle_suite: closed-form map
// identities, marginal moments, Eulerian residual, zero-at-truth losses,
// Wasserstein bound audits, and the denoiser failure-mode training.
std::vector<CheckResult> run_oracle_suite(Rng& rng, std::ostream* log,
                                          bool quick = false);

// Denoiser failure-mode demonstration: trains the denoiser objective on
// the Gaussian task and reports how far X(0, 1, .) collapsed onto the
// target mean over fresh inputs.
struct DenoiserCollapse {
  double std_ratio = 0.0;  // max_j std(out_j) / target sigma_j
  double mean_gap = 0.0;   // | mean(out) - m |
  bool diverged = false;
};

DenoiserCollapse train_denoiser_collapse(const GaussianTask& task,
                                         long long steps, int batch, Rng& rng,
                                         FlowMapModel* out_model = nullptr);

}  // namespace flowmap

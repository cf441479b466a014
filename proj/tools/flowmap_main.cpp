#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flowmap/runner.hpp"
#include "flowmap/types.hpp"

namespace {

void add_common(CLI::App* sub, flowmap::RunOptions& opt, bool config_required) {
  auto* c = sub->add_option("--config", opt.config_path,
                            "experiment config file");
  if (config_required) c->required();
  sub->add_option("--seed", opt.seed, "override the config seed");
  sub->add_flag("--deterministic", opt.deterministic,
                "pin worker count to 1 for bitwise-reproducible metrics");
  sub->add_flag("--paper-scale", opt.paper_scale,
                "use the fidelity-scale network and step budget");
  sub->add_option("--out", opt.out_override, "output directory override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-time flow map laboratory"};
  app.require_subcommand(1);

  flowmap::RunOptions opt;
  std::string mode, checkpoint;
  double pivot = -1.0;
  int label_from = 0, label_to = 1;

  auto* train_v =
      app.add_subcommand("train-velocity", "train the drift estimator");
  add_common(train_v, opt, true);

  auto* distill = app.add_subcommand(
      "distill", "train a flow map against a frozen teacher");
  add_common(distill, opt, true);
  distill->add_option("--mode", mode, "lmd | emd | pfmm (default: config)");

  auto* train_fmm = app.add_subcommand(
      "train-fmm", "train a flow map directly on interpolant samples");
  add_common(train_fmm, opt, true);

  auto* evaluate = app.add_subcommand(
      "evaluate", "samples plus KL / W2 / teacher-gap metrics");
  add_common(evaluate, opt, true);
  evaluate->add_option("--checkpoint", checkpoint, "model to evaluate")
      ->required();

  auto* sample =
      app.add_subcommand("sample", "generate samples from a checkpoint");
  add_common(sample, opt, true);
  sample->add_option("--checkpoint", checkpoint, "model to sample")
      ->required();

  auto* style = app.add_subcommand(
      "style-transfer", "invert to the pivot time, push forward restyled");
  add_common(style, opt, true);
  style->add_option("--checkpoint", checkpoint, "conditional flow-map model")
      ->required();
  style->add_option("--from", label_from, "source class label")->required();
  style->add_option("--to", label_to, "target class label")->required();
  style->add_option("--pivot", pivot,
                    "inversion time s' in (0,1); default from config");

  auto* suite = app.add_subcommand(
      "oracle-suite", "closed-form property battery; nonzero exit on failure");
  add_common(suite, opt, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  opt.seed_set = active->count("--seed") > 0;

  try {
    if (active == train_v) return flowmap::cmd_train_velocity(opt);
    if (active == distill) return flowmap::cmd_distill(opt, mode);
    if (active == train_fmm) return flowmap::cmd_train_fmm(opt);
    if (active == evaluate) return flowmap::cmd_evaluate(opt, checkpoint);
    if (active == sample) return flowmap::cmd_sample(opt, checkpoint);
    if (active == style)
      return flowmap::cmd_style_transfer(opt, checkpoint, pivot, label_from,
                                         label_to);
    if (active == suite) return flowmap::cmd_oracle_suite(opt);
    std::cerr << "unknown subcommand\n";
    return 2;
  } catch (const flowmap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const flowmap::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const flowmap::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const flowmap::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

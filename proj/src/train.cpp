#include "flowmap/train.hpp"

#include <memory>
#include <ostream>
#include <utility>

#include "flowmap/tape.hpp"

namespace flowmap {

Schedule make_schedule(const ExperimentConfig& cfg) {
  return Schedule::make(schedule_kind_from_string(cfg.schedule),
                        cfg.ve_horizon);
}

Coupling make_coupling(const ExperimentConfig& cfg) {
  if (cfg.task == "gaussian") {
    Vec m = Eigen::Map<const Vec>(cfg.gaussian_mean.data(),
                                  cfg.gaussian_mean.size());
    Vec s = Eigen::Map<const Vec>(cfg.gaussian_sigma.data(),
                                  cfg.gaussian_sigma.size());
    return Coupling::independent(
        std::make_shared<StandardNormal>(static_cast<int>(m.size())),
        std::make_shared<DiagonalGaussian>(m, s));
  }
  bool labeled = cfg.task == "checkerboard-2class";
  return Coupling::independent(std::make_shared<StandardNormal>(2),
                               std::make_shared<Checkerboard>(labeled));
}

TimeWeight make_weight(const ExperimentConfig& cfg) {
  return TimeWeight::parse(cfg.weight);
}

ad::EmbedSpec make_embed(const ExperimentConfig& cfg) {
  ad::EmbedSpec emb;
  emb.freqs = cfg.time_frequencies;
  return emb;
}

LossOptions make_loss_options(const ExperimentConfig& cfg) {
  LossOptions opt;
  opt.fmm_lambda = cfg.fmm_lambda;
  opt.pfmm_K = cfg.pfmm_grid;
  return opt;
}

std::vector<int> network_widths_hidden(const ExperimentConfig& cfg) {
  return cfg.hidden;
}

namespace {

bool should_log(long long step, long long total) {
  return step == 1 || step % 100 == 0 || step == total;
}

struct Rollback {
  Vec params;
  AdamState adam;
  long long step = 0;
};

// Shared loop skeleton: build the step's loss graph via `step_fn`, apply
// Adam, log, and keep a rollback point at every log so divergence can
// rewind to the last state whose loss was still finite.
template <class Model, class StepFn>
TrainResult run_loop(Model& model, const ExperimentConfig& cfg, Rng& rng,
                     AdamState* state, StepFn&& step_fn) {
  TrainResult result;
  AdamState local = AdamState::init(model.mlp.param_count());
  AdamState& adam = state ? *state : local;
  if (adam.m.size() != static_cast<Eigen::Index>(model.mlp.param_count()))
    throw ConfigError("optimizer state does not match the model");

  Rollback good{model.mlp.flatten(), adam, 0};
  for (long long step = 1; step <= cfg.steps; ++step) {
    double loss_value = 0.0;
    bool ok = true;
    std::string note;
    try {
      loss_value = step_fn(rng);
      if (!std::isfinite(loss_value)) {
        ok = false;
        note = "non-finite loss";
      } else {
        adam_step(model.mlp, adam, cfg.adam);
        if (!model.mlp.params_finite()) {
          ok = false;
          note = "non-finite parameters after update";
        }
      }
    } catch (const NumericError& err) {
      ok = false;
      note = err.what();
    }
    if (!ok) {
      model.mlp.unflatten(good.params);
      adam = good.adam;
      result.steps_done = good.step;
      result.diverged = true;
      result.divergence_note =
          note + " at step " + std::to_string(step) + "; rolled back to step " +
          std::to_string(good.step);
      return result;
    }
    result.steps_done = step;
    if (should_log(step, cfg.steps)) {
      result.curve.push_back({step, loss_value, cfg.adam.lr_at(adam.step - 1)});
      good = {model.mlp.flatten(), adam, step};
    }
  }
  return result;
}

}  // namespace

TrainResult train_velocity(VelocityModel& model, const ExperimentConfig& cfg,
                           Rng& rng, AdamState* state) {
  cfg.validate();
  if (loss_kind_from_string(cfg.loss) != LossKind::velocity)
    throw ConfigError("train_velocity requires loss = velocity");
  Schedule schedule = make_schedule(cfg);
  Coupling coupling = make_coupling(cfg);
  TimeWeight weight = make_weight(cfg);
  return run_loop(model, cfg, rng, state, [&](Rng& r) {
    model.mlp.zero_grad();
    DrawBatch batch =
        draw_interpolant_batch(schedule, coupling, weight, cfg.batch, r);
    ad::Tape tape;
    ad::Node* loss = loss_velocity_graph(tape, model, batch);
    double value = tape.scalar(loss);
    tape.backward(loss);
    return value;
  });
}

TrainResult train_flow_map(FlowMapModel& model, LossKind kind,
                           const Teachers& teachers,
                           const ExperimentConfig& cfg, Rng& rng,
                           AdamState* state) {
  cfg.validate();
  Schedule schedule = make_schedule(cfg);
  Coupling coupling = make_coupling(cfg);
  TimeWeight weight = make_weight(cfg);
  LossOptions opt = make_loss_options(cfg);
  validate_loss_spec(kind, weight, opt);

  bool needs_velocity = kind == LossKind::lmd || kind == LossKind::emd;
  if (needs_velocity && !teachers.velocity)
    throw ConfigError(to_string(kind) + " needs a velocity teacher");
  if (kind == LossKind::pfmm && !teachers.flow_map)
    throw ConfigError("pfmm needs a flow-map teacher");
  if (kind == LossKind::velocity)
    throw ConfigError("velocity loss trains a velocity model");

  return run_loop(model, cfg, rng, state, [&](Rng& r) {
    model.mlp.zero_grad();
    if (teachers.velocity) teachers.velocity->mlp.zero_grad();
    DrawBatch batch =
        draw_interpolant_batch(schedule, coupling, weight, cfg.batch, r);
    ad::Tape tape;
    ad::Node* loss = nullptr;
    switch (kind) {
      case LossKind::lmd:
        loss = loss_lmd_graph(tape, model, *teachers.velocity, batch, schedule,
                              opt);
        break;
      case LossKind::emd:
        loss = loss_emd_graph(tape, model, *teachers.velocity, batch, schedule,
                              opt);
        break;
      case LossKind::fmm:
        loss = loss_fmm_graph(tape, model, batch, opt);
        break;
      case LossKind::pfmm:
        loss = loss_pfmm_graph(tape, model, *teachers.flow_map, batch,
                               schedule, opt);
        break;
      case LossKind::ee:
        loss = loss_ee_graph(tape, model, batch, schedule, opt);
        break;
      case LossKind::denoiser:
        loss = loss_denoiser_graph(tape, model, batch, schedule, opt);
        break;
      case LossKind::velocity:
        break;  // rejected above
    }
    double value = tape.scalar(loss);
    tape.backward(loss);
    // The lmd teacher sits on the tape, so adjoints reached its blocks;
    // only the student is stepped, and the stale teacher grads are cleared
    // at the top of the next step.
    return value;
  });
}

void write_curve_csv(std::ostream& os,
                     const std::vector<TrainLogEntry>& curve) {
  os << "step,loss,lr\n";
  os.precision(17);
  for (const auto& e : curve)
    os << e.step << ',' << e.loss << ',' << e.lr << '\n';
}

}  // namespace flowmap

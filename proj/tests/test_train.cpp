#include <sstream>
#include <vector>

#include "doctest.h"
#include "flowmap/maps.hpp"
#include "flowmap/oracle.hpp"
#include "flowmap/train.hpp"

using namespace flowmap;

namespace {

ExperimentConfig small_gaussian_cfg() {
  ExperimentConfig cfg;
  cfg.task = "gaussian";
  cfg.hidden = {16, 16};
  cfg.time_frequencies = 2;
  cfg.batch = 32;
  cfg.adam.lr = 3e-3;
  return cfg;
}

VelocityModel fresh_velocity(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return VelocityModel::init(cfg.task_dim(), cfg.hidden,
                             activation_from_string(cfg.activation),
                             make_embed(cfg), cfg.task_classes(), rng);
}

FlowMapModel fresh_flow_map(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return FlowMapModel::init(cfg.task_dim(), cfg.hidden,
                            activation_from_string(cfg.activation),
                            make_embed(cfg), cfg.task_classes(), rng);
}

double velocity_mc_loss(const VelocityModel& model,
                        const ExperimentConfig& cfg, std::uint64_t seed) {
  NeuralVelocity v(&model);
  Rng rng(seed);
  return mc_loss(LossKind::velocity, nullptr, &v, nullptr, nullptr,
                 make_schedule(cfg), make_coupling(cfg), make_weight(cfg),
                 4000, rng, make_loss_options(cfg))
      .mean;
}

}  // namespace

TEST_CASE("zero training steps leave the model untouched") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.loss = "velocity";
  cfg.steps = 0;
  VelocityModel model = fresh_velocity(cfg, 5);
  Vec before = model.mlp.flatten();
  Rng rng(1);
  TrainResult res = train_velocity(model, cfg, rng);
  CHECK(res.steps_done == 0);
  CHECK_FALSE(res.diverged);
  CHECK(res.curve.empty());
  CHECK((model.mlp.flatten() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("velocity training lowers the matching loss") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.loss = "velocity";
  cfg.steps = 400;
  VelocityModel model = fresh_velocity(cfg, 5);
  double before = velocity_mc_loss(model, cfg, 777);
  Rng rng(1);
  TrainResult res = train_velocity(model, cfg, rng);
  CHECK(res.steps_done == 400);
  CHECK_FALSE(res.diverged);
  double after = velocity_mc_loss(model, cfg, 777);
  CHECK(after < before);

  // The log keeps the first step, every hundredth, and the last.
  std::vector<long long> logged;
  for (const auto& e : res.curve) logged.push_back(e.step);
  CHECK(logged == std::vector<long long>{1, 100, 200, 300, 400});
}

TEST_CASE("training is deterministic in the seed and resumable") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.loss = "velocity";
  cfg.steps = 60;

  VelocityModel a = fresh_velocity(cfg, 9);
  VelocityModel b = fresh_velocity(cfg, 9);
  Rng ra(33), rb(33);
  AdamState sa = AdamState::init(a.mlp.param_count());
  AdamState sb = AdamState::init(b.mlp.param_count());
  train_velocity(a, cfg, ra, &sa);

  // Split the same budget into two legs that share the rng and optimizer
  // state; the result must be bitwise identical to the single run.
  cfg.steps = 30;
  train_velocity(b, cfg, rb, &sb);
  train_velocity(b, cfg, rb, &sb);
  CHECK((a.mlp.flatten() - b.mlp.flatten()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sa.step == sb.step);

  // A state sized for a different model is rejected.
  ExperimentConfig wide = cfg;
  wide.hidden = {24};
  VelocityModel c = fresh_velocity(wide, 9);
  CHECK_THROWS_AS(train_velocity(c, wide, rb, &sb), ConfigError);
}

TEST_CASE("divergence rolls the model back to the last sound state") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.loss = "velocity";
  cfg.steps = 50;
  cfg.adam.lr = 1e200;  // drives the next forward pass out of range
  VelocityModel model = fresh_velocity(cfg, 5);
  Rng rng(1);
  TrainResult res = train_velocity(model, cfg, rng);
  CHECK(res.diverged);
  CHECK(res.steps_done < 50);
  CHECK(res.divergence_note.find("rolled back") != std::string::npos);
  CHECK(model.mlp.params_finite());
}

TEST_CASE("distillation reads but never writes the teacher") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.steps = 25;
  VelocityModel teacher = fresh_velocity(cfg, 2);
  Vec teacher_before = teacher.mlp.flatten();
  FlowMapModel student = fresh_flow_map(cfg, 3);
  Vec student_before = student.mlp.flatten();

  Teachers teachers;
  teachers.velocity = &teacher;
  Rng rng(4);
  TrainResult res = train_flow_map(student, LossKind::lmd, teachers, cfg, rng);
  CHECK(res.steps_done == 25);
  CHECK((teacher.mlp.flatten() - teacher_before).cwiseAbs().maxCoeff() == 0.0);
  CHECK((student.mlp.flatten() - student_before).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("flow map trainer rejects mismatched loss wiring") {
  ExperimentConfig cfg = small_gaussian_cfg();
  cfg.steps = 1;
  FlowMapModel student = fresh_flow_map(cfg, 3);
  Rng rng(4);
  Teachers none;
  CHECK_THROWS_AS(train_flow_map(student, LossKind::lmd, none, cfg, rng),
                  ConfigError);
  CHECK_THROWS_AS(train_flow_map(student, LossKind::pfmm, none, cfg, rng),
                  ConfigError);
  CHECK_THROWS_AS(train_flow_map(student, LossKind::velocity, none, cfg, rng),
                  ConfigError);

  VelocityModel vel = fresh_velocity(cfg, 2);
  cfg.loss = "lmd";  // train_velocity only accepts the matching objective
  CHECK_THROWS_AS(train_velocity(vel, cfg, rng), ConfigError);

  // fmm couples the map with its inverse, so one-sided time laws are out.
  cfg.weight = "forward-only";
  CHECK_THROWS_AS(train_flow_map(student, LossKind::fmm, none, cfg, rng),
                  ConfigError);
}

TEST_CASE("training curves serialize with full precision") {
  std::vector<TrainLogEntry> curve = {{1, 0.5, 0.25}, {100, 2.0, 0.125}};
  std::ostringstream os;
  write_curve_csv(os, curve);
  CHECK(os.str() == "step,loss,lr\n1,0.5,0.25\n100,2,0.125\n");
}

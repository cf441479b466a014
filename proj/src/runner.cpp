#include "flowmap/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "flowmap/checkpoint.hpp"
#include "flowmap/integrate.hpp"
#include "flowmap/metrics.hpp"
#include "flowmap/objectives.hpp"
#include "flowmap/sampler.hpp"
#include "flowmap/scatter_png.hpp"
#include "flowmap/train.hpp"

namespace flowmap {

namespace fs = std::filesystem;

namespace {

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ExperimentConfig load_run_config(const RunOptions& opt) {
  if (opt.config_path.empty()) throw UsageError("--config is required");
  ExperimentConfig cfg = load_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (opt.paper_scale) cfg.apply_paper_scale();
  if (!opt.out_override.empty()) cfg.out = opt.out_override;
  if (opt.deterministic) setenv("FLOWMAP_THREADS", "1", 1);
  cfg.validate();
  return cfg;
}

RunContext::RunContext(ExperimentConfig cfg, std::string kind)
    : cfg_(std::move(cfg)),
      kind_(std::move(kind)),
      dir_(cfg_.out),
      hash_(config_hash(cfg_)),
      seed_(cfg_.seed),
      rng_(cfg_.seed),
      start_(std::chrono::system_clock::now()) {
  fs::path p(dir_);
  if (fs::exists(p)) {
    if (!fs::is_directory(p))
      throw ConfigError("output path '" + dir_ + "' is not a directory");
    if (!fs::is_empty(p))
      throw ConfigError("output directory '" + dir_ +
                        "' is not empty; every run gets a fresh directory "
                        "so the manifest can account for all files");
  } else {
    fs::create_directories(p);
  }
  // The run's own record of its effective settings.
  write_text("config.cfg", serialize_config(cfg_));
}

std::string RunContext::emit(const std::string& name) {
  if (finished_) throw ConfigError("run already finished; cannot emit files");
  if (name.empty() || name.find('/') != std::string::npos)
    throw ConfigError("emitted names must be flat file names");
  if (std::find(files_.begin(), files_.end(), name) == files_.end())
    files_.push_back(name);
  return (fs::path(dir_) / name).string();
}

void RunContext::write_text(const std::string& name,
                            const std::string& content) {
  std::ofstream os(emit(name), std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + name + "' in " + dir_);
  os << content;
}

void RunContext::metric(const std::string& key, double value) {
  metrics_[key] = value;
}

void RunContext::finish() {
  if (finished_) return;
  nlohmann::json j;
  j["kind"] = kind_;
  j["version"] = kVersion;
  j["config_hash"] = hash_;
  j["seed"] = seed_;
  j["started"] = iso_utc(start_);
  j["finished"] = iso_utc(std::chrono::system_clock::now());
  std::vector<std::string> files = files_;
  files.push_back("manifest.json");
  std::sort(files.begin(), files.end());
  j["files"] = files;
  j["metrics"] = metrics_;
  std::ofstream os(fs::path(dir_) / "manifest.json");
  if (!os) throw ConfigError("cannot write manifest in " + dir_);
  os << j.dump(2) << '\n';
  finished_ = true;
}

namespace {

constexpr Eigen::Index kGenChunk = 32768;  // caps activation memory

// Uniform label mix for unconditional generation from a conditional model.
void generate_map_samples(const FlowMapModel& model, const TimeGrid& grid,
                          Eigen::Index n, Rng& rng, Mat& out, IVec& labels,
                          long* evals = nullptr) {
  StandardNormal base(model.d);
  if (model.num_classes == 0) {
    NeuralFlowMap map(&model);
    out.resize(n, model.d);
    labels.resize(0);
    for (Eigen::Index at = 0; at < n; at += kGenChunk) {
      Eigen::Index take = std::min(kGenChunk, n - at);
      out.middleRows(at, take) =
          map_sample(map, base.draw(rng, take), grid, evals);
    }
    return;
  }
  out.resize(n, model.d);
  labels.resize(n);
  Eigen::Index done = 0;
  for (int c = 0; c < model.num_classes; ++c) {
    Eigen::Index want = c + 1 == model.num_classes ? n - done
                                                   : n / model.num_classes;
    NeuralFlowMap map(&model, c);
    labels.segment(done, want).setConstant(c);
    while (want > 0) {
      Eigen::Index take = std::min(kGenChunk, want);
      out.middleRows(done, take) =
          map_sample(map, base.draw(rng, take), grid, evals);
      done += take;
      want -= take;
    }
  }
}

void generate_ode_samples(const VelocityModel& model, const TimeGrid& grid,
                          OdeMethod method, Eigen::Index n, Rng& rng, Mat& out,
                          IVec& labels) {
  StandardNormal base(model.d);
  out.resize(n, model.d);
  if (model.num_classes == 0) {
    NeuralVelocity b(&model);
    labels.resize(0);
    for (Eigen::Index at = 0; at < n; at += kGenChunk) {
      Eigen::Index take = std::min(kGenChunk, n - at);
      out.middleRows(at, take) =
          integrate_over_grid(b, base.draw(rng, take), grid, method);
    }
    return;
  }
  labels.resize(n);
  Eigen::Index done = 0;
  for (int c = 0; c < model.num_classes; ++c) {
    Eigen::Index want = c + 1 == model.num_classes ? n - done
                                                   : n / model.num_classes;
    NeuralVelocity b(&model, c);
    labels.segment(done, want).setConstant(c);
    while (want > 0) {
      Eigen::Index take = std::min(kGenChunk, want);
      out.middleRows(done, take) =
          integrate_over_grid(b, base.draw(rng, take), grid, method);
      done += take;
      want -= take;
    }
  }
}

Mat draw_target(const Coupling& coupling, Eigen::Index n, Rng& rng,
                IVec* labels = nullptr) {
  Mat x0(n, coupling.dim()), x1(n, coupling.dim());
  coupling.draw(rng, n, x0, x1, labels);
  return x1;
}

Mat draw_class_target(const Coupling& coupling, int label, Eigen::Index n,
                      Rng& rng) {
  Mat out(n, coupling.dim());
  Eigen::Index got = 0;
  while (got < n) {
    Eigen::Index chunk = std::max<Eigen::Index>(n - got, 512);
    Mat x0(chunk, coupling.dim()), x1(chunk, coupling.dim());
    IVec lab(chunk);
    coupling.draw(rng, chunk, x0, x1, &lab);
    for (Eigen::Index i = 0; i < chunk && got < n; ++i)
      if (lab(i) == label) out.row(got++) = x1.row(i);
  }
  return out;
}

void emit_samples(RunContext& ctx, const std::string& stem,
                  SampleMethod method, int nsteps, const Mat& pts,
                  const IVec* labels) {
  Eigen::Index keep = std::min<Eigen::Index>(pts.rows(), ctx.cfg().sample_rows);
  Mat head = pts.topRows(keep);
  IVec lab_head;
  const IVec* lab = nullptr;
  if (labels && labels->size() == pts.rows()) {
    lab_head = labels->head(keep);
    lab = &lab_head;
  }
  std::ostringstream csv;
  write_points_csv(csv, stem, method, nsteps, head, lab);
  ctx.write_text(stem + ".csv", csv.str());
  write_scatter_png(ctx.emit(stem + ".png"), head, lab);
}

MetricReport eval_cloud(RunContext& ctx, const std::string& method,
                        int map_evals, const Mat& target, const Mat& model_pts,
                        Rng& rng) {
  const ExperimentConfig& cfg = ctx.cfg();
  MetricReport rep;
  rep.method = method;
  rep.n_target = target.rows();
  rep.n_model = model_pts.rows();
  rep.seed = ctx.seed();
  rep.map_evals = map_evals;
  rep.kl = kl_histogram(target, model_pts, HistogramGrid::planar_default());
  W2Estimate w2 =
      w2_assignment(target, model_pts, cfg.w2_points, cfg.w2_repeats, rng);
  rep.w2sq = w2.mean;
  rep.w2_se = w2.se;
  return rep;
}

// Shared tail of the training commands: curve, checkpoint, manifest.
int finish_training(RunContext& ctx, const TrainResult& result,
                    const Checkpoint& ck, const std::string& ck_name) {
  std::ostringstream curve;
  write_curve_csv(curve, result.curve);
  ctx.write_text("loss-curve.csv", curve.str());
  save_checkpoint(ctx.emit(ck_name), ck);
  ctx.metric("steps_done", static_cast<double>(result.steps_done));
  if (!result.curve.empty()) ctx.metric("final_loss", result.curve.back().loss);
  ctx.metric("diverged", result.diverged ? 1.0 : 0.0);
  ctx.finish();
  if (result.diverged) {
    std::cerr << "training diverged: " << result.divergence_note
              << "; last-good checkpoint saved to " << ctx.dir() << "/"
              << ck_name << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int cmd_train_velocity(const RunOptions& opt) {
  ExperimentConfig cfg = load_run_config(opt);
  if (loss_kind_from_string(cfg.loss) != LossKind::velocity)
    throw ConfigError("train-velocity requires train.loss = velocity");
  RunContext ctx(cfg, "train-velocity");
  Rng& rng = ctx.rng();
  VelocityModel model = VelocityModel::init(
      cfg.task_dim(), cfg.hidden, activation_from_string(cfg.activation),
      make_embed(cfg), cfg.task_classes(), rng);
  AdamState adam = AdamState::init(model.mlp.param_count());
  TrainResult result = train_velocity(model, ctx.cfg(), rng, &adam);
  return finish_training(ctx, result, snapshot(model, &adam),
                         "velocity.ckpt");
}

namespace {

int train_map_command(const RunOptions& opt, const std::string& kind_name,
                      LossKind kind) {
  ExperimentConfig cfg = load_run_config(opt);
  RunContext ctx(cfg, kind_name);
  Rng& rng = ctx.rng();

  Teachers teachers;
  VelocityModel teacher_velocity;
  FlowMapModel teacher_map;
  if (kind == LossKind::lmd || kind == LossKind::emd) {
    if (cfg.teacher.empty())
      throw ConfigError(to_string(kind) +
                        " distillation needs train.teacher (velocity "
                        "checkpoint)");
    teacher_velocity = restore_velocity(load_checkpoint(cfg.teacher));
    if (teacher_velocity.d != cfg.task_dim() ||
        teacher_velocity.num_classes != cfg.task_classes())
      throw ConfigError("teacher checkpoint does not fit the task");
    teachers.velocity = &teacher_velocity;
  }
  if (kind == LossKind::pfmm) {
    if (cfg.teacher.empty())
      throw ConfigError("pfmm needs train.teacher (flow-map checkpoint)");
    teacher_map = restore_flow_map(load_checkpoint(cfg.teacher));
    if (teacher_map.d != cfg.task_dim() ||
        teacher_map.num_classes != cfg.task_classes())
      throw ConfigError("teacher checkpoint does not fit the task");
    teachers.flow_map = &teacher_map;
  }

  FlowMapModel student = FlowMapModel::init(
      cfg.task_dim(), cfg.hidden, activation_from_string(cfg.activation),
      make_embed(cfg), cfg.task_classes(), rng);
  if (kind == LossKind::pfmm && cfg.pfmm_warm_start) {
    if (teacher_map.mlp.widths() != student.mlp.widths() ||
        teacher_map.emb.freqs != student.emb.freqs ||
        teacher_map.mlp.act != student.mlp.act)
      throw ConfigError(
          "pfmm warm start requested but teacher and student shapes differ");
    student.mlp.unflatten(teacher_map.mlp.flatten());
  }

  AdamState adam = AdamState::init(student.mlp.param_count());
  TrainResult result = train_flow_map(student, kind, teachers, ctx.cfg(), rng,
                                      &adam);
  return finish_training(ctx, result, snapshot(student, &adam),
                         "flow-map.ckpt");
}

}  // namespace

int cmd_distill(const RunOptions& opt, std::string mode) {
  ExperimentConfig cfg = load_run_config(opt);
  if (mode.empty()) mode = cfg.loss;
  LossKind kind = loss_kind_from_string(mode);
  if (kind != LossKind::lmd && kind != LossKind::emd && kind != LossKind::pfmm)
    throw ConfigError("distill mode must be lmd, emd, or pfmm");
  if (cfg.loss != mode)
    throw ConfigError("config train.loss = " + cfg.loss +
                      " disagrees with --mode " + mode);
  return train_map_command(opt, "distill-" + mode, kind);
}

int cmd_train_fmm(const RunOptions& opt) {
  ExperimentConfig cfg = load_run_config(opt);
  LossKind kind = loss_kind_from_string(cfg.loss);
  if (kind != LossKind::fmm && kind != LossKind::ee &&
      kind != LossKind::denoiser)
    throw ConfigError(
        "train-fmm covers the direct map losses (fmm, ee, denoiser); use "
        "distill for teacher-based losses");
  return train_map_command(opt, "train-" + cfg.loss, kind);
}

namespace {

std::function<Mat(const Mat&)> teacher_pushforward(const VelocityModel& m) {
  // RK4 at 200 steps sits far below model error for the smooth fields
  // trained here; the nsteps=1000 tier is reserved for closed-form drifts.
  return [&m](const Mat& x0) {
    if (m.num_classes != 0)
      throw ConfigError("teacher comparison needs an unconditional teacher");
    NeuralVelocity b(&m);
    return teacher_flowmap_numeric(b, 0.0, 1.0, x0, 200);
  };
}

void evaluate_flow_map(RunContext& ctx, const FlowMapModel& model,
                       const Mat& target, std::vector<MetricReport>& rows) {
  const ExperimentConfig& cfg = ctx.cfg();
  Rng& rng = ctx.rng();

  VelocityModel teacher;
  bool has_teacher = !cfg.teacher.empty();
  if (has_teacher) {
    Checkpoint tc = load_checkpoint(cfg.teacher);
    if (tc.kind != ModelKind::velocity)
      throw ConfigError("eval.teacher comparisons need a velocity checkpoint");
    teacher = restore_velocity(tc);
  }

  for (int nsteps : cfg.map_steps) {
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, nsteps);
    Mat pts;
    IVec labels;
    generate_map_samples(model, grid, cfg.kl_samples, rng, pts, labels);
    std::string stem = "samples-map-" + std::to_string(nsteps);
    MetricReport rep = eval_cloud(ctx, "map-" + std::to_string(nsteps),
                                  nsteps, target, pts, rng);
    if (has_teacher && model.num_classes == 0) {
      StandardNormal base(model.d);
      Mat x0 = base.draw(rng, cfg.w2_points);
      NeuralFlowMap map(&model);
      Mat via_student = map_sample(map, x0, grid);
      Mat via_teacher = teacher_pushforward(teacher)(x0);
      rep.teacher_gap =
          (via_student - via_teacher).rowwise().squaredNorm().mean();
    }
    rep.validate();
    rows.push_back(rep);
    emit_samples(ctx, stem,
                 nsteps == 1 ? SampleMethod::map_onestep
                             : SampleMethod::map_multistep,
                 nsteps, pts, labels.size() ? &labels : nullptr);
  }

  if (has_teacher && model.num_classes == 0) {
    StandardNormal base(model.d);
    Mat x0 = base.draw(rng, cfg.w2_points);
    NeuralFlowMap map(&model);
    MismatchReport mm = mismatch_report(map, teacher_pushforward(teacher), x0);
    std::ostringstream csv;
    csv << "x0_0,x0_1,teacher_0,teacher_1,student_0,student_1,sq_deviation,"
           "flagged\n";
    csv.precision(17);
    for (Eigen::Index i = 0; i < mm.x0.rows(); ++i) {
      csv << mm.x0(i, 0) << ',' << mm.x0(i, 1) << ',' << mm.teacher_out(i, 0)
          << ',' << mm.teacher_out(i, 1) << ',' << mm.student_out(i, 0) << ','
          << mm.student_out(i, 1) << ',' << mm.sq_deviation(i) << ','
          << (mm.flagged[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
    ctx.write_text("mismatch.csv", csv.str());
    IVec flags(mm.x0.rows());
    for (Eigen::Index i = 0; i < flags.size(); ++i)
      flags(i) = mm.flagged[static_cast<std::size_t>(i)] ? 1 : 0;
    write_scatter_png(ctx.emit("mismatch.png"), mm.student_out, &flags);
    ctx.metric("mismatch_flagged_fraction", mm.flagged_fraction);
  }
}

void evaluate_velocity(RunContext& ctx, const VelocityModel& model,
                       const Mat& target, std::vector<MetricReport>& rows) {
  const ExperimentConfig& cfg = ctx.cfg();
  OdeMethod method = ode_method_from_string(cfg.ode_method);
  TimeGrid grid = TimeGrid::uniform(0.0, 1.0, cfg.ode_steps);
  Mat pts;
  IVec labels;
  generate_ode_samples(model, grid, method, cfg.kl_samples, ctx.rng(), pts,
                       labels);
  std::string tag = "ode-" + cfg.ode_method + "-" +
                    std::to_string(cfg.ode_steps);
  int evals_per_step = method == OdeMethod::heun ? 2 : 4;
  MetricReport rep = eval_cloud(ctx, tag, evals_per_step * cfg.ode_steps,
                                target, pts, ctx.rng());
  rep.validate();
  rows.push_back(rep);
  emit_samples(ctx, "samples-" + tag,
               method == OdeMethod::heun ? SampleMethod::ode_heun
                                         : SampleMethod::ode_rk4,
               cfg.ode_steps, pts, labels.size() ? &labels : nullptr);
}

}  // namespace

int cmd_evaluate(const RunOptions& opt, const std::string& checkpoint) {
  ExperimentConfig cfg = load_run_config(opt);
  RunContext ctx(cfg, "evaluate");
  Checkpoint ck = load_checkpoint(checkpoint);
  Coupling coupling = make_coupling(cfg);
  if (ck.dim != cfg.task_dim())
    throw ConfigError("checkpoint dimension does not match the task");

  Mat target = draw_target(coupling, cfg.kl_samples, ctx.rng());
  std::vector<MetricReport> rows;
  if (ck.kind == ModelKind::flow_map) {
    FlowMapModel model = restore_flow_map(ck);
    if (model.num_classes != cfg.task_classes())
      throw ConfigError("checkpoint label count does not match the task");
    evaluate_flow_map(ctx, model, target, rows);
  } else {
    VelocityModel model = restore_velocity(ck);
    if (model.num_classes != cfg.task_classes())
      throw ConfigError("checkpoint label count does not match the task");
    evaluate_velocity(ctx, model, target, rows);
  }

  std::ostringstream csv;
  csv << MetricReport::csv_header() << '\n';
  for (const auto& r : rows) csv << r.csv_row() << '\n';
  ctx.write_text("metrics.csv", csv.str());
  for (const auto& r : rows) {
    ctx.metric("kl." + r.method, r.kl);
    ctx.metric("w2sq." + r.method, r.w2sq);
    if (std::isfinite(r.teacher_gap))
      ctx.metric("teacher_gap." + r.method, r.teacher_gap);
  }
  ctx.finish();
  return 0;
}

int cmd_sample(const RunOptions& opt, const std::string& checkpoint) {
  ExperimentConfig cfg = load_run_config(opt);
  RunContext ctx(cfg, "sample");
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.dim != cfg.task_dim())
    throw ConfigError("checkpoint dimension does not match the task");
  Eigen::Index n = cfg.sample_rows;
  if (ck.kind == ModelKind::flow_map) {
    FlowMapModel model = restore_flow_map(ck);
    for (int nsteps : cfg.map_steps) {
      TimeGrid grid = TimeGrid::uniform(0.0, 1.0, nsteps);
      Mat pts;
      IVec labels;
      long evals = 0;
      generate_map_samples(model, grid, n, ctx.rng(), pts, labels, &evals);
      emit_samples(ctx, "samples-map-" + std::to_string(nsteps),
                   nsteps == 1 ? SampleMethod::map_onestep
                               : SampleMethod::map_multistep,
                   nsteps, pts, labels.size() ? &labels : nullptr);
      ctx.metric("map_eval_calls.map-" + std::to_string(nsteps),
                 static_cast<double>(evals));
    }
  } else {
    VelocityModel model = restore_velocity(ck);
    OdeMethod method = ode_method_from_string(cfg.ode_method);
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, cfg.ode_steps);
    Mat pts;
    IVec labels;
    generate_ode_samples(model, grid, method, n, ctx.rng(), pts, labels);
    emit_samples(ctx,
                 "samples-ode-" + cfg.ode_method + "-" +
                     std::to_string(cfg.ode_steps),
                 method == OdeMethod::heun ? SampleMethod::ode_heun
                                           : SampleMethod::ode_rk4,
                 cfg.ode_steps, pts, labels.size() ? &labels : nullptr);
  }
  ctx.finish();
  return 0;
}

int cmd_style_transfer(const RunOptions& opt, const std::string& checkpoint,
                       double s_prime, int label_from, int label_to) {
  ExperimentConfig cfg = load_run_config(opt);
  RunContext ctx(cfg, "style-transfer");
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.kind != ModelKind::flow_map || ck.num_classes < 2)
    throw UsageError(
        "style transfer needs a label-conditional flow-map checkpoint");
  FlowMapModel model = restore_flow_map(ck);
  if (model.d != cfg.task_dim() || model.num_classes != cfg.task_classes())
    throw ConfigError("checkpoint does not match the configured task");
  if (label_from < 0 || label_from >= model.num_classes || label_to < 0 ||
      label_to >= model.num_classes)
    throw UsageError("labels must lie in [0, classes)");
  RestyleOptions ro;
  ro.s_prime = s_prime > 0.0 ? s_prime : cfg.restyle_pivot;
  ro.leg_steps = cfg.restyle_leg_steps;

  Coupling coupling = make_coupling(cfg);
  Eigen::Index n = cfg.sample_rows;
  Mat before = draw_class_target(coupling, label_from, n, ctx.rng());
  NeuralFlowMap back(&model, label_from), fwd(&model, label_to);
  long evals = 0;
  Mat after = invert_and_restyle(back, fwd, before, ro, &evals);

  IVec lab_before = IVec::Constant(n, label_from);
  IVec lab_after = IVec::Constant(n, label_to);
  emit_samples(ctx, "before", SampleMethod::map_multistep, ro.leg_steps,
               before, &lab_before);
  emit_samples(ctx, "after", SampleMethod::map_multistep, ro.leg_steps, after,
               &lab_after);

  ctx.metric("evals_per_point", static_cast<double>(evals));
  if (cfg.task == "checkerboard-2class") {
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < after.rows(); ++i)
      if (Checkerboard::contains(after(i, 0), after(i, 1), label_to))
        ++inside;
    ctx.metric("target_support_fraction",
               static_cast<double>(inside) / after.rows());
  }
  if (label_from == label_to) {
    Vec err = (after - before).rowwise().norm();
    std::vector<double> e(err.data(), err.data() + err.size());
    std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
    ctx.metric("cycle_median_error", e[e.size() / 2]);
  }
  ctx.finish();
  return 0;
}

std::string format_check(const CheckResult& c) {
  std::ostringstream os;
  os << (c.ok ? "ok   " : "FAIL ") << c.name << "  measured=" << c.measured
     << " threshold=" << c.threshold;
  if (!c.note.empty()) os << "  (" << c.note << ")";
  return os.str();
}

DenoiserCollapse train_denoiser_collapse(const GaussianTask& task,
                                         long long steps, int batch, Rng& rng,
                                         FlowMapModel* out_model) {
  ExperimentConfig cfg;
  cfg.task = "gaussian";
  cfg.gaussian_mean.assign(task.m.data(), task.m.data() + task.m.size());
  cfg.gaussian_sigma.assign(task.sigma.data(),
                            task.sigma.data() + task.sigma.size());
  cfg.loss = "denoiser";
  cfg.steps = steps;
  cfg.batch = batch;
  // The target E[I_t | I_s] is nearly affine in x, so a small network with a
  // long annealed run gets much closer to it than the default budget would.
  cfg.hidden = {64, 64};
  cfg.weight = "forward-only";
  cfg.adam.lr_decay = 0.95;
  cfg.adam.decay_interval = 1000;
  cfg.validate();

  FlowMapModel model = FlowMapModel::init(
      task.dim(), cfg.hidden, activation_from_string(cfg.activation),
      make_embed(cfg), 0, rng);
  TrainResult result = train_flow_map(model, LossKind::denoiser, {}, cfg, rng);

  DenoiserCollapse out;
  out.diverged = result.diverged;
  Mat x0 = rng.normal_mat(1000, task.dim());
  NeuralFlowMap map(&model);
  Mat y = map.value(Vec::Zero(1000), Vec::Ones(1000), x0);
  Vec mean = y.colwise().mean();
  Vec sd = ((y.rowwise() - mean.transpose()).array().square().colwise().sum() /
            (y.rows() - 1))
               .sqrt()
               .matrix();
  out.std_ratio = (sd.array() / task.sigma.array()).maxCoeff();
  out.mean_gap = (mean - task.m).norm();
  if (out_model) *out_model = std::move(model);
  return out;
}

namespace {

void push(std::vector<CheckResult>& out, std::ostream* log, CheckResult c) {
  c.ok = c.measured <= c.threshold;
  if (log) *log << format_check(c) << '\n';
  out.push_back(std::move(c));
}

CheckResult bound_to_check(const std::string& name, const BoundCheck& bc) {
  CheckResult c;
  c.name = name;
  double se = bc.combined_se();
  double excess = bc.lhs - bc.rhs;
  c.measured = excess <= 0.0 ? 0.0
               : se > 0.0    ? excess / se
                             : std::numeric_limits<double>::infinity();
  c.threshold = 3.0;
  std::ostringstream note;
  note << "lhs=" << bc.lhs << " rhs=" << bc.rhs << " se=" << se;
  c.note = note.str();
  return c;
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(Rng& rng, std::ostream* log,
                                          bool quick) {
  std::vector<CheckResult> out;
  GaussianTask task = GaussianTask::defaults();
  GaussianFlowMapOracle oracle(task);
  GaussianVelocityOracle velocity(task);
  Schedule schedule = task.schedule();
  Coupling coupling = task.coupling();
  TimeWeight uniform;

  {
    // Identity at equal times, semigroup, and inverse on random tuples.
    double worst_id = 0.0, worst_semi = 0.0, worst_inv = 0.0;
    for (int k = 0; k < 200; ++k) {
      double s = rng.uniform(), t = rng.uniform(), tau = rng.uniform();
      Mat x = rng.normal_mat(1, task.dim()) * 2.0;
      Vec sv = Vec::Constant(1, s), tv = Vec::Constant(1, t),
          uv = Vec::Constant(1, tau);
      worst_id = std::max(
          worst_id, (oracle.value(sv, sv, x) - x).row(0).norm());
      Mat mid = oracle.value(sv, tv, x);
      worst_semi = std::max(worst_semi, (oracle.value(tv, uv, mid) -
                                         oracle.value(sv, uv, x))
                                            .row(0)
                                            .norm());
      worst_inv = std::max(
          worst_inv, (oracle.value(tv, sv, mid) - x).row(0).norm());
    }
    push(out, log, {"map-identity-at-equal-times", false, worst_id, 1e-14});
    push(out, log, {"map-semigroup", false, worst_semi, 1e-12});
    push(out, log, {"map-inverse", false, worst_inv, 1e-12});
  }

  {
    // Closed form vs high-accuracy integration of the closed-form drift.
    double worst = 0.0;
    for (int k = 0; k < (quick ? 2 : 8); ++k) {
      double s = rng.uniform(), t = rng.uniform();
      Mat x = rng.normal_mat(4, task.dim()) * 2.0;
      Mat numeric = teacher_flowmap_numeric(velocity, s, t, x, 10000);
      Vec sv = Vec::Constant(4, s), tv = Vec::Constant(4, t);
      worst = std::max(
          worst,
          (numeric - oracle.value(sv, tv, x)).rowwise().norm().maxCoeff());
    }
    push(out, log, {"map-vs-rk4", false, worst, 1e-8});
  }

  {
    // Pushforward moments against the interpolant marginal, in SE units.
    Eigen::Index n = quick ? 20000 : 100000;
    double worst = 0.0;
    for (double t : {0.25, 0.5, 0.75, 1.0}) {
      Mat x0 = rng.normal_mat(n, task.dim());
      Vec sv = Vec::Zero(n), tv = Vec::Constant(n, t);
      Mat y = oracle.value(sv, tv, x0);
      Vec want_mean = task.mean_at(t);
      Vec want_sd = task.sigma_at(t);
      Vec mean = y.colwise().mean();
      Vec var = ((y.rowwise() - mean.transpose()).array().square()
                     .colwise()
                     .sum() /
                 (n - 1))
                    .matrix();
      for (int j = 0; j < task.dim(); ++j) {
        double se_mean = want_sd(j) / std::sqrt(double(n));
        double se_var =
            want_sd(j) * want_sd(j) * std::sqrt(2.0 / (double(n) - 1));
        worst = std::max(worst, std::abs(mean(j) - want_mean(j)) / se_mean);
        worst = std::max(
            worst, std::abs(var(j) - want_sd(j) * want_sd(j)) / se_var);
      }
    }
    push(out, log, {"pushforward-moments-se", false, worst, 3.0});
  }

  {
    // Transport identity d/ds X_{s,t}(x) = -grad X . b_s(x), with the
    // s-derivative taken by central differences.
    double worst = 0.0;
    const double h = 1e-5;
    Mat xs = rng.normal_mat(20, task.dim()) * 2.0;
    for (int a = 0; a < 20; ++a) {
      double s = 0.05 + 0.9 * a / 19.0;
      for (int b = 0; b < 20; ++b) {
        double t = 0.05 + 0.9 * b / 19.0;
        Vec sp = Vec::Constant(20, s + h), sm = Vec::Constant(20, s - h),
            tv = Vec::Constant(20, t), sv = Vec::Constant(20, s);
        Mat fd = (oracle.value(sp, tv, xs) - oracle.value(sm, tv, xs)) /
                 (2.0 * h);
        Mat drift = velocity.value(sv, xs);
        Mat res = fd + oracle.jvp(sv, tv, xs, drift);
        worst = std::max(worst, res.rowwise().norm().maxCoeff());
      }
    }
    push(out, log, {"eulerian-residual-fd", false, worst, 1e-6});
  }

  {
    // The distillation losses vanish at the exact map with the exact
    // drift; the velocity loss does not (independent coupling leaves the
    // conditional variance), so it is checked against its analytic floor
    // E|Idot - b_t(I_t)|^2 = sum_j (1 + sigma_j^2 - slope_j^2 sigma_t,j^2)
    // averaged over t.
    Eigen::Index m = quick ? 4096 : 65536;
    McEstimate lv = mc_loss(LossKind::velocity, nullptr, &velocity, nullptr,
                            nullptr, schedule, coupling, uniform, m, rng, {});
    const int nq = 1 << 12;
    double floor_integral = 0.0;
    for (int k = 0; k <= nq; ++k) {
      double t = double(k) / nq;
      Vec dst = task.dsigma_at(t);
      double f = (1.0 + task.sigma.array().square() - dst.array().square())
                     .sum();
      double w = (k == 0 || k == nq) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      floor_integral += w * f;
    }
    floor_integral /= 3.0 * nq;
    push(out, log,
         {"velocity-loss-variance-floor", false,
          std::abs(lv.mean - floor_integral), 4.0 * lv.se,
          "Monte-Carlo loss at the exact drift vs analytic floor"});

    McEstimate ll = mc_loss(LossKind::lmd, &oracle, nullptr, &velocity,
                            nullptr, schedule, coupling, uniform, 4096, rng,
                            {});
    McEstimate le = mc_loss(LossKind::emd, &oracle, nullptr, &velocity,
                            nullptr, schedule, coupling, uniform, 4096, rng,
                            {});
    push(out, log, {"zero-at-truth-lmd", false, ll.mean, 1e-10});
    push(out, log, {"zero-at-truth-emd", false, le.mean, 1e-10});
  }

  {
    BoundCheckOptions bo;
    if (quick) {
      bo.loss_samples = 20000;
      bo.w2_repeats = 4;
    }
    push(out, log,
         bound_to_check("bound-lmd-exact",
                        wasserstein_bound_check(task, oracle, BoundKind::lmd,
                                                rng, bo)));
    push(out, log,
         bound_to_check("bound-emd-exact",
                        wasserstein_bound_check(task, oracle, BoundKind::emd,
                                                rng, bo)));

    // Identity candidate on the unit-variance task: the exact lhs is the
    // squared distance between N(0, I) and N(m, I), which is |m|^2 = 1.
    GaussianTask iso = GaussianTask::isotropic((Vec(2) << 1.0, 0.0).finished());
    IdentityMap identity(2);
    BoundCheck bl =
        wasserstein_bound_check(iso, identity, BoundKind::lmd, rng, bo);
    BoundCheck be =
        wasserstein_bound_check(iso, identity, BoundKind::emd, rng, bo);
    push(out, log, bound_to_check("bound-lmd-identity", bl));
    push(out, log, bound_to_check("bound-emd-identity", be));
    push(out, log,
         {"identity-w2-closed-form", false, std::abs(bl.lhs - 1.0), 0.1,
          "assignment estimate vs |m|^2"});

    int seeds = quick ? 4 : 20;
    for (int k = 0; k < seeds; ++k) {
      double eps = 0.05 + 0.25 * rng.uniform();
      PerturbedGaussianMap perturbed(task, eps, rng);
      push(out, log,
           bound_to_check("bound-lmd-perturbed-" + std::to_string(k + 1),
                          wasserstein_bound_check(task, perturbed,
                                                  BoundKind::lmd, rng, bo)));
      push(out, log,
           bound_to_check("bound-emd-perturbed-" + std::to_string(k + 1),
                          wasserstein_bound_check(task, perturbed,
                                                  BoundKind::emd, rng, bo)));
    }
  }

  if (!quick) {
    DenoiserCollapse dc = train_denoiser_collapse(task, 100000, 256, rng);
    push(out, log,
         {"denoiser-collapse-std-ratio", false, dc.std_ratio, 0.05,
          "output std over target std at (0,1)"});
    push(out, log,
         {"denoiser-collapse-mean-gap", false, dc.mean_gap, 0.05,
          "|mean output - m|"});
    if (dc.diverged)
      push(out, log, {"denoiser-training-finished", false, 1.0, 0.0});
  }

  return out;
}

int cmd_oracle_suite(const RunOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.out_override.empty()) cfg.out = opt.out_override;
  if (opt.deterministic) setenv("FLOWMAP_THREADS", "1", 1);
  cfg.validate();

  RunContext ctx(cfg, "oracle-suite");
  Rng& rng = ctx.rng();
  std::ostringstream report;
  std::vector<CheckResult> checks = run_oracle_suite(rng, &report, false);
  std::cout << report.str();
  ctx.write_text("oracle-report.txt", report.str());
  int failures = 0;
  for (const auto& c : checks)
    if (!c.ok) ++failures;
  ctx.metric("checks", static_cast<double>(checks.size()));
  ctx.metric("failures", static_cast<double>(failures));
  ctx.finish();
  if (failures) {
    std::cerr << failures << " oracle check(s) failed\n";
    return 4;
  }
  return 0;
}

}  // namespace flowmap

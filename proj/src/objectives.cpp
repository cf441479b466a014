#include "flowmap/objectives.hpp"

#include <cmath>

#include "flowmap/test_hooks.hpp"

namespace flowmap {

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "velocity") return LossKind::velocity;
  if (name == "lmd") return LossKind::lmd;
  if (name == "emd") return LossKind::emd;
  if (name == "fmm") return LossKind::fmm;
  if (name == "pfmm") return LossKind::pfmm;
  if (name == "ee") return LossKind::ee;
  if (name == "denoiser") return LossKind::denoiser;
  throw ConfigError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::velocity: return "velocity";
    case LossKind::lmd: return "lmd";
    case LossKind::emd: return "emd";
    case LossKind::fmm: return "fmm";
    case LossKind::pfmm: return "pfmm";
    case LossKind::ee: return "ee";
    case LossKind::denoiser: return "denoiser";
  }
  return "?";
}

void validate_loss_spec(LossKind kind, const TimeWeight& weight,
                        const LossOptions& opt) {
  if (kind == LossKind::fmm && !weight.symmetric())
    throw ConfigError(
        "fmm trains the map and its inverse jointly and requires a "
        "symmetric time weight; got " + weight.str());
  if (kind == LossKind::pfmm && opt.pfmm_K < 2)
    throw ConfigError("pfmm needs K >= 2 grid points");
}

namespace {

const IVec* batch_labels(int num_classes, const DrawBatch& batch) {
  if (num_classes == 0) return nullptr;
  if (batch.labels.size() != batch.rows())
    throw ConfigError("conditional model requires labeled draws");
  return &batch.labels;
}

// t-derivative of the map at (s,t,x): exact tangent by default, central
// finite difference of the primal when the debug fallback is on. In
// fallback mode the returned pair is (X at (s,t), FD estimate).
std::pair<ad::Node*, ad::Node*> flow_map_with_dt(ad::Tape& tape,
                                                 FlowMapModel& m, const Vec& s,
                                                 const Vec& t, ad::Node* x,
                                                 const IVec* labels,
                                                 const LossOptions& opt) {
  if (!opt.fd_time_fallback) {
    ad::Node* X = flow_map_taped(tape, m, s, t, x, labels, 0.0, 1.0);
    return {X, tape.tangent_of(X)};
  }
  Vec tp = (t.array() + opt.fd_h).min(1.0).matrix();
  Vec tm = (t.array() - opt.fd_h).max(0.0).matrix();
  ad::Node* X = flow_map_taped(tape, m, s, t, x, labels, 0.0, 0.0);
  ad::Node* Xp = flow_map_taped(tape, m, s, tp, x, labels, 0.0, 0.0);
  ad::Node* Xm = flow_map_taped(tape, m, s, tm, x, labels, 0.0, 0.0);
  Vec inv = (tp - tm).cwiseInverse();
  return {X, tape.row_scale(tape.sub(Xp, Xm), std::move(inv))};
}

// Per-row intermediate time s + frac (t - s), clamped against roundoff.
Vec blend_time(const Vec& s, const Vec& t, double frac) {
  return (s.array() + frac * (t - s).array()).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

ad::Node* loss_velocity_graph(ad::Tape& tape, VelocityModel& model,
                              const DrawBatch& batch) {
  const IVec* labels = batch_labels(model.num_classes, batch);
  ad::Node* b = velocity_taped(tape, model, batch.t,
                               tape.constant(batch.I), labels);
  return tape.mean_sq_norm(tape.sub(b, tape.constant(batch.Idot)));
}

ad::Node* loss_lmd_graph(ad::Tape& tape, FlowMapModel& student,
                         VelocityModel& teacher, const DrawBatch& batch,
                         const Schedule& schedule, const LossOptions& opt) {
  const IVec* labels = batch_labels(student.num_classes, batch);
  Mat Is, Isdot;
  eval_at(batch, schedule, batch.s, Is, Isdot);
  auto [X, dt] = flow_map_with_dt(tape, student, batch.s, batch.t,
                                  tape.constant(std::move(Is)), labels, opt);
  // The teacher is evaluated at the student output: its parameters stay
  // frozen, but the loss gradient flows through its input.
  ad::Node* b = velocity_taped(tape, teacher, batch.t, tape.value_of(X),
                               batch_labels(teacher.num_classes, batch));
  return tape.mean_sq_norm(tape.sub(dt, b));
}

ad::Node* loss_emd_graph(ad::Tape& tape, FlowMapModel& student,
                         const VelocityModel& teacher, const DrawBatch& batch,
                         const Schedule& schedule, const LossOptions& opt) {
  (void)opt;
  const IVec* labels = batch_labels(student.num_classes, batch);
  Mat Is, Isdot;
  eval_at(batch, schedule, batch.s, Is, Isdot);
  // b_s(I_s) enters only as the JVP direction at a constant input: no
  // gradient path touches the teacher, so evaluate it off-tape.
  Mat dir = velocity_value(teacher, batch.s, Is,
                           batch_labels(teacher.num_classes, batch));
  ad::Node* A = flow_map_taped(tape, student, batch.s, batch.t,
                               tape.constant(Is), labels, 1.0, 0.0);
  ad::Node* B = flow_map_taped(
      tape, student, batch.s, batch.t,
      tape.constant_dual(std::move(Is), std::move(dir)), labels, 0.0, 0.0);
  return tape.mean_sq_norm(
      tape.add(tape.tangent_of(A), tape.tangent_of(B)));
}

ad::Node* loss_fmm_graph(ad::Tape& tape, FlowMapModel& model,
                         const DrawBatch& batch, const LossOptions& opt) {
  const IVec* labels = batch_labels(model.num_classes, batch);
  // Inverse-direction inner map X_{t,s}(I_t), then forward outer map. The
  // t-derivative is the partial in the outer second time (inner point
  // held fixed: the inner pass carries no time seed), while reverse
  // accumulation reaches both passes.
  ad::Node* inner = flow_map_taped(tape, model, batch.t, batch.s,
                                   tape.constant(batch.I), labels, 0.0, 0.0);
  auto [outer, dt] = flow_map_with_dt(tape, model, batch.s, batch.t, inner,
                                      labels, opt);
  ad::Node* r1 = tape.sub(dt, tape.constant(batch.Idot));
  ad::Node* r2 = tape.sub(tape.value_of(outer), tape.constant(batch.I));
  return tape.add(tape.mean_sq_norm(r1),
                  tape.scale(tape.mean_sq_norm(r2), opt.fmm_lambda));
}

ad::Node* loss_pfmm_graph(ad::Tape& tape, FlowMapModel& student,
                          const FlowMapModel& teacher, const DrawBatch& batch,
                          const Schedule& schedule, const LossOptions& opt) {
  if (opt.pfmm_K < 2) throw ConfigError("pfmm needs K >= 2 grid points");
  const IVec* labels = batch_labels(student.num_classes, batch);
  const IVec* tlabels = batch_labels(teacher.num_classes, batch);
  Mat Is, Isdot;
  eval_at(batch, schedule, batch.s, Is, Isdot);
  // Teacher composition over the K-point grid, entirely off-tape: the
  // target is a constant to the student's graph.
  Mat y = Is;
  int hops = opt.pfmm_K - 1;
  for (int k = 0; k < hops; ++k) {
    Vec ta = blend_time(batch.s, batch.t, static_cast<double>(k) / hops);
    Vec tb = blend_time(batch.s, batch.t, static_cast<double>(k + 1) / hops);
    y = flow_map_value(teacher, ta, tb, y, tlabels);
  }
  ad::Node* X = flow_map_taped(tape, student, batch.s, batch.t,
                               tape.constant(std::move(Is)), labels, 0.0, 0.0);
  return tape.mean_sq_norm(tape.sub(X, tape.constant(std::move(y))));
}

ad::Node* loss_ee_graph(ad::Tape& tape, FlowMapModel& model,
                        const DrawBatch& batch, const Schedule& schedule,
                        const LossOptions& opt) {
  (void)opt;
  const IVec* labels = batch_labels(model.num_classes, batch);
  Mat Is, Isdot;
  eval_at(batch, schedule, batch.s, Is, Isdot);
  ad::Node* A = flow_map_taped(tape, model, batch.s, batch.t,
                               tape.constant(Is), labels, 1.0, 0.0);
  ad::Node* B = flow_map_taped(
      tape, model, batch.s, batch.t,
      tape.constant_dual(std::move(Is), std::move(Isdot)), labels, 0.0, 0.0);
  // Fixed-point residual of the Eulerian equation with the sample velocity
  // Idot_s in place of b_s; the JVP branch is behind the barrier, so only
  // the d/ds branch drives parameters.
  ad::Node* r = tape.add(tape.tangent_of(A),
                         tape.stop_grad(tape.tangent_of(B)));
  return tape.mean_sq_norm(r);
}

ad::Node* loss_denoiser_graph(ad::Tape& tape, FlowMapModel& model,
                              const DrawBatch& batch, const Schedule& schedule,
                              const LossOptions& opt) {
  const IVec* labels = batch_labels(model.num_classes, batch);
  Mat Is, Isdot;
  eval_at(batch, schedule, batch.s, Is, Isdot);
  auto [X, dt] = flow_map_with_dt(tape, model, batch.s, batch.t,
                                  tape.constant(std::move(Is)), labels, opt);
  (void)X;
  // Matches the t-derivative launched from I_s against the sample velocity
  // at t: the regression target is E[Idot_t | I_s], so the minimizer is
  // the conditional-mean map, not the flow map. Kept as a demonstrator.
  return tape.mean_sq_norm(tape.sub(dt, tape.constant(batch.Idot)));
}

namespace {

Vec rows_sq(const Mat& r) { return r.rowwise().squaredNorm(); }

void path_at_s(const DrawBatch& batch, const Schedule& schedule, Mat& Is,
               Mat& Isdot) {
  eval_at(batch, schedule, batch.s, Is, Isdot);
}

}  // namespace

Vec velocity_loss_sq(const VelocityField& bhat, const DrawBatch& batch) {
  return rows_sq(bhat.value(batch.t, batch.I) - batch.Idot);
}

Vec lmd_loss_sq(const TwoTimeMap& map, const VelocityField& b,
                const DrawBatch& batch, const Schedule& schedule) {
  Mat Is, Isdot;
  path_at_s(batch, schedule, Is, Isdot);
  Mat X = map.value(batch.s, batch.t, Is);
  Mat dt = map.dt(batch.s, batch.t, Is);
  return rows_sq(dt - b.value(batch.t, X));
}

Vec emd_loss_sq(const TwoTimeMap& map, const VelocityField& b,
                const DrawBatch& batch, const Schedule& schedule) {
  Mat Is, Isdot;
  path_at_s(batch, schedule, Is, Isdot);
  Mat dir = b.value(batch.s, Is);
  if (test_hooks::emd_flip_jvp_sign) dir = -dir;
  Mat ds = map.ds(batch.s, batch.t, Is);
  Mat jvp = map.jvp(batch.s, batch.t, Is, dir);
  return rows_sq(ds + jvp);
}

Vec fmm_loss_sq(const TwoTimeMap& map, const DrawBatch& batch, double lambda) {
  Mat y = map.value(batch.t, batch.s, batch.I);
  Mat dt = map.dt(batch.s, batch.t, y);
  Mat X = map.value(batch.s, batch.t, y);
  return rows_sq(dt - batch.Idot) + lambda * rows_sq(X - batch.I);
}

// Here batch.I must hold the launch point I_s (mc_loss rewrites it; the
// other residuals read I_t as drawn).
Vec pfmm_loss_sq(const TwoTimeMap& student, const TwoTimeMap& teacher, int K,
                 const DrawBatch& batch) {
  if (K < 2) throw ConfigError("pfmm needs K >= 2 grid points");
  int hops = K - 1;
  Mat cur = batch.I;
  for (int k = 0; k < hops; ++k) {
    Vec ta = blend_time(batch.s, batch.t, static_cast<double>(k) / hops);
    Vec tb = blend_time(batch.s, batch.t, static_cast<double>(k + 1) / hops);
    cur = teacher.value(ta, tb, cur);
  }
  Mat X = student.value(batch.s, batch.t, batch.I);
  return rows_sq(X - cur);
}

Vec ee_loss_sq(const TwoTimeMap& map, const DrawBatch& batch,
               const Schedule& schedule) {
  Mat Is, Isdot;
  path_at_s(batch, schedule, Is, Isdot);
  Mat ds = map.ds(batch.s, batch.t, Is);
  Mat jvp = map.jvp(batch.s, batch.t, Is, Isdot);
  return rows_sq(ds + jvp);
}

Vec denoiser_loss_sq(const TwoTimeMap& map, const DrawBatch& batch,
                     const Schedule& schedule) {
  Mat Is, Isdot;
  path_at_s(batch, schedule, Is, Isdot);
  return rows_sq(map.dt(batch.s, batch.t, Is) - batch.Idot);
}

McEstimate mc_loss(LossKind kind, const TwoTimeMap* map,
                   const VelocityField* velocity,
                   const VelocityField* teacher_b,
                   const TwoTimeMap* teacher_map, const Schedule& schedule,
                   const Coupling& coupling, const TimeWeight& weight,
                   Eigen::Index nsamples, Rng& rng, const LossOptions& opt) {
  auto need = [](const void* p, const char* what) {
    if (!p) throw ConfigError(std::string("mc_loss missing ") + what);
  };
  double sum = 0.0, sumsq = 0.0;
  Eigen::Index done = 0;
  while (done < nsamples) {
    Eigen::Index n = std::min<Eigen::Index>(8192, nsamples - done);
    DrawBatch batch = draw_interpolant_batch(schedule, coupling, weight, n,
                                             rng);
    Vec sq;
    switch (kind) {
      case LossKind::velocity:
        need(velocity, "velocity field");
        sq = velocity_loss_sq(*velocity, batch);
        break;
      case LossKind::lmd:
        need(map, "map");
        need(teacher_b, "teacher velocity");
        sq = lmd_loss_sq(*map, *teacher_b, batch, schedule);
        break;
      case LossKind::emd:
        need(map, "map");
        need(teacher_b, "teacher velocity");
        sq = emd_loss_sq(*map, *teacher_b, batch, schedule);
        break;
      case LossKind::fmm:
        need(map, "map");
        sq = fmm_loss_sq(*map, batch, opt.fmm_lambda);
        break;
      case LossKind::pfmm:
        need(map, "map");
        need(teacher_map, "teacher map");
        {
          Mat Is, Isdot;
          eval_at(batch, schedule, batch.s, Is, Isdot);
          batch.I = std::move(Is);
          batch.Idot = std::move(Isdot);
        }
        sq = pfmm_loss_sq(*map, *teacher_map, opt.pfmm_K, batch);
        break;
      case LossKind::ee:
        need(map, "map");
        sq = ee_loss_sq(*map, batch, schedule);
        break;
      case LossKind::denoiser:
        need(map, "map");
        sq = denoiser_loss_sq(*map, batch, schedule);
        break;
    }
    sum += sq.sum();
    sumsq += sq.squaredNorm();
    done += n;
  }
  McEstimate est;
  est.n = done;
  est.mean = sum / static_cast<double>(done);
  double var = (sumsq - static_cast<double>(done) * est.mean * est.mean) /
               std::max<double>(1.0, static_cast<double>(done - 1));
  est.se = std::sqrt(std::max(0.0, var) / static_cast<double>(done));
  return est;
}

}  // namespace flowmap

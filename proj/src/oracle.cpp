#include "flowmap/oracle.hpp"

#include <cmath>
#include <memory>

#include "flowmap/metrics.hpp"
#include "flowmap/objectives.hpp"

namespace flowmap {

namespace {

void check_unit(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0))
    throw DomainError(std::string(what) + " time outside [0,1]");
}

}  // namespace

void GaussianTask::validate() const {
  if (m.size() != sigma.size() || m.size() == 0)
    throw ConfigError("gaussian task mean/sigma mismatch");
  if ((sigma.array() <= 0.0).any())
    throw ConfigError("gaussian task sigma must be positive");
}

Vec GaussianTask::sigma_at(double t) const {
  return ((1.0 - t) * (1.0 - t) +
          t * t * sigma.array().square())
      .sqrt()
      .matrix();
}

Vec GaussianTask::dsigma_at(double t) const {
  // d/dt sqrt((1-t)^2 + t^2 s^2) = (t(1+s^2) - 1) / sigma_t.
  Vec st = sigma_at(t);
  return ((t * (1.0 + sigma.array().square()) - 1.0) / st.array()).matrix();
}

Coupling GaussianTask::coupling() const {
  validate();
  return Coupling::independent(
      std::make_shared<StandardNormal>(dim()),
      std::make_shared<DiagonalGaussian>(m, sigma));
}

double GaussianTask::lipschitz(double t) const {
  check_unit(t, "lipschitz");
  return (dsigma_at(t).array() / sigma_at(t).array()).maxCoeff();
}

double GaussianTask::lipschitz_integral() const {
  // Composite Simpson on |C_t|; the integrand is continuous with isolated
  // kinks, so a fine fixed grid reaches well past audit accuracy.
  const int n = 1 << 16;  // intervals, even
  double h = 1.0 / n;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * std::abs(lipschitz(k * h));
  }
  return acc * h / 3.0;
}

Vec oracle_velocity_gaussian(const GaussianTask& task, double t,
                             const Vec& x) {
  check_unit(t, "velocity");
  Vec slope = (task.dsigma_at(t).array() / task.sigma_at(t).array()).matrix();
  return task.m + (slope.array() * (x - task.mean_at(t)).array()).matrix();
}

Mat oracle_velocity_gaussian(const GaussianTask& task, const Vec& t,
                             const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out.row(r) = oracle_velocity_gaussian(task, t(r), Vec(x.row(r)));
  return out;
}

Vec oracle_flowmap_gaussian(const GaussianTask& task, double s, double t,
                            const Vec& x) {
  check_unit(s, "flow map");
  check_unit(t, "flow map");
  Vec ratio = (task.sigma_at(t).array() / task.sigma_at(s).array()).matrix();
  return task.mean_at(t) +
         (ratio.array() * (x - task.mean_at(s)).array()).matrix();
}

Mat oracle_flowmap_gaussian(const GaussianTask& task, const Vec& s,
                            const Vec& t, const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out.row(r) = oracle_flowmap_gaussian(task, s(r), t(r), Vec(x.row(r)));
  return out;
}

namespace {

// Conditional-mean slope of I_t given I_s: cov(I_t, I_s) / var(I_s).
Vec denoiser_slope(const GaussianTask& task, double s, double t) {
  Eigen::ArrayXd cov =
      (1.0 - t) * (1.0 - s) + t * s * task.sigma.array().square();
  Eigen::ArrayXd var =
      (1.0 - s) * (1.0 - s) + s * s * task.sigma.array().square();
  return (cov / var).matrix();
}

}  // namespace

Vec oracle_denoiser_gaussian(const GaussianTask& task, double s, double t,
                             const Vec& x) {
  check_unit(s, "denoiser");
  check_unit(t, "denoiser");
  Vec c = denoiser_slope(task, s, t);
  return task.mean_at(t) +
         (c.array() * (x - task.mean_at(s)).array()).matrix();
}

Mat oracle_denoiser_gaussian(const GaussianTask& task, const Vec& s,
                             const Vec& t, const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out.row(r) = oracle_denoiser_gaussian(task, s(r), t(r), Vec(x.row(r)));
  return out;
}

Mat GaussianFlowMapOracle::value(const Vec& s, const Vec& t,
                                 const Mat& x) const {
  return oracle_flowmap_gaussian(task_, s, t, x);
}

Mat GaussianFlowMapOracle::dt(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Vec ratio =
        (task_.dsigma_at(t(r)).array() / task_.sigma_at(s(r)).array())
            .matrix();
    out.row(r) =
        task_.m +
        (ratio.array() * (x.row(r).transpose() - task_.mean_at(s(r))).array())
            .matrix();
  }
  return out;
}

Mat GaussianFlowMapOracle::ds(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Vec ss = task_.sigma_at(s(r)), st = task_.sigma_at(t(r));
    Vec dss = task_.dsigma_at(s(r));
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) = (-(st.array() * dss.array() / ss.array().square()) *
                      centered.array() -
                  (st.array() / ss.array()) * task_.m.array())
                     .matrix();
  }
  return out;
}

Mat GaussianFlowMapOracle::jvp(const Vec& s, const Vec& t, const Mat& x,
                               const Mat& dir) const {
  (void)x;
  Mat out(dir.rows(), dir.cols());
  for (Eigen::Index r = 0; r < dir.rows(); ++r) {
    Vec ratio =
        (task_.sigma_at(t(r)).array() / task_.sigma_at(s(r)).array())
            .matrix();
    out.row(r) = (ratio.array() * dir.row(r).transpose().array()).matrix();
  }
  return out;
}

Mat GaussianDenoiserOracle::value(const Vec& s, const Vec& t,
                                  const Mat& x) const {
  return oracle_denoiser_gaussian(task_, s, t, x);
}

Mat GaussianDenoiserOracle::dt(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    // d/dt of m_t + c_{s,t}(x - m_s): c is affine in t.
    Eigen::ArrayXd var = (1.0 - s(r)) * (1.0 - s(r)) +
                         s(r) * s(r) * task_.sigma.array().square();
    Eigen::ArrayXd dc =
        (-(1.0 - s(r)) + s(r) * task_.sigma.array().square()) / var;
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) = (task_.m.array() + dc * centered.array()).matrix();
  }
  return out;
}

Mat GaussianDenoiserOracle::ds(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd sig2 = task_.sigma.array().square();
    Eigen::ArrayXd cov = (1.0 - t(r)) * (1.0 - s(r)) + t(r) * s(r) * sig2;
    Eigen::ArrayXd var = (1.0 - s(r)) * (1.0 - s(r)) + s(r) * s(r) * sig2;
    Eigen::ArrayXd dcov = -(1.0 - t(r)) + t(r) * sig2;
    Eigen::ArrayXd dvar = 2.0 * (s(r) * (1.0 + sig2) - 1.0);
    Eigen::ArrayXd dc = (dcov * var - cov * dvar) / var.square();
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) =
        (dc * centered.array() - (cov / var) * task_.m.array()).matrix();
  }
  return out;
}

Mat GaussianDenoiserOracle::jvp(const Vec& s, const Vec& t, const Mat& x,
                                const Mat& dir) const {
  (void)x;
  Mat out(dir.rows(), dir.cols());
  for (Eigen::Index r = 0; r < dir.rows(); ++r) {
    Vec c = denoiser_slope(task_, s(r), t(r));
    out.row(r) = (c.array() * dir.row(r).transpose().array()).matrix();
  }
  return out;
}

PerturbedGaussianMap::PerturbedGaussianMap(GaussianTask task, double eps,
                                           Rng& rng)
    : task_(std::move(task)), eps_(eps) {
  task_.validate();
  a_ = rng.normal_vec(task_.dim());
  u_ = rng.normal_vec(task_.dim());
}

Mat PerturbedGaussianMap::value(const Vec& s, const Vec& t,
                                const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double span = t(r) - s(r);
    Eigen::ArrayXd R = (task_.sigma_at(t(r)).array() /
                        task_.sigma_at(s(r)).array()) *
                       (1.0 + eps_ * span * a_.array());
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) = (task_.mean_at(t(r)).array() + R * centered.array() +
                  eps_ * span * u_.array())
                     .matrix();
  }
  return out;
}

Mat PerturbedGaussianMap::dt(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double span = t(r) - s(r);
    Eigen::ArrayXd ss = task_.sigma_at(s(r)).array();
    Eigen::ArrayXd dR =
        (task_.dsigma_at(t(r)).array() / ss) * (1.0 + eps_ * span * a_.array()) +
        (task_.sigma_at(t(r)).array() / ss) * (eps_ * a_.array());
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) =
        (task_.m.array() + dR * centered.array() + eps_ * u_.array()).matrix();
  }
  return out;
}

Mat PerturbedGaussianMap::ds(const Vec& s, const Vec& t, const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double span = t(r) - s(r);
    Eigen::ArrayXd ss = task_.sigma_at(s(r)).array();
    Eigen::ArrayXd st = task_.sigma_at(t(r)).array();
    Eigen::ArrayXd dss = task_.dsigma_at(s(r)).array();
    Eigen::ArrayXd R = (st / ss) * (1.0 + eps_ * span * a_.array());
    Eigen::ArrayXd dR = -(st * dss / ss.square()) *
                            (1.0 + eps_ * span * a_.array()) -
                        (st / ss) * (eps_ * a_.array());
    Vec centered = x.row(r).transpose() - task_.mean_at(s(r));
    out.row(r) = (dR * centered.array() - R * task_.m.array() -
                  eps_ * u_.array())
                     .matrix();
  }
  return out;
}

Mat PerturbedGaussianMap::jvp(const Vec& s, const Vec& t, const Mat& x,
                              const Mat& dir) const {
  (void)x;
  Mat out(dir.rows(), dir.cols());
  for (Eigen::Index r = 0; r < dir.rows(); ++r) {
    double span = t(r) - s(r);
    Eigen::ArrayXd R = (task_.sigma_at(t(r)).array() /
                        task_.sigma_at(s(r)).array()) *
                       (1.0 + eps_ * span * a_.array());
    out.row(r) = (R * dir.row(r).transpose().array()).matrix();
  }
  return out;
}

double BoundCheck::combined_se() const {
  return std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
}

BoundCheck wasserstein_bound_check(const GaussianTask& task,
                                   const TwoTimeMap& candidate,
                                   BoundKind kind, Rng& rng,
                                   const BoundCheckOptions& opt) {
  task.validate();
  BoundCheck out;
  Schedule schedule = task.schedule();
  Coupling coupling = task.coupling();
  TimeWeight uniform;  // the bounds normalize the loss with w = 1
  GaussianVelocityOracle b(task);
  GaussianFlowMapOracle exact(task);

  McEstimate loss =
      mc_loss(kind == BoundKind::lmd ? LossKind::lmd : LossKind::emd,
              &candidate, nullptr, &b, nullptr, schedule, coupling, uniform,
              opt.loss_samples, rng, LossOptions{});
  out.loss = loss.mean;
  out.loss_se = loss.se;
  out.constant = kind == BoundKind::lmd
                     ? std::exp(1.0 + 2.0 * task.lipschitz_integral())
                     : std::exp(1.0);
  out.rhs = out.constant * out.loss;
  out.rhs_se = out.constant * out.loss_se;

  // W2^2 upper estimate between the exact and candidate pushforwards at
  // t=1. Both maps see the same base points: the resulting assignment cost
  // estimates the coupling-by-initial-condition bound that the
  // propositions control, and vanishes when the maps agree.
  Vec costs(opt.w2_repeats);
  Vec zero, one;
  for (int r = 0; r < opt.w2_repeats; ++r) {
    Mat x0 = rng.normal_mat(opt.w2_points, task.dim());
    zero = Vec::Zero(opt.w2_points);
    one = Vec::Ones(opt.w2_points);
    Mat push_exact = exact.value(zero, one, x0);
    Mat push_cand = candidate.value(zero, one, x0);
    costs(r) = assignment_cost(push_exact, push_cand);
  }
  out.lhs = costs.mean();
  if (opt.w2_repeats > 1)
    out.lhs_se = std::sqrt((costs.array() - out.lhs).square().sum() /
                           (opt.w2_repeats - 1) / opt.w2_repeats);
  out.holds = out.lhs <= out.rhs + 3.0 * out.combined_se();
  return out;
}

}  // namespace flowmap

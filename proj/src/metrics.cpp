#include "flowmap/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <future>
#include <numeric>
#include <sstream>

namespace flowmap {

namespace {

int worker_count() {
  const char* env = std::getenv("FLOWMAP_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

}  // namespace

HistogramGrid HistogramGrid::planar_default() {
  HistogramGrid g;
  g.lo = Vec::Constant(2, -4.5);
  g.hi = Vec::Constant(2, 4.5);
  g.bins = {64, 64};
  g.eps = 1e-6 / (64.0 * 64.0);
  return g;
}

void HistogramGrid::validate() const {
  if (lo.size() != hi.size() ||
      static_cast<std::size_t>(lo.size()) != bins.size())
    throw ConfigError("histogram grid dimension mismatch");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < 2) throw ConfigError("histogram needs >= 2 bins per axis");
    if (!(lo(i) < hi(i))) throw ConfigError("histogram box is degenerate");
  }
  if (!(eps > 0.0)) throw ConfigError("histogram smoothing must be positive");
}

Eigen::Index HistogramGrid::cells() const {
  Eigen::Index c = 1;
  for (int b : bins) c *= b;
  return c;
}

Vec HistogramGrid::density(const Mat& samples) const {
  validate();
  if (samples.rows() == 0) throw UsageError("histogram over empty samples");
  if (samples.cols() != lo.size())
    throw UsageError("histogram sample dimension mismatch");
  Vec counts = Vec::Zero(cells());
  Eigen::Index kept = 0;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    Eigen::Index flat = 0;
    bool in = true;
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      double u = (samples(r, d) - lo(d)) / (hi(d) - lo(d));
      auto k = static_cast<Eigen::Index>(std::floor(u * bins[d]));
      if (k < 0 || k >= bins[d]) {
        in = false;
        break;
      }
      flat = flat * bins[d] + k;
    }
    if (in) {
      counts(flat) += 1.0;
      ++kept;
    }
  }
  if (kept == 0) throw UsageError("no samples landed inside the histogram");
  Vec p = counts / static_cast<double>(kept);
  p.array() += eps;
  return p / p.sum();
}

double kl_histogram(const Mat& target_samples, const Mat& model_samples,
                    const HistogramGrid& grid) {
  Vec p = grid.density(target_samples);
  Vec q = grid.density(model_samples);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) kl += p(i) * std::log(p(i) / q(i));
  return kl;
}

namespace {

// Exact linear assignment by shortest augmenting paths with dual
// potentials (the dense Jonker-Volgenant scheme). Columns are 1-based with
// a virtual column 0 anchoring each augmentation.
double solve_assignment(const Mat& cost, std::vector<int>& row_of_col) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0) throw NumericError("assignment solver failed to augment");
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    for (int j1 = way[j0]; j0 != 0; j0 = j1, j1 = way[j0]) p[j0] = p[j1];
  }
  row_of_col.assign(n, 0);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    row_of_col[j - 1] = p[j] - 1;
    total += cost(p[j] - 1, j - 1);
  }
  return total;
}

Mat pairwise_sq_cost(const Mat& p, const Mat& q) {
  Mat cost(p.rows(), q.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    cost.row(i) =
        (q.rowwise() - p.row(i)).rowwise().squaredNorm().transpose();
  return cost;
}

Mat subsample(const Mat& src, Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(src.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    auto j = k + static_cast<Eigen::Index>(rng.below(idx.size() - k));
    std::swap(idx[k], idx[j]);
  }
  Mat out(n, src.cols());
  for (Eigen::Index k = 0; k < n; ++k) out.row(k) = src.row(idx[k]);
  return out;
}

}  // namespace

double assignment_cost(const Mat& p, const Mat& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols())
    throw UsageError("assignment needs equal-size clouds");
  if (p.rows() == 0) throw UsageError("assignment over empty clouds");
  std::vector<int> perm;
  double total = solve_assignment(pairwise_sq_cost(p, q), perm);
  return total / static_cast<double>(p.rows());
}

W2Estimate w2_assignment(const Mat& samples_p, const Mat& samples_q,
                         Eigen::Index n, int repeats, Rng& rng) {
  if (repeats < 1) throw UsageError("w2 needs at least one repeat");
  if (n < 1 || n > samples_p.rows() || n > samples_q.rows())
    throw UsageError("w2 subsample exceeds available samples");
  std::uint64_t base_seed = rng.raw();
  Vec costs(repeats);
  auto run = [&](int r) {
    Rng worker = Rng::for_worker(base_seed, static_cast<std::uint64_t>(r));
    Mat a = subsample(samples_p, n, worker);
    Mat b = subsample(samples_q, n, worker);
    return assignment_cost(a, b);
  };
  int threads = std::min(worker_count(), repeats);
  if (threads <= 1) {
    for (int r = 0; r < repeats; ++r) costs(r) = run(r);
  } else {
    std::vector<std::future<double>> fut;
    fut.reserve(repeats);
    for (int r = 0; r < repeats; ++r)
      fut.push_back(std::async(std::launch::async, run, r));
    for (int r = 0; r < repeats; ++r) costs(r) = fut[r].get();
  }
  W2Estimate est;
  est.n = n;
  est.repeats = repeats;
  est.mean = costs.mean();
  if (repeats > 1) {
    double var = (costs.array() - est.mean).square().sum() / (repeats - 1);
    est.se = std::sqrt(var / repeats);
  }
  return est;
}

double teacher_l2(const TwoTimeMap& student,
                  const std::function<Mat(const Mat&)>& teacher_0_1,
                  const Mat& x0) {
  Vec zero = Vec::Zero(x0.rows());
  Vec one = Vec::Ones(x0.rows());
  Mat s = student.value(zero, one, x0);
  Mat t = teacher_0_1(x0);
  return (s - t).rowwise().squaredNorm().mean();
}

MismatchReport mismatch_report(const TwoTimeMap& student,
                               const std::function<Mat(const Mat&)>& teacher_0_1,
                               const Mat& x0, double threshold) {
  if (!(threshold > 0.0)) throw UsageError("mismatch threshold must be > 0");
  MismatchReport rep;
  rep.threshold = threshold;
  rep.x0 = x0;
  Vec zero = Vec::Zero(x0.rows());
  Vec one = Vec::Ones(x0.rows());
  rep.student_out = student.value(zero, one, x0);
  rep.teacher_out = teacher_0_1(x0);
  rep.sq_deviation =
      (rep.student_out - rep.teacher_out).rowwise().squaredNorm();
  rep.flagged.resize(x0.rows());
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    rep.flagged[i] = rep.sq_deviation(i) > threshold;
    count += rep.flagged[i];
  }
  rep.flagged_fraction =
      static_cast<double>(count) / static_cast<double>(x0.rows());
  return rep;
}

void MetricReport::validate() const {
  if (!std::isfinite(kl) || !std::isfinite(w2sq) || !std::isfinite(w2_se))
    throw NumericError("metric report contains non-finite values");
  if (w2_se < 0.0) throw NumericError("negative standard error");
}

std::string MetricReport::key_value_block() const {
  std::ostringstream os;
  os.precision(10);
  os << "method=" << method << "\n"
     << "n_target=" << n_target << "\n"
     << "n_model=" << n_model << "\n"
     << "seed=" << seed << "\n"
     << "map_evals=" << map_evals << "\n"
     << "kl=" << kl << "\n"
     << "w2sq=" << w2sq << "\n"
     << "w2sq_se=" << w2_se << "\n";
  if (std::isfinite(teacher_gap)) os << "teacher_l2=" << teacher_gap << "\n";
  return os.str();
}

std::string MetricReport::csv_header() {
  return "method,n_target,n_model,seed,map_evals,kl,w2sq,w2sq_se,teacher_l2";
}

std::string MetricReport::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << method << ',' << n_target << ',' << n_model << ',' << seed << ','
     << map_evals << ',' << kl << ',' << w2sq << ',' << w2_se << ',';
  if (std::isfinite(teacher_gap)) os << teacher_gap;
  return os.str();
}

}  // namespace flowmap

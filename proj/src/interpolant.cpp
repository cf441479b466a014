#include "flowmap/interpolant.hpp"

#include <cmath>

namespace flowmap {

TimeWeight TimeWeight::parse(const std::string& text) {
  TimeWeight w;
  auto strip_arg = [&](const std::string& prefix) -> bool {
    if (text.rfind(prefix + "(", 0) != 0 || text.back() != ')') return false;
    std::string arg = text.substr(prefix.size() + 1,
                                  text.size() - prefix.size() - 2);
    try {
      w.K = std::stoi(arg);
    } catch (const std::exception&) {
      throw ConfigError("bad strip parameter in time weight '" + text + "'");
    }
    if (w.K < 1) throw ConfigError("strip parameter must be >= 1");
    return true;
  };
  if (text == "uniform-square") {
    w.kind = TimeWeightKind::uniform_square;
  } else if (text == "forward-only") {
    w.kind = TimeWeightKind::forward_only;
  } else if (strip_arg("strip")) {
    w.kind = TimeWeightKind::strip;
  } else if (strip_arg("forward-strip")) {
    w.kind = TimeWeightKind::forward_strip;
  } else {
    throw ConfigError("unknown time weight '" + text + "'");
  }
  return w;
}

std::string TimeWeight::str() const {
  switch (kind) {
    case TimeWeightKind::uniform_square: return "uniform-square";
    case TimeWeightKind::strip: return "strip(" + std::to_string(K) + ")";
    case TimeWeightKind::forward_only: return "forward-only";
    case TimeWeightKind::forward_strip:
      return "forward-strip(" + std::to_string(K) + ")";
  }
  return "?";
}

void TimeWeight::draw(Rng& rng, double& s, double& t) const {
  double band = 1.0 / K;
  switch (kind) {
    case TimeWeightKind::uniform_square:
      s = rng.uniform();
      t = rng.uniform();
      return;
    case TimeWeightKind::strip:
      do {
        s = rng.uniform();
        t = rng.uniform();
      } while (std::abs(t - s) > band);
      return;
    case TimeWeightKind::forward_only:
      s = rng.uniform();
      t = rng.uniform();
      if (s > t) std::swap(s, t);
      return;
    case TimeWeightKind::forward_strip:
      do {
        s = rng.uniform();
        t = rng.uniform();
      } while (s > t || t - s > band);
      return;
  }
}

void TimeWeight::draw(Rng& rng, Vec& s, Vec& t) const {
  for (Eigen::Index i = 0; i < s.size(); ++i) draw(rng, s(i), t(i));
}

InterpolantDraw draw_interpolant(const Schedule& schedule,
                                 const Coupling& coupling,
                                 const TimeWeight& weight, Rng& rng) {
  DrawBatch b = draw_interpolant_batch(schedule, coupling, weight, 1, rng);
  InterpolantDraw d;
  d.s = b.s(0);
  d.t = b.t(0);
  d.x0 = b.x0.row(0);
  d.x1 = b.x1.row(0);
  d.z = b.z.row(0);
  d.I = b.I.row(0);
  d.Idot = b.Idot.row(0);
  d.label = b.labels.size() ? b.labels(0) : -1;
  return d;
}

namespace {

// I = alpha x0 + beta x1 + gamma z rowwise, and likewise for the velocity.
void combine(const DrawBatch& b, const Vec& a, const Vec& be, const Vec& g,
             const Vec& da, const Vec& db, const Vec& dg, Mat& I, Mat& Idot) {
  I = b.x0.array().colwise() * a.array();
  I.array() += b.x1.array().colwise() * be.array();
  I.array() += b.z.array().colwise() * g.array();
  Idot = b.x0.array().colwise() * da.array();
  Idot.array() += b.x1.array().colwise() * db.array();
  Idot.array() += b.z.array().colwise() * dg.array();
}

}  // namespace

DrawBatch draw_interpolant_batch(const Schedule& schedule,
                                 const Coupling& coupling,
                                 const TimeWeight& weight, Eigen::Index n,
                                 Rng& rng) {
  DrawBatch b;
  b.s.resize(n);
  b.t.resize(n);
  weight.draw(rng, b.s, b.t);
  coupling.draw(rng, n, b.x0, b.x1, &b.labels);
  b.z = rng.normal_mat(n, coupling.dim());
  eval_at(b, schedule, b.t, b.I, b.Idot);
  return b;
}

void eval_at(const DrawBatch& batch, const Schedule& schedule, const Vec& tau,
             Mat& I, Mat& Idot) {
  Vec a, be, g, da, db, dg;
  schedule.at(tau, a, be, g, da, db, dg);
  combine(batch, a, be, g, da, db, dg, I, Idot);
}

void eval_at(const InterpolantDraw& draw, const Schedule& schedule, double tau,
             Vec& I, Vec& Idot) {
  ScheduleCoeffs c = schedule.at(tau);
  I = c.alpha * draw.x0 + c.beta * draw.x1 + c.gamma * draw.z;
  Idot = c.dalpha * draw.x0 + c.dbeta * draw.x1 + c.dgamma * draw.z;
}

}  // namespace flowmap

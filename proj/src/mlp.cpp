#include "flowmap/mlp.hpp"

#include <cmath>

namespace flowmap {

MlpParams MlpParams::init(const std::vector<int>& widths, Activation act,
                          Rng& rng, bool zero_final) {
  if (widths.size() < 2) throw ConfigError("mlp needs at least one layer");
  MlpParams p;
  p.act = act;
  p.layers.resize(widths.size() - 1);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    int fan_in = widths[i], fan_out = widths[i + 1];
    if (fan_in < 1 || fan_out < 1) throw ConfigError("mlp width must be >= 1");
    ad::ParamBlock& blk = p.layers[i];
    bool zero = zero_final && i + 2 == widths.size();
    if (zero) {
      blk.W = Mat::Zero(fan_in, fan_out);
      blk.b = Vec::Zero(fan_out);
    } else {
      // Fan-in-scaled uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      blk.W.resize(fan_in, fan_out);
      for (int r = 0; r < fan_in; ++r)
        for (int c = 0; c < fan_out; ++c)
          blk.W(r, c) = rng.uniform(-bound, bound);
      blk.b.resize(fan_out);
      for (int c = 0; c < fan_out; ++c) blk.b(c) = rng.uniform(-bound, bound);
    }
    blk.zero_grad();
  }
  return p;
}

std::vector<int> MlpParams::widths() const {
  std::vector<int> w;
  w.push_back(in_dim());
  for (const auto& blk : layers) w.push_back(static_cast<int>(blk.W.cols()));
  return w;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& blk : layers) n += blk.W.size() + blk.b.size();
  return n;
}

void MlpParams::zero_grad() {
  for (auto& blk : layers) blk.zero_grad();
}

Vec MlpParams::flatten() const {
  Vec theta(param_count());
  Eigen::Index pos = 0;
  for (const auto& blk : layers) {
    theta.segment(pos, blk.W.size()) =
        Eigen::Map<const Vec>(blk.W.data(), blk.W.size());
    pos += blk.W.size();
    theta.segment(pos, blk.b.size()) = blk.b;
    pos += blk.b.size();
  }
  return theta;
}

void MlpParams::unflatten(const Vec& theta) {
  if (theta.size() != static_cast<Eigen::Index>(param_count()))
    throw ConfigError("parameter vector length mismatch");
  Eigen::Index pos = 0;
  for (auto& blk : layers) {
    Eigen::Map<Vec>(blk.W.data(), blk.W.size()) =
        theta.segment(pos, blk.W.size());
    pos += blk.W.size();
    blk.b = theta.segment(pos, blk.b.size());
    pos += blk.b.size();
  }
}

Vec MlpParams::flatten_grad() const {
  Vec g(param_count());
  Eigen::Index pos = 0;
  for (const auto& blk : layers) {
    g.segment(pos, blk.gW.size()) =
        Eigen::Map<const Vec>(blk.gW.data(), blk.gW.size());
    pos += blk.gW.size();
    g.segment(pos, blk.gb.size()) = blk.gb;
    pos += blk.gb.size();
  }
  return g;
}

bool MlpParams::params_finite() const {
  for (const auto& blk : layers)
    if (!blk.W.allFinite() || !blk.b.allFinite()) return false;
  return true;
}

Mat mlp_value(const MlpParams& p, const Mat& in) {
  Mat h = in;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const ad::ParamBlock& blk = p.layers[i];
    Mat z = h * blk.W;
    z.rowwise() += blk.b.transpose();
    if (!z.allFinite())
      throw NumericError("non-finite output at linear layer " +
                         std::to_string(i));
    if (i + 1 < p.layers.size()) act_value(p.act, z, h);
    else h = std::move(z);
  }
  return h;
}

void mlp_dual(const MlpParams& p, const Mat& in, const Mat& in_tangent,
              Mat& out, Mat& out_tangent) {
  Mat h = in, ht = in_tangent;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const ad::ParamBlock& blk = p.layers[i];
    Mat z = h * blk.W;
    z.rowwise() += blk.b.transpose();
    if (!z.allFinite())
      throw NumericError("non-finite output at linear layer " +
                         std::to_string(i));
    Mat zt = ht * blk.W;
    if (i + 1 < p.layers.size()) {
      Mat d1;
      act_d1(p.act, z, d1);
      act_value(p.act, z, h);
      ht = d1.cwiseProduct(zt);
    } else {
      h = std::move(z);
      ht = std::move(zt);
    }
  }
  out = std::move(h);
  out_tangent = std::move(ht);
}

ad::Node* mlp_taped(ad::Tape& tape, MlpParams& p, ad::Node* in) {
  ad::Node* h = in;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = tape.linear(h, &p.layers[i], static_cast<int>(i));
    if (i + 1 < p.layers.size()) h = tape.activation(h, p.act);
  }
  return h;
}

}  // namespace flowmap

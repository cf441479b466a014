#pragma once

#include <functional>
#include <memory>

#include "flowmap/model.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// Time-dependent vector field on R^d, batched over rows. The common
// currency between closed-form drifts, trained velocity models, and the
// integrators and losses that consume them.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual int dim() const = 0;
  virtual Mat value(const Vec& t, const Mat& x) const = 0;

  Vec at(double t, const Vec& x) const {
    return value(Vec::Constant(1, t), x.transpose()).row(0);
  }
};

// Two-time map on R^d with exact partial derivatives, batched over rows.
// Implementations: closed-form oracles, trained models, and the perturbed
// maps used by the bound audit.
class TwoTimeMap {
 public:
  virtual ~TwoTimeMap() = default;
  virtual int dim() const = 0;
  virtual Mat value(const Vec& s, const Vec& t, const Mat& x) const = 0;
  virtual Mat dt(const Vec& s, const Vec& t, const Mat& x) const = 0;
  virtual Mat ds(const Vec& s, const Vec& t, const Mat& x) const = 0;
  virtual Mat jvp(const Vec& s, const Vec& t, const Mat& x,
                  const Mat& dir) const = 0;
};

class ZeroVelocity : public VelocityField {
 public:
  explicit ZeroVelocity(int d) : d_(d) {}
  int dim() const override { return d_; }
  Mat value(const Vec&, const Mat& x) const override {
    return Mat::Zero(x.rows(), x.cols());
  }

 private:
  int d_;
};

class FnVelocity : public VelocityField {
 public:
  using Fn = std::function<Mat(const Vec&, const Mat&)>;
  FnVelocity(int d, Fn fn) : d_(d), fn_(std::move(fn)) {}
  int dim() const override { return d_; }
  Mat value(const Vec& t, const Mat& x) const override { return fn_(t, x); }

 private:
  int d_;
  Fn fn_;
};

class IdentityMap : public TwoTimeMap {
 public:
  explicit IdentityMap(int d) : d_(d) {}
  int dim() const override { return d_; }
  Mat value(const Vec&, const Vec&, const Mat& x) const override { return x; }
  Mat dt(const Vec&, const Vec&, const Mat& x) const override {
    return Mat::Zero(x.rows(), x.cols());
  }
  Mat ds(const Vec&, const Vec&, const Mat& x) const override {
    return Mat::Zero(x.rows(), x.cols());
  }
  Mat jvp(const Vec&, const Vec&, const Mat&, const Mat& dir) const override {
    return dir;
  }

 private:
  int d_;
};

// Adapters exposing trained models through the map/field interfaces. For
// conditional models a fixed label is broadcast to the whole batch. The
// model is borrowed, not owned.
class NeuralVelocity : public VelocityField {
 public:
  explicit NeuralVelocity(const VelocityModel* m, int label = -1)
      : m_(m), label_(label) {}
  int dim() const override { return m_->d; }
  Mat value(const Vec& t, const Mat& x) const override;

 private:
  const VelocityModel* m_;
  int label_;
};

class NeuralFlowMap : public TwoTimeMap {
 public:
  explicit NeuralFlowMap(const FlowMapModel* m, int label = -1)
      : m_(m), label_(label) {}
  int dim() const override { return m_->d; }
  Mat value(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat dt(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat ds(const Vec& s, const Vec& t, const Mat& x) const override;
  Mat jvp(const Vec& s, const Vec& t, const Mat& x,
          const Mat& dir) const override;

 private:
  const IVec* labels_for(const Mat& x, IVec& storage) const;
  const FlowMapModel* m_;
  int label_;
};

}  // namespace flowmap

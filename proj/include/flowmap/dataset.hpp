#pragma once

#include <memory>
#include <string>

#include "flowmap/rng.hpp"
#include "flowmap/types.hpp"

namespace flowmap {

// A distribution over R^d with optional class labels. Batched draws fill
// one sample per row.
class PointSampler {
 public:
  virtual ~PointSampler() = default;
  virtual int dim() const = 0;
  virtual int num_classes() const { return 0; }
  virtual void draw(Rng& rng, Mat& out, IVec* labels = nullptr) const = 0;

  Mat draw(Rng& rng, Eigen::Index n) const {
    Mat out(n, dim());
    draw(rng, out);
    return out;
  }
};

class StandardNormal : public PointSampler {
 public:
  using PointSampler::draw;
  explicit StandardNormal(int d) : d_(d) {}
  int dim() const override { return d_; }
  void draw(Rng& rng, Mat& out, IVec* labels) const override;

 private:
  int d_;
};

// N(mean, diag(sigma^2)).
class DiagonalGaussian : public PointSampler {
 public:
  using PointSampler::draw;
  DiagonalGaussian(Vec mean, Vec sigma);
  int dim() const override { return static_cast<int>(mean_.size()); }
  void draw(Rng& rng, Mat& out, IVec* labels) const override;
  const Vec& mean() const { return mean_; }
  const Vec& sigma() const { return sigma_; }

 private:
  Vec mean_, sigma_;
};

// 4x4 checkerboard of uniform 2x2 cells tiling [-4,4]^2, mass on the eight
// "black" cells (cell indices with i+j even). The black cells split into
// two diagonal families, i even vs. i odd, which serve as class labels 0/1
// for the conditional variant.
class Checkerboard : public PointSampler {
 public:
  using PointSampler::draw;
  explicit Checkerboard(bool labeled) : labeled_(labeled) {}
  int dim() const override { return 2; }
  int num_classes() const override { return labeled_ ? 2 : 0; }
  void draw(Rng& rng, Mat& out, IVec* labels) const override;

  // Membership test for the support; label -1 accepts any black cell.
  static bool contains(double x, double y, int label = -1);

 private:
  bool labeled_;
};

enum class CouplingKind { independent, paired_dataset };

// Joint law of (x0, x1) feeding the interpolant. Independent couplings
// draw the two endpoints from separate samplers; paired couplings replay
// rows of a fixed dataset.
class Coupling {
 public:
  static Coupling independent(std::shared_ptr<const PointSampler> base,
                              std::shared_ptr<const PointSampler> target);
  static Coupling paired(Mat x0, Mat x1, IVec labels = IVec());

  CouplingKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int num_classes() const { return num_classes_; }

  void draw(Rng& rng, Eigen::Index n, Mat& x0, Mat& x1,
            IVec* labels = nullptr) const;

  const PointSampler& base() const;
  const PointSampler& target() const;

 private:
  Coupling() = default;

  CouplingKind kind_ = CouplingKind::independent;
  int dim_ = 0;
  int num_classes_ = 0;
  std::shared_ptr<const PointSampler> base_, target_;
  Mat paired_x0_, paired_x1_;
  IVec paired_labels_;
};

}  // namespace flowmap

#include "flowmap/dataset.hpp"

#include <cmath>

namespace flowmap {

void StandardNormal::draw(Rng& rng, Mat& out, IVec* labels) const {
  out = rng.normal_mat(out.rows(), d_);
  if (labels) labels->resize(0);
}

DiagonalGaussian::DiagonalGaussian(Vec mean, Vec sigma)
    : mean_(std::move(mean)), sigma_(std::move(sigma)) {
  if (mean_.size() != sigma_.size())
    throw ConfigError("gaussian mean/sigma dimension mismatch");
  if ((sigma_.array() <= 0.0).any())
    throw ConfigError("gaussian sigma must be positive");
}

void DiagonalGaussian::draw(Rng& rng, Mat& out, IVec* labels) const {
  Eigen::Index n = out.rows();
  out = rng.normal_mat(n, dim());
  out = (out.array().rowwise() * sigma_.transpose().array()).rowwise() +
        mean_.transpose().array();
  if (labels) labels->resize(0);
}

void Checkerboard::draw(Rng& rng, Mat& out, IVec* labels) const {
  Eigen::Index n = out.rows();
  out.resize(n, 2);
  if (labels && labeled_) labels->resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    // Pick a black cell: family f in {0,1} fixes the parity of both cell
    // indices, then each family holds four cells (two choices per axis).
    int f = static_cast<int>(rng.below(2));
    int i = f + 2 * static_cast<int>(rng.below(2));
    int j = f + 2 * static_cast<int>(rng.below(2));
    out(r, 0) = -4.0 + 2.0 * i + 2.0 * rng.uniform();
    out(r, 1) = -4.0 + 2.0 * j + 2.0 * rng.uniform();
    if (labels && labeled_) (*labels)(r) = f;
  }
  if (labels && !labeled_) labels->resize(0);
}

bool Checkerboard::contains(double x, double y, int label) {
  int i = static_cast<int>(std::floor((x + 4.0) / 2.0));
  int j = static_cast<int>(std::floor((y + 4.0) / 2.0));
  if (i < 0 || i > 3 || j < 0 || j > 3) return false;
  if ((i + j) % 2 != 0) return false;
  return label < 0 || i % 2 == label;
}

Coupling Coupling::independent(std::shared_ptr<const PointSampler> base,
                               std::shared_ptr<const PointSampler> target) {
  if (base->dim() != target->dim())
    throw ConfigError("coupling base/target dimension mismatch");
  Coupling c;
  c.kind_ = CouplingKind::independent;
  c.dim_ = base->dim();
  c.num_classes_ = target->num_classes();
  c.base_ = std::move(base);
  c.target_ = std::move(target);
  return c;
}

Coupling Coupling::paired(Mat x0, Mat x1, IVec labels) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw ConfigError("paired coupling requires matching sample arrays");
  if (x0.rows() == 0) throw ConfigError("paired coupling is empty");
  Coupling c;
  c.kind_ = CouplingKind::paired_dataset;
  c.dim_ = static_cast<int>(x0.cols());
  c.num_classes_ = labels.size() ? labels.maxCoeff() + 1 : 0;
  c.paired_x0_ = std::move(x0);
  c.paired_x1_ = std::move(x1);
  c.paired_labels_ = std::move(labels);
  return c;
}

void Coupling::draw(Rng& rng, Eigen::Index n, Mat& x0, Mat& x1,
                    IVec* labels) const {
  if (kind_ == CouplingKind::independent) {
    x0.resize(n, dim_);
    x1.resize(n, dim_);
    base_->draw(rng, x0);
    target_->draw(rng, x1, labels);
    return;
  }
  x0.resize(n, dim_);
  x1.resize(n, dim_);
  if (labels) labels->resize(paired_labels_.size() ? n : 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = static_cast<Eigen::Index>(rng.below(paired_x0_.rows()));
    x0.row(r) = paired_x0_.row(row);
    x1.row(r) = paired_x1_.row(row);
    if (labels && paired_labels_.size()) (*labels)(r) = paired_labels_(row);
  }
}

const PointSampler& Coupling::base() const {
  if (!base_) throw ConfigError("paired coupling has no base sampler");
  return *base_;
}

const PointSampler& Coupling::target() const {
  if (!target_) throw ConfigError("paired coupling has no target sampler");
  return *target_;
}

}  // namespace flowmap

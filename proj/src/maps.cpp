#include "flowmap/maps.hpp"

namespace flowmap {

Mat NeuralVelocity::value(const Vec& t, const Mat& x) const {
  IVec labels;
  const IVec* lp = nullptr;
  if (m_->num_classes > 0) {
    if (label_ < 0)
      throw ConfigError("conditional velocity adapter needs a label");
    labels = IVec::Constant(x.rows(), label_);
    lp = &labels;
  }
  return velocity_value(*m_, t, x, lp);
}

const IVec* NeuralFlowMap::labels_for(const Mat& x, IVec& storage) const {
  if (m_->num_classes == 0) return nullptr;
  if (label_ < 0)
    throw ConfigError("conditional flow map adapter needs a label");
  storage = IVec::Constant(x.rows(), label_);
  return &storage;
}

Mat NeuralFlowMap::value(const Vec& s, const Vec& t, const Mat& x) const {
  IVec labels;
  return flow_map_value(*m_, s, t, x, labels_for(x, labels));
}

Mat NeuralFlowMap::dt(const Vec& s, const Vec& t, const Mat& x) const {
  IVec labels;
  return flow_map_dual(*m_, s, t, x, SeedVar::t, nullptr,
                       labels_for(x, labels))
      .tangent;
}

Mat NeuralFlowMap::ds(const Vec& s, const Vec& t, const Mat& x) const {
  IVec labels;
  return flow_map_dual(*m_, s, t, x, SeedVar::s, nullptr,
                       labels_for(x, labels))
      .tangent;
}

Mat NeuralFlowMap::jvp(const Vec& s, const Vec& t, const Mat& x,
                       const Mat& dir) const {
  IVec labels;
  return flow_map_dual(*m_, s, t, x, SeedVar::x, &dir, labels_for(x, labels))
      .tangent;
}

}  // namespace flowmap

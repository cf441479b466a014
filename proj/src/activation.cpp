#include "flowmap/activation.hpp"

namespace flowmap {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double phi(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double Phi(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "silu") return Activation::silu;
  if (name == "tanh") return Activation::tanh_;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::silu: return "silu";
    case Activation::tanh_: return "tanh";
  }
  return "?";
}

int activation_id(Activation a) { return static_cast<int>(a); }

Activation activation_from_id(int id) {
  if (id < 0 || id > 2) throw ConfigError("bad activation id");
  return static_cast<Activation>(id);
}

void act_value(Activation a, const Mat& x, Mat& y) {
  switch (a) {
    case Activation::gelu:
      y = x.unaryExpr([](double v) { return v * Phi(v); });
      return;
    case Activation::silu:
      y = x.unaryExpr([](double v) { return v * sigm(v); });
      return;
    case Activation::tanh_:
      y = x.array().tanh();
      return;
  }
}

void act_d1(Activation a, const Mat& x, Mat& d1) {
  switch (a) {
    case Activation::gelu:
      d1 = x.unaryExpr([](double v) { return Phi(v) + v * phi(v); });
      return;
    case Activation::silu:
      d1 = x.unaryExpr([](double v) {
        double s = sigm(v);
        return s + v * s * (1.0 - s);
      });
      return;
    case Activation::tanh_:
      d1 = (1.0 - x.array().tanh().square()).matrix();
      return;
  }
}

void act_d2(Activation a, const Mat& x, Mat& d2) {
  switch (a) {
    case Activation::gelu:
      d2 = x.unaryExpr([](double v) { return (2.0 - v * v) * phi(v); });
      return;
    case Activation::silu:
      d2 = x.unaryExpr([](double v) {
        double s = sigm(v);
        double sp = s * (1.0 - s);
        return 2.0 * sp + v * sp * (1.0 - 2.0 * s);
      });
      return;
    case Activation::tanh_:
      d2 = x.unaryExpr([](double v) {
        double th = std::tanh(v);
        return -2.0 * th * (1.0 - th * th);
      });
      return;
  }
}

}  // namespace flowmap

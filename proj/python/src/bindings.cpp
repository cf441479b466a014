#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flowmap/checkpoint.hpp"
#include "flowmap/dataset.hpp"
#include "flowmap/integrate.hpp"
#include "flowmap/metrics.hpp"
#include "flowmap/oracle.hpp"
#include "flowmap/sampler.hpp"
#include "flowmap/schedule.hpp"
#include "flowmap/types.hpp"

namespace py = pybind11;
using namespace flowmap;

namespace {

GaussianTask make_task(const Vec& m, const Vec& sigma) {
  GaussianTask t;
  t.m = m;
  t.sigma = sigma;
  t.validate();
  return t;
}

// Thin handles over checkpoints so Python sees plain arrays in and out.
class PyFlowMap {
 public:
  explicit PyFlowMap(const std::string& path)
      : model_(restore_flow_map(load_checkpoint(path))) {}

  int dim() const { return model_.d; }
  int num_classes() const { return model_.num_classes; }

  Mat value(double s, double t, const Mat& x, int label) const {
    NeuralFlowMap map(&model_, label);
    Eigen::Index n = x.rows();
    return map.value(Vec::Constant(n, s), Vec::Constant(n, t), x);
  }
  Mat dt(double s, double t, const Mat& x, int label) const {
    NeuralFlowMap map(&model_, label);
    Eigen::Index n = x.rows();
    return map.dt(Vec::Constant(n, s), Vec::Constant(n, t), x);
  }
  Mat ds(double s, double t, const Mat& x, int label) const {
    NeuralFlowMap map(&model_, label);
    Eigen::Index n = x.rows();
    return map.ds(Vec::Constant(n, s), Vec::Constant(n, t), x);
  }
  Mat jvp(double s, double t, const Mat& x, const Mat& dir, int label) const {
    NeuralFlowMap map(&model_, label);
    Eigen::Index n = x.rows();
    return map.jvp(Vec::Constant(n, s), Vec::Constant(n, t), x, dir);
  }
  Mat sample(const Mat& x0, int nsteps, int label) const {
    NeuralFlowMap map(&model_, label);
    return map_sample(map, x0, TimeGrid::uniform(0.0, 1.0, nsteps));
  }
  Mat restyle(const Mat& x1, int label_from, int label_to, double s_prime,
              int leg_steps) const {
    NeuralFlowMap back(&model_, label_from), fwd(&model_, label_to);
    RestyleOptions opt;
    opt.s_prime = s_prime;
    opt.leg_steps = leg_steps;
    return invert_and_restyle(back, fwd, x1, opt);
  }

 private:
  FlowMapModel model_;
};

class PyVelocity {
 public:
  explicit PyVelocity(const std::string& path)
      : model_(restore_velocity(load_checkpoint(path))) {}

  int dim() const { return model_.d; }
  int num_classes() const { return model_.num_classes; }

  Mat value(double t, const Mat& x, int label) const {
    NeuralVelocity b(&model_, label);
    return b.value(Vec::Constant(x.rows(), t), x);
  }
  Mat sample(const Mat& x0, int nsteps, const std::string& method,
             int label) const {
    NeuralVelocity b(&model_, label);
    return integrate_over_grid(b, x0, TimeGrid::uniform(0.0, 1.0, nsteps),
                               ode_method_from_string(method));
  }

 private:
  VelocityModel model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "two-time flow map laboratory (native core)";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<NumericError>(m, "NumericError");
  py::register_exception<UsageError>(m, "UsageError");

  m.def(
      "schedule_coeffs",
      [](const std::string& kind, double t, double ve_horizon) {
        Schedule s =
            Schedule::make(schedule_kind_from_string(kind), ve_horizon);
        ScheduleCoeffs c = s.at(t);
        return py::make_tuple(c.alpha, c.beta, c.gamma, c.dalpha, c.dbeta,
                              c.dgamma);
      },
      py::arg("kind"), py::arg("t"), py::arg("ve_horizon") = 80.0,
      "Interpolant coefficients (alpha, beta, gamma) and their derivatives");

  m.def(
      "checkerboard_sample",
      [](Eigen::Index n, std::uint64_t seed, bool labeled) {
        Rng rng(seed);
        Checkerboard board(labeled);
        Mat out(n, 2);
        IVec labels(n);
        board.draw(rng, out, labeled ? &labels : nullptr);
        if (!labeled) labels.resize(0);
        return py::make_tuple(out, labels);
      },
      py::arg("n"), py::arg("seed") = 1, py::arg("labeled") = false,
      "Points (and labels when requested) from the checkerboard target");

  m.def("checkerboard_contains", &Checkerboard::contains, py::arg("x"),
        py::arg("y"), py::arg("label") = -1,
        "Support membership; label -1 accepts any black cell");

  m.def(
      "gaussian_velocity",
      [](const Vec& m_, const Vec& sigma, double t, const Mat& x) {
        return oracle_velocity_gaussian(make_task(m_, sigma),
                                        Vec::Constant(x.rows(), t), x);
      },
      py::arg("m"), py::arg("sigma"), py::arg("t"), py::arg("x"));

  m.def(
      "gaussian_flowmap",
      [](const Vec& m_, const Vec& sigma, double s, double t, const Mat& x) {
        return oracle_flowmap_gaussian(make_task(m_, sigma),
                                       Vec::Constant(x.rows(), s),
                                       Vec::Constant(x.rows(), t), x);
      },
      py::arg("m"), py::arg("sigma"), py::arg("s"), py::arg("t"),
      py::arg("x"));

  m.def(
      "gaussian_denoiser",
      [](const Vec& m_, const Vec& sigma, double s, double t, const Mat& x) {
        return oracle_denoiser_gaussian(make_task(m_, sigma),
                                        Vec::Constant(x.rows(), s),
                                        Vec::Constant(x.rows(), t), x);
      },
      py::arg("m"), py::arg("sigma"), py::arg("s"), py::arg("t"),
      py::arg("x"));

  m.def(
      "kl_histogram",
      [](const Mat& target, const Mat& model) {
        return kl_histogram(target, model, HistogramGrid::planar_default());
      },
      py::arg("target"), py::arg("model"),
      "KL(target || model) on the standard 64x64 grid over [-4.5, 4.5]^2");

  m.def(
      "w2_assignment",
      [](const Mat& p, const Mat& q, Eigen::Index n, int repeats,
         std::uint64_t seed) {
        Rng rng(seed);
        W2Estimate est = w2_assignment(p, q, n, repeats, rng);
        return py::make_tuple(est.mean, est.se);
      },
      py::arg("p"), py::arg("q"), py::arg("n") = 512, py::arg("repeats") = 8,
      py::arg("seed") = 1,
      "Squared W2 estimate (mean, se) via exact assignment on subsamples");

  py::class_<PyFlowMap>(m, "FlowMap")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("dim", &PyFlowMap::dim)
      .def_property_readonly("num_classes", &PyFlowMap::num_classes)
      .def("value", &PyFlowMap::value, py::arg("s"), py::arg("t"),
           py::arg("x"), py::arg("label") = -1)
      .def("dt", &PyFlowMap::dt, py::arg("s"), py::arg("t"), py::arg("x"),
           py::arg("label") = -1)
      .def("ds", &PyFlowMap::ds, py::arg("s"), py::arg("t"), py::arg("x"),
           py::arg("label") = -1)
      .def("jvp", &PyFlowMap::jvp, py::arg("s"), py::arg("t"), py::arg("x"),
           py::arg("dir"), py::arg("label") = -1)
      .def("sample", &PyFlowMap::sample, py::arg("x0"), py::arg("steps") = 1,
           py::arg("label") = -1)
      .def("restyle", &PyFlowMap::restyle, py::arg("x1"),
           py::arg("label_from"), py::arg("label_to"),
           py::arg("s_prime") = 0.3, py::arg("leg_steps") = 8);

  py::class_<PyVelocity>(m, "Velocity")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("dim", &PyVelocity::dim)
      .def_property_readonly("num_classes", &PyVelocity::num_classes)
      .def("value", &PyVelocity::value, py::arg("t"), py::arg("x"),
           py::arg("label") = -1)
      .def("sample", &PyVelocity::sample, py::arg("x0"), py::arg("steps") = 80,
           py::arg("method") = "heun", py::arg("label") = -1);
}

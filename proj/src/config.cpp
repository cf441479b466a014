#include "flowmap/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowmap/activation.hpp"
#include "flowmap/integrate.hpp"
#include "flowmap/interpolant.hpp"
#include "flowmap/objectives.hpp"
#include "flowmap/schedule.hpp"

namespace flowmap {

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<double> parse_doubles(const std::string& key,
                                  const std::string& v) {
  std::vector<double> out;
  for (const auto& piece : split_list(v)) out.push_back(parse_double(key, piece));
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& piece : split_list(v)) {
    long long x = parse_int(key, piece);
    out.push_back(static_cast<int>(x));
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (task != "checkerboard" && task != "checkerboard-2class" &&
      task != "gaussian")
    throw ConfigError("unknown task '" + task + "'");
  if (task == "gaussian") {
    if (gaussian_mean.empty() || gaussian_mean.size() != gaussian_sigma.size())
      throw ConfigError("gaussian task mean/sigma lengths disagree");
    for (double s : gaussian_sigma)
      if (!(s > 0.0)) throw ConfigError("gaussian sigma must be positive");
  }
  schedule_kind_from_string(schedule);
  if (!(ve_horizon > 1.0)) throw ConfigError("ve horizon must exceed 1");
  TimeWeight::parse(weight);
  if (hidden.empty()) throw ConfigError("network needs >= 1 hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden width must be positive");
  activation_from_string(activation);
  if (time_frequencies < 1 || time_frequencies > 24)
    throw ConfigError("time-frequencies must be in [1,24]");
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0,1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (!(adam.lr_decay > 0.0 && adam.lr_decay <= 1.0))
    throw ConfigError("lr-decay must lie in (0,1]");
  if (adam.decay_interval < 1) throw ConfigError("decay-interval must be >= 1");
  loss_kind_from_string(loss);
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(fmm_lambda >= 0.0)) throw ConfigError("fmm-lambda must be >= 0");
  if (pfmm_grid < 2) throw ConfigError("pfmm-grid must be >= 2");
  if (map_steps.empty()) throw ConfigError("eval map-steps must be nonempty");
  for (int n : map_steps)
    if (n < 1) throw ConfigError("eval map-steps entries must be >= 1");
  if (kl_samples < 1000) throw ConfigError("kl-samples must be >= 1000");
  if (sample_rows < 100) throw ConfigError("sample-rows must be >= 100");
  if (w2_points < 2) throw ConfigError("w2-points must be >= 2");
  if (w2_repeats < 1) throw ConfigError("w2-repeats must be >= 1");
  if (ode_steps < 1) throw ConfigError("ode-steps must be >= 1");
  ode_method_from_string(ode_method);
  if (!(restyle_pivot > 0.0 && restyle_pivot < 1.0))
    throw ConfigError("restyle pivot must lie in (0,1)");
  if (restyle_leg_steps < 1) throw ConfigError("restyle legs need >= 1 step");
  if (out.empty()) throw ConfigError("output directory must be set");
}

void ExperimentConfig::apply_paper_scale() {
  hidden.assign(6, 512);
  steps = 50000;
}

int ExperimentConfig::task_classes() const {
  return task == "checkerboard-2class" ? 2 : 0;
}

int ExperimentConfig::task_dim() const {
  return task == "gaussian" ? static_cast<int>(gaussian_mean.size()) : 2;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  auto where = [&] { return " (line " + std::to_string(lineno) + ")"; };
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("unterminated section header" + where());
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value" + where());
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key" + where());
    std::string full = section + "." + key;

    if (full == "task.kind") cfg.task = value;
    else if (full == "task.mean") cfg.gaussian_mean = parse_doubles(full, value);
    else if (full == "task.sigma") cfg.gaussian_sigma = parse_doubles(full, value);
    else if (full == "schedule.kind") cfg.schedule = value;
    else if (full == "schedule.ve-horizon") cfg.ve_horizon = parse_double(full, value);
    else if (full == "weight.kind") cfg.weight = value;
    else if (full == "network.hidden") cfg.hidden = parse_ints(full, value);
    else if (full == "network.activation") cfg.activation = value;
    else if (full == "network.time-frequencies") cfg.time_frequencies = static_cast<int>(parse_int(full, value));
    else if (full == "optimizer.lr") cfg.adam.lr = parse_double(full, value);
    else if (full == "optimizer.beta1") cfg.adam.beta1 = parse_double(full, value);
    else if (full == "optimizer.beta2") cfg.adam.beta2 = parse_double(full, value);
    else if (full == "optimizer.eps") cfg.adam.eps = parse_double(full, value);
    else if (full == "optimizer.lr-decay") cfg.adam.lr_decay = parse_double(full, value);
    else if (full == "optimizer.decay-interval") cfg.adam.decay_interval = static_cast<int>(parse_int(full, value));
    else if (full == "train.loss") cfg.loss = value;
    else if (full == "train.steps") cfg.steps = parse_int(full, value);
    else if (full == "train.batch") cfg.batch = static_cast<int>(parse_int(full, value));
    else if (full == "train.fmm-lambda") cfg.fmm_lambda = parse_double(full, value);
    else if (full == "train.pfmm-grid") cfg.pfmm_grid = static_cast<int>(parse_int(full, value));
    else if (full == "train.pfmm-warm-start") cfg.pfmm_warm_start = parse_bool(full, value);
    else if (full == "train.teacher") cfg.teacher = value;
    else if (full == "eval.map-steps") cfg.map_steps = parse_ints(full, value);
    else if (full == "eval.kl-samples") cfg.kl_samples = parse_int(full, value);
    else if (full == "eval.sample-rows") cfg.sample_rows = static_cast<int>(parse_int(full, value));
    else if (full == "eval.w2-points") cfg.w2_points = static_cast<int>(parse_int(full, value));
    else if (full == "eval.w2-repeats") cfg.w2_repeats = static_cast<int>(parse_int(full, value));
    else if (full == "eval.ode-steps") cfg.ode_steps = static_cast<int>(parse_int(full, value));
    else if (full == "eval.ode-method") cfg.ode_method = value;
    else if (full == "restyle.pivot") cfg.restyle_pivot = parse_double(full, value);
    else if (full == "restyle.leg-steps") cfg.restyle_leg_steps = static_cast<int>(parse_int(full, value));
    else if (full == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_int(full, value));
    else if (full == "run.out") cfg.out = value;
    else throw ConfigError("unknown config key '" + full + "'" + where());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[task]\n";
  os << "kind = " << cfg.task << "\n";
  os << "mean = " << join(cfg.gaussian_mean, fmt) << "\n";
  os << "sigma = " << join(cfg.gaussian_sigma, fmt) << "\n";
  os << "\n[schedule]\n";
  os << "kind = " << cfg.schedule << "\n";
  os << "ve-horizon = " << fmt(cfg.ve_horizon) << "\n";
  os << "\n[weight]\n";
  os << "kind = " << cfg.weight << "\n";
  os << "\n[network]\n";
  os << "hidden = "
     << join(cfg.hidden, [](int v) { return std::to_string(v); }) << "\n";
  os << "activation = " << cfg.activation << "\n";
  os << "time-frequencies = " << cfg.time_frequencies << "\n";
  os << "\n[optimizer]\n";
  os << "lr = " << fmt(cfg.adam.lr) << "\n";
  os << "beta1 = " << fmt(cfg.adam.beta1) << "\n";
  os << "beta2 = " << fmt(cfg.adam.beta2) << "\n";
  os << "eps = " << fmt(cfg.adam.eps) << "\n";
  os << "lr-decay = " << fmt(cfg.adam.lr_decay) << "\n";
  os << "decay-interval = " << cfg.adam.decay_interval << "\n";
  os << "\n[train]\n";
  os << "loss = " << cfg.loss << "\n";
  os << "steps = " << cfg.steps << "\n";
  os << "batch = " << cfg.batch << "\n";
  os << "fmm-lambda = " << fmt(cfg.fmm_lambda) << "\n";
  os << "pfmm-grid = " << cfg.pfmm_grid << "\n";
  os << "pfmm-warm-start = " << (cfg.pfmm_warm_start ? "true" : "false")
     << "\n";
  os << "teacher = " << cfg.teacher << "\n";
  os << "\n[eval]\n";
  os << "map-steps = "
     << join(cfg.map_steps, [](int v) { return std::to_string(v); }) << "\n";
  os << "kl-samples = " << cfg.kl_samples << "\n";
  os << "sample-rows = " << cfg.sample_rows << "\n";
  os << "w2-points = " << cfg.w2_points << "\n";
  os << "w2-repeats = " << cfg.w2_repeats << "\n";
  os << "ode-steps = " << cfg.ode_steps << "\n";
  os << "ode-method = " << cfg.ode_method << "\n";
  os << "\n[restyle]\n";
  os << "pivot = " << fmt(cfg.restyle_pivot) << "\n";
  os << "leg-steps = " << cfg.restyle_leg_steps << "\n";
  os << "\n[run]\n";
  os << "seed = " << cfg.seed << "\n";
  os << "out = " << cfg.out << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace flowmap

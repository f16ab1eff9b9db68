// Copyright 2026 The obsctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OBSCTL_TOOLS_CONFIG_HPP_
#define OBSCTL_TOOLS_CONFIG_HPP_

// TOML run configuration for the obsctl command-line tool. Every key that is
// not consumed by the loader is reported as an error with its source line.

#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <toml.hpp>

#include "obsctl/obsctl.hpp"

namespace oc::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thin wrapper over a parsed table that records which dotted keys were read.
class ConfigReader {
 public:
  ConfigReader(toml::table root, std::string name) : root_(std::move(root)), name_(std::move(name)) {}

  static ConfigReader from_file(const std::filesystem::path& path) {
    try {
      return {toml::parse_file(path.string()), path.string()};
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << path.string() << ":" << e.source().begin.line << ": parse error: " << e.description();
      throw ConfigError(os.str());
    }
  }

  static ConfigReader from_string(std::string_view text, std::string name = "<string>") {
    try {
      return {toml::parse(text, name), name};
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << name << ":" << e.source().begin.line << ": parse error: " << e.description();
      throw ConfigError(os.str());
    }
  }

  bool has(const std::string& key) const { return static_cast<bool>(root_.at_path(key)); }

  bool has_table(const std::string& key) const {
    const toml::node_view<const toml::node> v = root_.at_path(key);
    return v && v.is_table();
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::ostringstream os;
    os << name_;
    if (const auto v = root_.at_path(key); v && v.node()->source().begin.line > 0)
      os << ":" << v.node()->source().begin.line;
    os << ": field '" << key << "': " << what;
    throw ConfigError(os.str());
  }

  double number(const std::string& key, std::optional<double> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (auto d = v.value<double>()) return *d;
    fail(key, "expected a number");
  }

  long long integer(const std::string& key, std::optional<long long> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (v.is_integer()) return *v.value<long long>();
    fail(key, "expected an integer");
  }

  bool boolean(const std::string& key, std::optional<bool> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (v.is_boolean()) return *v.value<bool>();
    fail(key, "expected true or false");
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (v.is_string()) return *v.value<std::string>();
    fail(key, "expected a string");
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    const toml::array* arr = v.as_array();
    if (!arr) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *arr) {
      const auto d = e.value<double>();
      if (!d) fail(key, "expected an array of numbers");
      out.push_back(*d);
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key,
                                   std::optional<std::vector<std::string>> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    const toml::array* arr = v.as_array();
    if (!arr) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const toml::node& e : *arr) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(*e.value<std::string>());
    }
    return out;
  }

  // Row-major nested arrays; a bare number is a 1x1 matrix and a flat array
  // of numbers is a diagonal.
  Matrix matrix(const std::string& key, std::optional<Matrix> fallback = {}) {
    const auto v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (auto d = v.value<double>()) return Matrix::Constant(1, 1, *d);
    const toml::array* arr = v.as_array();
    if (!arr || arr->empty()) fail(key, "expected a matrix (nested arrays of numbers)");
    if (!arr->front().is_array()) {
      const std::vector<double> diag = numbers(key);
      Matrix m = Matrix::Zero(static_cast<Index>(diag.size()), static_cast<Index>(diag.size()));
      for (std::size_t i = 0; i < diag.size(); ++i) m(static_cast<Index>(i), static_cast<Index>(i)) = diag[i];
      return m;
    }
    std::vector<std::vector<double>> rows;
    for (const toml::node& r : *arr) {
      const toml::array* ra = r.as_array();
      if (!ra) fail(key, "matrix rows must be arrays");
      rows.emplace_back();
      for (const toml::node& e : *ra) {
        const auto d = e.value<double>();
        if (!d) fail(key, "matrix entries must be numbers");
        rows.back().push_back(*d);
      }
      if (rows.back().size() != rows.front().size()) fail(key, "matrix rows differ in length");
    }
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
  }

  Vector vector(const std::string& key, std::optional<Vector> fallback = {}) {
    if (!has(key) && fallback) {
      used_.insert(key);
      return *fallback;
    }
    const std::vector<double> v = numbers(key);
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }

  // Array of numeric rows, e.g. waypoint lists.
  std::vector<std::vector<double>> rows(const std::string& key) {
    const auto v = lookup(key, false);
    const toml::array* arr = v.as_array();
    if (!arr) fail(key, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (const toml::node& r : *arr) {
      const toml::array* ra = r.as_array();
      if (!ra) fail(key, "expected an array of arrays");
      out.emplace_back();
      for (const toml::node& e : *ra) {
        const auto d = e.value<double>();
        if (!d) fail(key, "entries must be numbers");
        out.back().push_back(*d);
      }
    }
    return out;
  }

  // Marks a key as known without reading it.
  void accept(const std::string& key) { used_.insert(key); }

  // Throws on the first key that no loader consumed.
  void finish() const { check_table(root_, ""); }

  const std::string& name() const { return name_; }

 private:
  toml::node_view<const toml::node> lookup(const std::string& key, bool optional) {
    used_.insert(key);
    const toml::node_view<const toml::node> v = std::as_const(root_).at_path(key);
    if (!v && !optional) {
      std::ostringstream os;
      os << name_ << ": field '" << key << "': required but missing";
      throw ConfigError(os.str());
    }
    return v;
  }

  void check_table(const toml::table& t, const std::string& prefix) const {
    for (const auto& [k, node] : t) {
      const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (used_.count(key)) continue;
      if (const toml::table* sub = node.as_table()) {
        check_table(*sub, key);
        continue;
      }
      std::ostringstream os;
      os << name_ << ":" << node.source().begin.line << ": field '" << key << "': unknown key";
      throw ConfigError(os.str());
    }
  }

  toml::table root_;
  std::string name_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Run configuration.

enum class Command { simulate, gains, benchmark, termination_study };

struct ControllerSettings {
  Algorithm algorithm = Algorithm::efficient;
  BackendKind backend = BackendKind::kf;
  ObjectiveMode mode = ObjectiveMode::duality;
  ControllerConfig config{};
  double alpha = 1.0;
  int controller_substeps = 4;
  UkfParams ukf{};
};

struct Checks {
  std::optional<double> cost_min;
  std::optional<double> cost_max;
  std::optional<double> final_theta_max;
  std::optional<double> final_x_max;
};

struct StudySettings {
  std::vector<int> orders{1, 2, 3, 4, 5};
  int horizon = 60;
  int fit_from = 20;
  double state_weight = 1.0;
  double rate_weight = 100.0;
  bool include_msd = true;
  double rho_tol = 1e-4;
  std::vector<double> tau_grid{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
};

struct GainsSettings {
  int max_horizon = 60;
  double eps = 1e-6;
};

struct BenchmarkSettings {
  std::vector<BenchmarkCase> cases;
  std::vector<int> horizons{10, 25, 50, 100, 150, 200, 250};
  int repetitions = 100;
  int warmup = 5;
  double max_quadratic_share = 0.05;
};

struct RunConfig {
  Command command = Command::simulate;
  std::string plant;  // msd | linear_drag | cartpole
  ControllerSettings controller;
  MsdStepTask msd;
  ObstacleTask obstacle = ObstacleTask::standard();
  CartPoleTask cartpole;
  Checks checks;
  StudySettings study;
  GainsSettings gains;
  BenchmarkSettings benchmark;
  std::string output_dir;

  bool linear_plant() const { return plant == "msd" || plant == "linear_drag"; }
};

inline const char* command_name(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::gains: return "gains";
    case Command::benchmark: return "benchmark";
    case Command::termination_study: return "termination-study";
  }
  return "?";
}

namespace detail {

inline Algorithm parse_algorithm(ConfigReader& r, const std::string& key, const std::string& v) {
  if (v == "naive") return Algorithm::naive;
  if (v == "forward_only") return Algorithm::forward_only;
  if (v == "efficient") return Algorithm::efficient;
  if (v == "anytime") return Algorithm::anytime;
  r.fail(key, "unknown algorithm '" + v + "' (naive, forward_only, efficient, anytime)");
}

inline BackendKind parse_backend(ConfigReader& r, const std::string& key, const std::string& v) {
  if (v == "kf") return BackendKind::kf;
  if (v == "ekf") return BackendKind::ekf;
  if (v == "ukf") return BackendKind::ukf;
  r.fail(key, "unknown backend '" + v + "' (kf, ekf, ukf)");
}

inline ObjectiveMode parse_mode(ConfigReader& r, const std::string& key, const std::string& v) {
  if (v == "duality") return ObjectiveMode::duality;
  if (v == "sqp") return ObjectiveMode::sqp;
  if (v == "gradient") return ObjectiveMode::gradient;
  r.fail(key, "unknown mode '" + v + "' (duality, sqp, gradient)");
}

inline PlantKind parse_plant(ConfigReader& r, const std::string& key, const std::string& v) {
  if (v == "msd") return PlantKind::msd;
  if (v == "linear_drag") return PlantKind::linear_drag;
  if (v == "cartpole") return PlantKind::cartpole;
  r.fail(key, "unknown plant '" + v + "' (msd, linear_drag, cartpole)");
}

inline void require_positive(ConfigReader& r, const std::string& key, double v) {
  if (!(v > 0.0)) r.fail(key, "must be positive");
}

inline void require_shape(ConfigReader& r, const std::string& key, const Matrix& m, Index rows, Index cols) {
  if (m.rows() != rows || m.cols() != cols)
    r.fail(key, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
}

inline void load_controller(ConfigReader& r, RunConfig& c) {
  ControllerSettings& s = c.controller;
  s.algorithm = parse_algorithm(r, "controller.algorithm",
                                r.string("controller.algorithm", c.plant == "cartpole" ? "forward_only" : "efficient"));
  s.backend = parse_backend(r, "controller.backend",
                            r.string("controller.backend", c.plant == "cartpole" ? "ekf" : "kf"));
  s.mode = parse_mode(r, "controller.mode",
                      r.string("controller.mode", c.plant == "msd" ? "duality"
                                                  : c.plant == "cartpole" ? "gradient" : "sqp"));
  const long long h = r.integer("controller.horizon", 50);
  if (h < 0 || h > 100000) r.fail("controller.horizon", "must lie in [0, 100000]");
  s.config.horizon = static_cast<int>(h);
  s.config.rho_tol = r.number("controller.rho_tol", 1e-4);
  s.config.tau_tol = r.number("controller.tau_tol", 1e-7);
  if (s.config.rho_tol < 0.0) r.fail("controller.rho_tol", "must be non-negative");
  if (s.config.tau_tol < 0.0) r.fail("controller.tau_tol", "must be non-negative");
  s.config.termination = r.boolean("controller.termination", true);
  s.config.peak_guard = r.boolean("controller.peak_guard", true);
  const std::string form = r.string("controller.covariance_form", "standard");
  if (form == "standard") {
    s.config.covariance_form = CovarianceForm::standard;
  } else if (form == "joseph") {
    s.config.covariance_form = CovarianceForm::joseph;
  } else {
    r.fail("controller.covariance_form", "expected 'standard' or 'joseph'");
  }
  s.alpha = r.number("controller.alpha", 1.0);
  require_positive(r, "controller.alpha", s.alpha);

  if (c.plant == "cartpole") {
    const long long sub = r.integer("controller.substeps", 4);
    if (sub < 1) r.fail("controller.substeps", "must be >= 1");
    s.controller_substeps = static_cast<int>(sub);
    if (r.has("controller.ukf_kappa")) {
      s.ukf = UkfParams::with(r.number("controller.ukf_alpha", 1.0), r.number("controller.ukf_beta", 2.0),
                              r.number("controller.ukf_kappa"));
    } else {
      s.ukf.alpha = r.number("controller.ukf_alpha", 1.0);
      s.ukf.beta = r.number("controller.ukf_beta", 2.0);
    }
    try {
      s.ukf.validate(5);
    } catch (const Error& e) {
      r.fail("controller.ukf_alpha", e.what());
    }
    if (s.backend == BackendKind::kf) r.fail("controller.backend", "cartpole needs 'ekf' or 'ukf'");
    if (s.algorithm == Algorithm::anytime)
      r.fail("controller.algorithm", "the any-time algorithm requires an LTI plant");
    if (s.algorithm == Algorithm::efficient && s.backend == BackendKind::ukf)
      r.fail("controller.algorithm", "the efficient algorithm is not available with the ukf backend");
  } else {
    if (s.backend != BackendKind::kf) r.fail("controller.backend", "linear plants use the 'kf' backend");
    if (c.plant == "msd" && s.mode != ObjectiveMode::duality)
      r.fail("controller.mode", "the msd task uses the 'duality' mode");
    if (c.plant == "linear_drag" && s.algorithm == Algorithm::anytime)
      r.fail("controller.algorithm", "the any-time algorithm needs the msd duality task");
  }
  if (c.plant == "cartpole" && s.mode != ObjectiveMode::gradient)
    r.fail("controller.mode", "the cartpole task uses the 'gradient' mode");
}

inline void load_msd(ConfigReader& r, RunConfig& c) {
  MsdStepTask& t = c.msd;
  t.dt = r.number("plant.dt", 0.1);
  require_positive(r, "plant.dt", t.dt);
  t.params.mass = r.number("plant.mass", 1.0);
  t.params.damping = r.number("plant.damping", 1.0);
  t.params.stiffness = r.number("plant.stiffness", 2.0);
  require_positive(r, "plant.mass", t.params.mass);
  t.weights.state = r.matrix("weights.state", t.weights.state);
  t.weights.control = r.matrix("weights.control", t.weights.control);
  t.weights.cross = r.matrix("weights.cross", Matrix(Matrix::Zero(2, 1)));
  t.weights.rate = r.matrix("weights.rate", t.weights.rate);
  require_shape(r, "weights.state", t.weights.state, 2, 2);
  require_shape(r, "weights.control", t.weights.control, 1, 1);
  require_shape(r, "weights.cross", t.weights.cross, 2, 1);
  require_shape(r, "weights.rate", t.weights.rate, 1, 1);
  try {
    t.weights.validate();
  } catch (const Error& e) {
    r.fail("weights", e.what());
  }
  t.penalize_control = r.boolean("weights.penalize_control", c.command == Command::gains);
  t.step_time = r.number("trajectory.step_time", 1.0);
  t.step_size = r.number("trajectory.step_size", 1.0);
  t.predictive = r.boolean("trajectory.predictive", true);
  t.t_end = r.number("simulation.t_end", 7.5);
  t.substeps = static_cast<int>(r.integer("simulation.substeps", 10));
  t.x0 = r.vector("simulation.initial_state", Vector(Vector::Zero(2)));
  if (t.x0.size() != 2) r.fail("simulation.initial_state", "expected 2 entries (x, xdot)");
}

inline void load_obstacle(ConfigReader& r, RunConfig& c) {
  ObstacleTask& t = c.obstacle;
  t.dt = r.number("plant.dt", 0.1);
  require_positive(r, "plant.dt", t.dt);
  t.params.mass = r.number("plant.mass", 1.0);
  t.params.drag = r.number("plant.damping", 1.0);
  require_positive(r, "plant.mass", t.params.mass);
  t.objective.state_weight = r.matrix("weights.state", t.objective.state_weight);
  require_shape(r, "weights.state", t.objective.state_weight, 4, 4);
  t.objective.obstacle_weight = r.number("weights.obstacle", t.objective.obstacle_weight);
  t.rate = r.matrix("weights.rate", t.rate);
  require_shape(r, "weights.rate", t.rate, 2, 2);
  t.objective.cost.zero_distance = r.number("trajectory.zero_distance", 0.5);
  require_positive(r, "trajectory.zero_distance", t.objective.cost.zero_distance);
  t.objective.cost.scale = r.number("trajectory.obstacle_scale", 0.01);
  if (r.has("trajectory.times") || r.has("trajectory.points")) {
    const std::vector<double> times = r.numbers("trajectory.times");
    const auto pts = r.rows("trajectory.points");
    if (times.size() != pts.size()) r.fail("trajectory.points", "must match trajectory.times in length");
    std::vector<Vector> points;
    for (const auto& p : pts) {
      if (p.size() != 2) r.fail("trajectory.points", "each waypoint is [x, y]");
      points.push_back(Eigen::Map<const Vector>(p.data(), 2));
    }
    try {
      t.path = PiecewiseLinearPath(times, points);
    } catch (const Error& e) {
      r.fail("trajectory.times", e.what());
    }
  }
  if (r.has("trajectory.obstacles")) {
    t.objective.obstacles.clear();
    for (const auto& o : r.rows("trajectory.obstacles")) {
      if (o.size() != 3 || !(o[2] > 0.0))
        r.fail("trajectory.obstacles", "each obstacle is [cx, cy, radius] with radius > 0");
      t.objective.obstacles.push_back({o[0], o[1], o[2]});
    }
  }
  t.t_end = r.number("simulation.t_end", 12.0);
  t.substeps = static_cast<int>(r.integer("simulation.substeps", 10));
  t.x0 = r.vector("simulation.initial_state", Vector(Vector::Zero(4)));
  if (t.x0.size() != 4) r.fail("simulation.initial_state", "expected 4 entries (x, y, xdot, ydot)");
}

inline void load_cartpole(ConfigReader& r, RunConfig& c) {
  CartPoleTask& t = c.cartpole;
  t.dt = r.number("plant.dt", 0.05);
  require_positive(r, "plant.dt", t.dt);
  t.params.cart_mass = r.number("plant.cart_mass", t.params.cart_mass);
  t.params.pole_mass = r.number("plant.pole_mass", t.params.pole_mass);
  t.params.length = r.number("plant.length", t.params.length);
  t.params.linear_damping = r.number("plant.linear_damping", t.params.linear_damping);
  t.params.angular_damping = r.number("plant.angular_damping", t.params.angular_damping);
  t.params.gravity = r.number("plant.gravity", t.params.gravity);
  require_positive(r, "plant.cart_mass", t.params.cart_mass);
  require_positive(r, "plant.pole_mass", t.params.pole_mass);
  require_positive(r, "plant.length", t.params.length);
  t.state_weight = r.matrix("weights.state", t.state_weight);
  require_shape(r, "weights.state", t.state_weight, 4, 4);
  t.rate_weight = r.number("weights.rate", t.rate_weight);
  require_positive(r, "weights.rate", t.rate_weight);
  t.t_end = r.number("simulation.t_end", 10.0);
  t.substeps = static_cast<int>(r.integer("simulation.substeps", 10));
  t.x0 = r.vector("simulation.initial_state", t.x0);
  if (t.x0.size() != 4) r.fail("simulation.initial_state", "expected 4 entries (x, v, theta, omega)");
}

inline void load_checks(ConfigReader& r, RunConfig& c) {
  const auto opt = [&](const std::string& key) -> std::optional<double> {
    if (!r.has(key)) return std::nullopt;
    return r.number(key);
  };
  c.checks.cost_min = opt("checks.cost_min");
  c.checks.cost_max = opt("checks.cost_max");
  c.checks.final_theta_max = opt("checks.final_theta_max");
  c.checks.final_x_max = opt("checks.final_x_max");
}

inline void load_plant_section(ConfigReader& r, RunConfig& c) {
  if (!r.has_table("plant")) r.fail("plant", "required table [plant] is missing");
  if (!r.has("plant.kind")) r.fail("plant.kind", "required but missing (msd, linear_drag, cartpole)");
  c.plant = r.string("plant.kind");
  parse_plant(r, "plant.kind", c.plant);
  if (c.plant == "msd") {
    load_msd(r, c);
  } else if (c.plant == "linear_drag") {
    load_obstacle(r, c);
  } else {
    load_cartpole(r, c);
  }
  if (r.has("simulation.substeps") && r.integer("simulation.substeps") < 1)
    r.fail("simulation.substeps", "must be >= 1");
}

inline void load_study(ConfigReader& r, RunConfig& c) {
  StudySettings& s = c.study;
  if (r.has("study.orders")) {
    s.orders.clear();
    for (double o : r.numbers("study.orders")) {
      if (o != static_cast<int>(o) || o < 1 || o > 5) r.fail("study.orders", "orders must be integers in [1, 5]");
      s.orders.push_back(static_cast<int>(o));
    }
  }
  s.horizon = static_cast<int>(r.integer("study.horizon", 60));
  s.fit_from = static_cast<int>(r.integer("study.fit_from", 20));
  if (s.horizon < 2 || s.fit_from < 0 || s.fit_from >= s.horizon - 1)
    r.fail("study.fit_from", "need 0 <= fit_from < horizon - 1");
  s.state_weight = r.number("study.state_weight", 1.0);
  s.rate_weight = r.number("study.rate_weight", 100.0);
  require_positive(r, "study.state_weight", s.state_weight);
  require_positive(r, "study.rate_weight", s.rate_weight);
  s.include_msd = r.boolean("study.include_msd", true);
  s.rho_tol = r.number("study.rho_tol", 1e-4);
  s.tau_grid = r.numbers("study.tau_grid", s.tau_grid);
}

inline void load_gains(ConfigReader& r, RunConfig& c) {
  c.gains.max_horizon = static_cast<int>(r.integer("gains.max_horizon", 60));
  if (c.gains.max_horizon < 0) r.fail("gains.max_horizon", "must be >= 0");
  c.gains.eps = r.number("gains.eps", 1e-6);
  if (!(c.gains.eps > 0.0 && c.gains.eps < 1.0)) r.fail("gains.eps", "must lie in (0, 1)");
}

// Case strings are "plant/algorithm/backend[/mode]".
inline BenchmarkCase parse_case(ConfigReader& r, const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, '/');) parts.push_back(p);
  if (parts.size() < 3 || parts.size() > 4)
    r.fail("benchmark.cases", "case '" + text + "' is not plant/algorithm/backend[/mode]");
  BenchmarkCase c;
  c.plant = parse_plant(r, "benchmark.cases", parts[0]);
  c.algorithm = parse_algorithm(r, "benchmark.cases", parts[1]);
  c.backend = parse_backend(r, "benchmark.cases", parts[2]);
  c.mode = parts.size() == 4 ? parse_mode(r, "benchmark.cases", parts[3])
           : c.plant == PlantKind::msd ? ObjectiveMode::duality
           : c.plant == PlantKind::cartpole ? ObjectiveMode::gradient
                                            : ObjectiveMode::sqp;
  try {
    (void)benchmark_update(c, 1)();
  } catch (const Error& e) {
    r.fail("benchmark.cases", "case '" + text + "': " + e.what());
  }
  return c;
}

inline void load_benchmark(ConfigReader& r, RunConfig& c) {
  BenchmarkSettings& b = c.benchmark;
  for (const std::string& s : r.strings("benchmark.cases")) b.cases.push_back(parse_case(r, s));
  if (b.cases.empty()) r.fail("benchmark.cases", "at least one case is required");
  if (r.has("benchmark.horizons")) {
    b.horizons.clear();
    for (double n : r.numbers("benchmark.horizons")) {
      if (n != static_cast<int>(n) || n < 0) r.fail("benchmark.horizons", "horizons are non-negative integers");
      b.horizons.push_back(static_cast<int>(n));
    }
  }
  if (b.horizons.size() < 3) r.fail("benchmark.horizons", "need at least three horizons for the fit");
  b.repetitions = static_cast<int>(r.integer("benchmark.repetitions", 100));
  b.warmup = static_cast<int>(r.integer("benchmark.warmup", 5));
  if (b.repetitions < 1) r.fail("benchmark.repetitions", "must be >= 1");
  if (b.warmup < 0) r.fail("benchmark.warmup", "must be >= 0");
  b.max_quadratic_share = r.number("benchmark.max_quadratic_share", 0.05);
}

}  // namespace detail

inline RunConfig load_run_config(ConfigReader& r, Command cmd) {
  RunConfig c;
  c.command = cmd;
  c.output_dir = r.string("output.dir", "");
  switch (cmd) {
    case Command::simulate:
      detail::load_plant_section(r, c);
      detail::load_controller(r, c);
      detail::load_checks(r, c);
      break;
    case Command::gains:
      detail::load_plant_section(r, c);
      if (c.plant != "msd") r.fail("plant.kind", "gains requires an LTI plant with duality weights (msd)");
      if (!c.msd.penalize_control)
        r.fail("weights.penalize_control", "gains needs the full-state measurement (penalize_control = true)");
      detail::load_gains(r, c);
      break;
    case Command::termination_study:
      detail::load_study(r, c);
      break;
    case Command::benchmark:
      detail::load_benchmark(r, c);
      break;
  }
  r.finish();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, Command cmd) {
  ConfigReader r = ConfigReader::from_file(path);
  return load_run_config(r, cmd);
}

}  // namespace oc::cli

#endif  // OBSCTL_TOOLS_CONFIG_HPP_

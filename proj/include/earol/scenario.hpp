#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "earol/lio_estimator.hpp"
#include "earol/sim_sensors.hpp"
#include "earol/traj_opt.hpp"
#include "earol/yaw_planner.hpp"

namespace earol {

// One parsed config section: key -> raw value string. Sections with the
// same name may repeat ([box], [wall]).
struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  double number(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : std::stod(it->second);
  }
  int integer(const std::string& key, int fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : std::stoi(it->second);
  }
  bool boolean(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    return it->second == "true" || it->second == "1" || it->second == "yes";
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  Vec3 vec3(const std::string& key, const Vec3& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::istringstream ss(it->second);
    Vec3 v;
    if (!(ss >> v.x() >> v.y() >> v.z())) {
      throw std::invalid_argument("config: bad vector for key '" + key + "'");
    }
    return v;
  }
  // list of 3-vectors separated by '|'
  std::vector<Vec3> vec3_list(const std::string& key) const {
    std::vector<Vec3> out;
    auto it = values.find(key);
    if (it == values.end()) return out;
    std::string item;
    std::istringstream ss(it->second);
    while (std::getline(ss, item, '|')) {
      std::istringstream vs(item);
      Vec3 v;
      if (!(vs >> v.x() >> v.y() >> v.z())) {
        throw std::invalid_argument("config: bad vector list for key '" + key + "'");
      }
      out.push_back(v);
    }
    return out;
  }
};

// Sectioned key=value text file. '#' starts a comment; section headers are
// [name]; keys and values are trimmed.
class ScenarioConfig {
 public:
  static ScenarioConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  static ScenarioConfig parse(const std::string& content) {
    ScenarioConfig cfg;
    ConfigSection current;
    std::istringstream in(content);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw std::invalid_argument("config line " + std::to_string(lineno) +
                                      ": malformed section header");
        }
        if (!current.name.empty()) cfg.sections_.push_back(current);
        current = ConfigSection{};
        current.name = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos || current.name.empty()) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": expected key = value inside a section");
      }
      current.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    if (!current.name.empty()) cfg.sections_.push_back(current);
    return cfg;
  }

  const ConfigSection& section(const std::string& name) const {
    for (const auto& s : sections_) {
      if (s.name == name) return s;
    }
    static const ConfigSection empty;
    return empty;
  }

  std::vector<const ConfigSection*> all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections_) {
      if (s.name == name) out.push_back(&s);
    }
    return out;
  }

 private:
  std::vector<ConfigSection> sections_;
};

// Dynamic ring target riding a waypoint-looping ground vehicle.
struct TargetSpec {
  bool active = false;
  std::vector<Vec3> waypoints;  // z ignored; ring center height below
  double speed = 0.4;
  double ring_radius = 0.35;
  double ring_height = 0.6;
  double tube_radius = 0.04;
  double start_time = 0.0;

  // piecewise-linear position along the waypoint chain (ping-pong loop)
  Vec3 position_at(double t) const {
    if (waypoints.empty()) return Vec3::Zero();
    if (waypoints.size() == 1 || t <= start_time || speed <= 0.0) {
      Vec3 p = waypoints.front();
      p.z() = ring_height;
      return p;
    }
    std::vector<double> seg_len;
    double total = 0.0;
    for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
      const double l = (waypoints[i + 1] - waypoints[i]).head<2>().norm();
      seg_len.push_back(l);
      total += l;
    }
    double s = std::fmod((t - start_time) * speed, 2.0 * total);
    if (s > total) s = 2.0 * total - s;  // ping-pong
    for (size_t i = 0; i < seg_len.size(); ++i) {
      if (s <= seg_len[i] || i + 1 == seg_len.size()) {
        const double f = seg_len[i] > 0 ? std::min(1.0, s / seg_len[i]) : 0.0;
        Vec3 p = waypoints[i] + f * (waypoints[i + 1] - waypoints[i]);
        p.z() = ring_height;
        return p;
      }
      s -= seg_len[i];
    }
    Vec3 p = waypoints.back();
    p.z() = ring_height;
    return p;
  }

  double heading_at(double t) const {
    const double h = 0.05;
    const Vec3 a = position_at(t), b = position_at(t + h);
    const Vec3 d = b - a;
    if (d.head<2>().norm() < 1e-9) return 0.0;
    return std::atan2(d.y(), d.x());
  }

  std::optional<RingState> ring_at(double t) const {
    if (!active || t < start_time) return std::nullopt;
    return make_ring_state(position_at(t), heading_at(t), ring_radius, tube_radius);
  }
};

enum class YawMode { kTangent, kFixed };

// Everything a run needs, resolved from the config file.
struct Scenario {
  std::string name = "unnamed";
  uint64_t seed = 1;
  double duration = 20.0;
  double calibration_hold = 1.5;

  World world;
  SensorModel sensor;
  ImuSimConfig imu;
  double imu_rate = 200.0;

  std::vector<Vec3> motion_waypoints;
  double motion_speed = 1.0;
  YawMode yaw_mode = YawMode::kTangent;
  double yaw_fixed = 0.0;

  TargetSpec target;

  double grid_cell = 0.25;

  YawCostWeights yaw_weights{0.3, 0.6, 0.1};
  YawPlannerParams yaw_params;
  PlannerLimits limits;
  Vec3 plan_goal = Vec3::Zero();
  int plan_pieces = 6;

  IeskfParams ieskf;
  int downsample_target = 2000;
  double downsample_eta = 0.3;
  double keyframe_spacing = 2.0;

  static Scenario load(const std::string& path) {
    return from_config(ScenarioConfig::parse_file(path));
  }

  static Scenario from_config(const ScenarioConfig& cfg) {
    Scenario s;
    const auto& sc = cfg.section("scenario");
    s.name = sc.text("name", s.name);
    s.seed = static_cast<uint64_t>(sc.number("seed", 1));
    s.duration = sc.number("duration", s.duration);
    s.calibration_hold = sc.number("calibration_hold", s.calibration_hold);

    const auto& se = cfg.section("sensor");
    s.sensor.tilt_pitch = se.number("tilt_deg", 20.0) * kPi / 180.0;
    s.sensor.inverted = se.boolean("inverted", true);
    s.sensor.fov_min = se.number("fov_min_deg", -7.0) * kPi / 180.0;
    s.sensor.fov_max = se.number("fov_max_deg", 52.0) * kPi / 180.0;
    s.sensor.azimuth_span = se.number("azimuth_deg", 360.0) * kPi / 180.0;
    s.sensor.points_per_scan = se.integer("points_per_scan", 20000);
    s.sensor.scan_duration = 1.0 / se.number("scan_rate", 10.0);
    s.sensor.range_noise = se.number("range_noise", 0.0);
    s.sensor.max_range = se.number("max_range", 40.0);
    s.sensor.height_cut = se.number("height_cut", -1.0);
    s.sensor.t_li = se.vec3("t_li", Vec3::Zero());
    if (!s.sensor.valid()) throw std::invalid_argument("scenario: invalid sensor block");

    const auto& imu = cfg.section("imu");
    s.imu_rate = imu.number("rate", 200.0);
    s.imu.gyro_noise = imu.number("gyro_noise", 0.0);
    s.imu.accel_noise = imu.number("accel_noise", 0.0);
    s.imu.gyro_bias = imu.vec3("gyro_bias", Vec3::Zero());
    s.imu.accel_bias = imu.vec3("accel_bias", Vec3::Zero());

    const auto& w = cfg.section("world");
    s.world.ground = w.boolean("ground", true);
    s.world.bbox_min = w.vec3("extent_min", Vec3(-5, -5, -0.5));
    s.world.bbox_max = w.vec3("extent_max", Vec3(5, 5, 4));
    for (const auto* box : cfg.all("box")) {
      ObstacleBox b;
      b.center = box->vec3("center", Vec3::Zero());
      b.half = 0.5 * box->vec3("size", Vec3::Ones());
      b.yaw = box->number("yaw_deg", 0.0) * kPi / 180.0;
      s.world.boxes.push_back(b);
    }
    for (const auto* wall : cfg.all("wall")) {
      std::istringstream f(wall->text("from", "0 0")), t(wall->text("to", "1 0"));
      double x1, y1, x2, y2;
      f >> x1 >> y1;
      t >> x2 >> y2;
      s.world.boxes.push_back(make_wall(x1, y1, x2, y2,
                                        wall->number("thickness", 0.25),
                                        wall->number("height", 2.5)));
    }

    const auto& m = cfg.section("motion");
    s.motion_waypoints = m.vec3_list("waypoints");
    s.motion_speed = m.number("speed", 1.0);
    s.yaw_mode = m.text("yaw_mode", "tangent") == "fixed" ? YawMode::kFixed
                                                          : YawMode::kTangent;
    s.yaw_fixed = m.number("yaw_fixed_deg", 0.0) * kPi / 180.0;

    const auto& tg = cfg.section("target");
    s.target.active = tg.boolean("active", false);
    s.target.waypoints = tg.vec3_list("waypoints");
    s.target.speed = tg.number("speed", 0.4);
    s.target.ring_radius = tg.number("ring_radius", 0.35);
    s.target.ring_height = tg.number("ring_height", 0.6);
    s.target.start_time = tg.number("start_time", 0.0);

    s.grid_cell = cfg.section("grid").number("cell", 0.25);

    const auto& p = cfg.section("planner");
    const double alpha = p.number("alpha", 0.3);
    const double beta = p.number("beta", 0.6);
    const double gamma = p.number("gamma", 0.1);
    s.yaw_weights = YawCostWeights{alpha, beta, gamma};
    s.yaw_params.n_yaw = p.integer("n_yaw", 24);
    s.yaw_params.dt = p.number("yaw_dt", 0.4);
    s.yaw_params.horizon = p.number("horizon", 2.4);
    s.yaw_params.omega_max = p.number("omega_max", 1.8);
    s.yaw_params.psi_th = p.number("psi_th", 0.1);
    s.yaw_params.fov_width = p.number("fov_width_deg", 70.6) * kPi / 180.0;
    s.yaw_params.replan_rate = p.number("replan_rate", 5.0);
    s.limits.vel_max = p.number("vel_max", 2.0);
    s.limits.acc_max = p.number("acc_max", 4.0);
    s.limits.jerk_max = p.number("jerk_max", 20.0);
    s.limits.clearance = p.number("clearance", 0.5);
    s.limits.w_smooth = p.number("w_smooth", 1.0);
    s.limits.w_feasible = p.number("w_feasible", 1e4);
    s.limits.w_obstacle = p.number("w_obstacle", 1e4);
    s.limits.w_time = p.number("w_time", 20.0);
    s.plan_goal = p.vec3("goal", Vec3::Zero());
    s.plan_pieces = p.integer("pieces", 6);

    const auto& est = cfg.section("estimator");
    s.ieskf.max_iterations = est.integer("max_iterations", 5);
    s.ieskf.damping = est.number("damping", 1e3);
    s.ieskf.entropy_threshold = est.number("h_th", 0.75);
    s.ieskf.eigen_ratio_threshold = est.number("theta_th", 0.05);
    s.ieskf.min_matches = est.integer("min_matches", 50);
    s.ieskf.sigma_meas = est.number("sigma_meas", 0.01);
    s.ieskf.distance_gate = est.number("distance_gate", 0.5);
    s.downsample_target = est.integer("n_target", 2000);
    s.downsample_eta = est.number("eta", 0.3);
    s.keyframe_spacing = est.number("keyframe_spacing", 2.0);

    return s;
  }

  // Ground-truth platform motion: stationary hold, then a minimum-jerk
  // spline through the waypoints with yaw from its own quintic spline.
  GroundTruthMotion build_motion() const {
    if (motion_waypoints.size() < 2) {
      throw std::invalid_argument("scenario: motion needs at least 2 waypoints");
    }
    std::vector<Vec3> inner(motion_waypoints.begin() + 1, motion_waypoints.end() - 1);
    std::vector<double> times;
    for (size_t i = 0; i + 1 < motion_waypoints.size(); ++i) {
      const double len = (motion_waypoints[i + 1] - motion_waypoints[i]).norm();
      times.push_back(std::max(0.5, len / std::max(0.1, motion_speed)));
    }
    BoundaryState s0, sf;
    s0.position = motion_waypoints.front();
    sf.position = motion_waypoints.back();
    PiecewiseTrajectory pos = solve_coefficients(inner, times, s0, sf);

    // yaw spline through segment bearings (unwrapped), rest-to-rest
    std::vector<double> headings;
    if (yaw_mode == YawMode::kFixed) {
      headings.assign(motion_waypoints.size(), yaw_fixed);
    } else {
      for (size_t i = 0; i + 1 < motion_waypoints.size(); ++i) {
        const Vec3 d = motion_waypoints[i + 1] - motion_waypoints[i];
        headings.push_back(std::atan2(d.y(), d.x()));
      }
      headings.push_back(headings.back());
      for (size_t i = 1; i < headings.size(); ++i) {
        while (headings[i] - headings[i - 1] > kPi) headings[i] -= 2 * kPi;
        while (headings[i] - headings[i - 1] < -kPi) headings[i] += 2 * kPi;
      }
    }
    std::vector<Vec3> yaw_inner;
    for (size_t i = 1; i + 1 < headings.size(); ++i) {
      yaw_inner.push_back(Vec3(headings[i], 0, 0));
    }
    BoundaryState y0, yf;
    y0.position = Vec3(headings.front(), 0, 0);
    yf.position = Vec3(headings.back(), 0, 0);
    PiecewiseTrajectory yaw = solve_coefficients(yaw_inner, times, y0, yf);

    return GroundTruthMotion(std::move(pos), calibration_hold, std::move(yaw));
  }
};

}  // namespace earol

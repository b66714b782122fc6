#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "earol/imu_frontend.hpp"
#include "earol/sim_world.hpp"
#include "earol/trajectory.hpp"

namespace earol {

struct LidarPoint {
  Vec3 p = Vec3::Zero();  // sensor frame
  double stamp = 0.0;
};

struct LidarScan {
  std::vector<LidarPoint> points;
  double t_begin = 0.0;
  double t_end = 0.0;
  Vec3 t_li = Vec3::Zero();  // LiDAR origin in the IMU frame
};

struct SensorModel {
  double tilt_pitch = 20.0 * kPi / 180.0;  // forward-view inclination [rad]
  bool inverted = true;                    // hung upside down under the platform
  double fov_min = -7.0 * kPi / 180.0;     // pre-mount elevation bounds
  double fov_max = 52.0 * kPi / 180.0;
  double azimuth_span = 2.0 * kPi;
  int points_per_scan = 20000;
  double range_noise = 0.0;  // [m]
  double scan_duration = 0.1;
  double max_range = 40.0;
  double height_cut = -1.0;  // open-top filter; negative disables
  Vec3 t_li = Vec3::Zero();

  bool valid() const { return fov_min < fov_max && range_noise >= 0.0; }
};

// Sensor-to-platform rotation. tilt_pitch is the downward inclination of
// the forward view; an inverted mount flips the sensor about its x-axis
// first. The effective forward elevation band of the default (inverted,
// 20 deg) MID360-style mount is about [-32, +27] degrees.
inline SO3 mount_rotation(const SensorModel& sensor) {
  if (sensor.inverted) {
    return SO3::rot_y(-sensor.tilt_pitch) * SO3::rot_x(kPi);
  }
  return SO3::rot_y(sensor.tilt_pitch);
}

// Platform state sampled from the scenario's ground-truth motion (or the
// executed plan in closed-loop modes).
struct PlatformPose {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

using MotionFn = std::function<PlatformPose(double)>;
using RingFn = std::function<std::optional<RingState>(double)>;

inline SO3 platform_attitude(const PlatformPose& pose) {
  return SO3::rot_z(pose.yaw);
}

// C2 ground-truth motion: a stationary hold for calibration followed by a
// minimum-jerk position spline, with yaw as its own quintic spline through
// unwrapped headings.
class GroundTruthMotion {
 public:
  GroundTruthMotion() = default;

  GroundTruthMotion(PiecewiseTrajectory position, double hold_time,
                    PiecewiseTrajectory yaw_spline)
      : position_(std::move(position)), yaw_(std::move(yaw_spline)),
        hold_(hold_time) {}

  double hold_time() const { return hold_; }
  double duration() const { return hold_ + position_.duration(); }
  const PiecewiseTrajectory& position_spline() const { return position_; }

  PlatformPose at(double t) const {
    PlatformPose p;
    const double s = std::clamp(t - hold_, 0.0, position_.duration());
    p.position = position_.eval(s, 0);
    p.velocity = position_.eval(s, 1);
    p.acceleration = position_.eval(s, 2);
    p.yaw = yaw_.eval(s, 0).x();
    p.yaw_rate = yaw_.eval(s, 1).x();
    if (t < hold_ || t > hold_ + position_.duration()) {
      p.velocity.setZero();
      p.acceleration.setZero();
      p.yaw_rate = 0.0;
    }
    return p;
  }

 private:
  PiecewiseTrajectory position_;
  PiecewiseTrajectory yaw_;  // x-component holds the unwrapped yaw
  double hold_ = 0.0;
};

// Rays sweep the sensor FOV as a deterministic spiral: elevation scans
// linearly across the band while azimuth advances by the golden angle, and
// every point carries its own timestamp inside the scan interval.
inline LidarScan synthesize_scan(const World& world, const SensorModel& sensor,
                                 const MotionFn& motion, double t0,
                                 std::mt19937_64& rng,
                                 const RingFn& ring = nullptr) {
  LidarScan scan;
  scan.t_begin = t0;
  scan.t_end = t0 + sensor.scan_duration;
  scan.t_li = sensor.t_li;
  scan.points.reserve(static_cast<size_t>(sensor.points_per_scan));
  const SO3 r_mount = mount_rotation(sensor);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kGolden = 2.399963229728653;       // golden angle [rad]
  constexpr double kGoldenFrac = 0.6180339887498949;  // golden ratio fraction

  const int n = sensor.points_per_scan;
  for (int i = 0; i < n; ++i) {
    const double tau = t0 + sensor.scan_duration * i / n;
    const PlatformPose pose = motion(tau);
    const SO3 r_ws = platform_attitude(pose) * r_mount;

    const double elev =
        sensor.fov_min + (sensor.fov_max - sensor.fov_min) * ((i + 0.5) / n);
    double az;
    if (sensor.azimuth_span >= 2.0 * kPi - 1e-9) {
      az = wrap_angle(i * kGolden);
    } else {
      const double frac = i * kGoldenFrac - std::floor(i * kGoldenFrac);
      az = -0.5 * sensor.azimuth_span + sensor.azimuth_span * frac;
    }
    const Vec3 d_s(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                   std::sin(elev));
    const Vec3 d_w = r_ws * d_s;
    const Vec3 origin = pose.position + r_ws * sensor.t_li;

    std::optional<RingState> ring_state;
    if (ring) ring_state = ring(tau);
    const auto hit = raycast_world(world, origin, d_w, sensor.max_range,
                                   ring_state ? &*ring_state : nullptr);
    if (!hit) continue;
    if (sensor.height_cut > 0.0 && hit->point.z() > sensor.height_cut) continue;

    double r = hit->range;
    if (sensor.range_noise > 0.0) r += sensor.range_noise * gauss(rng);
    scan.points.push_back({d_s * r, tau});
  }
  return scan;
}

struct ImuSimConfig {
  double gyro_noise = 0.0;   // std dev [rad/s]
  double accel_noise = 0.0;  // std dev [m/s^2]
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
};

// IMU samples over [t0, t1] at the given rate. Body rates and specific
// force come from the platform motion mapped through the mount; gravity is
// added in the sensor frame; bias and seeded noise on top.
inline std::vector<ImuSample> synthesize_imu(const MotionFn& motion,
                                             const ImuSimConfig& cfg,
                                             double rate, double t0, double t1,
                                             std::mt19937_64& rng,
                                             const SensorModel& sensor) {
  std::vector<ImuSample> out;
  const double dt = 1.0 / rate;
  const SO3 r_mount = mount_rotation(sensor);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vec3 g_w(0.0, 0.0, -kGravityMag);
  const int k0 = static_cast<int>(std::ceil(t0 * rate - 1e-9));
  const int k1 = static_cast<int>(std::floor(t1 * rate + 1e-9));
  out.reserve(static_cast<size_t>(std::max(0, k1 - k0 + 1)));
  for (int k = k0; k <= k1; ++k) {
    const double t = k * dt;
    const PlatformPose pose = motion(t);
    const SO3 r_ws = platform_attitude(pose) * r_mount;
    ImuSample s;
    s.stamp = t;
    s.omega = r_mount.inverse() * Vec3(0.0, 0.0, pose.yaw_rate);
    s.accel = r_ws.inverse() * (pose.acceleration - g_w);
    s.omega += cfg.gyro_bias;
    s.accel += cfg.accel_bias;
    if (cfg.gyro_noise > 0.0) {
      s.omega += cfg.gyro_noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    if (cfg.accel_noise > 0.0) {
      s.accel += cfg.accel_noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace earol

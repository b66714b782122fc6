#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "earol/state.hpp"

namespace earol {

struct ImuSample {
  double stamp = 0.0;         // [s]
  Vec3 omega = Vec3::Zero();  // raw gyro [rad/s]
  Vec3 accel = Vec3::Zero();  // raw specific force [m/s^2]
};

struct TiltEstimate {
  double pitch = 0.0;  // mount pitch about the sensor y-axis [rad]
  double filtered_ax = 0.0;
  double filtered_az = 0.0;
  double alpha = 0.0;
};

struct ImuNoiseModel {
  Mat3 sigma_g = Mat3::Identity() * 1e-4;  // gyro noise covariance
  Mat3 sigma_a = Mat3::Identity() * 1e-3;  // accel noise covariance
  Vec3 bias_g_prior = Vec3::Zero();
  Vec3 bias_a_prior = Vec3::Zero();
  double sigma_bg_walk = 1e-5;  // bias random-walk densities
  double sigma_ba_walk = 1e-4;
  double sigma_grav = 1e-5;

  bool valid() const {
    auto psd = [](const Mat3& m) {
      if (!m.isApprox(m.transpose(), 1e-9)) return false;
      Eigen::SelfAdjointEigenSolver<Mat3> es(m);
      return es.eigenvalues().minCoeff() >= -1e-12;
    };
    return psd(sigma_g) && psd(sigma_a);
  }
};

// First-order low-pass: alpha * raw + (1 - alpha) * prev.
inline double low_pass(double prev_filtered, double raw, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("low_pass: alpha must be in (0,1]");
  }
  return alpha * raw + (1.0 - alpha) * prev_filtered;
}

// Mount-pitch auto-calibration from a stationary IMU window. The pitch is
// the arctangent of the filtered x/z acceleration ratio, so it is invariant
// to the gravity magnitude and to a joint sign flip of both axes (inverted
// mounts).
inline TiltEstimate estimate_tilt(const std::vector<ImuSample>& samples,
                                  double alpha,
                                  double gyro_still_thresh = 0.02) {
  if (samples.size() < 10) {
    throw std::invalid_argument("estimate_tilt: need at least 10 samples");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("estimate_tilt: alpha must be in (0,1]");
  }
  double gyro_mean = 0.0;
  for (const auto& s : samples) gyro_mean += s.omega.norm();
  gyro_mean /= static_cast<double>(samples.size());
  if (gyro_mean >= gyro_still_thresh) {
    throw std::runtime_error("estimate_tilt: motion detected during calibration window");
  }

  double fx = samples.front().accel.x();
  double fz = samples.front().accel.z();
  for (size_t i = 1; i < samples.size(); ++i) {
    fx = low_pass(fx, samples[i].accel.x(), alpha);
    fz = low_pass(fz, samples[i].accel.z(), alpha);
  }
  if (std::abs(fz) < 1e-6) {
    throw std::runtime_error("estimate_tilt: degenerate orientation, |a_z| ~ 0");
  }
  TiltEstimate out;
  out.pitch = std::atan(fx / fz);
  out.filtered_ax = fx;
  out.filtered_az = fz;
  out.alpha = alpha;
  return out;
}

// Increments accumulated between two scan times. dt_pos is the full
// position integral (including the velocity drift term), so the global
// update applies it directly.
struct ImuDeltas {
  Vec3 dphi = Vec3::Zero();
  Vec3 dt_pos = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
  double dt = 0.0;
};

// Midpoint-rule integration of the bias-corrected IMU stream starting at
// state xi. Rotation increments accumulate as a Lie-algebra vector; the
// running attitude used to rotate the specific force is xi.phi * exp(dphi).
inline ImuDeltas preintegrate(const std::vector<ImuSample>& samples,
                              const StateVector& xi) {
  if (samples.size() < 2) {
    throw std::invalid_argument("preintegrate: need at least 2 samples");
  }
  const Vec3 g_eff = effective_gravity(xi);
  ImuDeltas d;
  Vec3 v_run = xi.v_wi;
  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const double h = samples[i + 1].stamp - samples[i].stamp;
    if (h <= 0.0) {
      throw std::invalid_argument("preintegrate: non-increasing stamps");
    }
    const Vec3 w_mid =
        0.5 * (samples[i].omega + samples[i + 1].omega) - xi.beta_g;
    const Vec3 a_mid =
        0.5 * (samples[i].accel + samples[i + 1].accel) - xi.beta_a;
    const SO3 r_half = xi.phi_wi * SO3::exp(d.dphi + 0.5 * h * w_mid);
    const Vec3 a_world = r_half * a_mid + g_eff;
    d.dt_pos += v_run * h + 0.5 * a_world * h * h;
    v_run += a_world * h;
    d.dv += a_world * h;
    d.dphi += w_mid * h;
    d.dt += h;
  }
  return d;
}

// Global update stage: position moves by the integrated increment, the
// attitude composes with exp(dphi), velocity adds dv. Biases and gravity
// are untouched by propagation.
inline StateVector propagate_state(const StateVector& xi, const ImuDeltas& d) {
  StateVector out = xi;
  out.t_wi += d.dt_pos;
  out.phi_wi = xi.phi_wi * SO3::exp(d.dphi);
  out.v_wi += d.dv;
  return out;
}

// Quadratic Bezier blend of three control values. mu outside [0,1] is
// clamped; the caller can observe that through the warned flag.
inline Vec3 bezier_interpolate(const Vec3& w_k, const Vec3& w_m,
                               const Vec3& w_k1, double mu,
                               bool* warned = nullptr) {
  if (mu < 0.0 || mu > 1.0) {
    if (warned) *warned = true;
    mu = std::clamp(mu, 0.0, 1.0);
  }
  const double om = 1.0 - mu;
  return om * om * w_k + 2.0 * mu * om * w_m + mu * mu * w_k1;
}

// Continuous motion over one scan interval, reconstructed from the Bezier
// interpolation of the bracketing IMU stream. Attitude and velocity are
// tabulated on a fine grid so per-point lookups stay O(1).
class MotionInterp {
 public:
  MotionInterp() = default;

  // w_k/a_k and w_k1/a_k1 are the IMU values at the interval ends, w_m/a_m
  // the raw sample nearest to the interval midpoint.
  void build(const StateVector& xi_start, double t_start, double t_end,
             const Vec3& w_k, const Vec3& w_m, const Vec3& w_k1,
             const Vec3& a_k, const Vec3& a_m, const Vec3& a_k1,
             int n_steps = 64) {
    t_start_ = t_start;
    t_end_ = t_end;
    t0_ = xi_start.t_wi;
    n_steps_ = n_steps;
    const Vec3 g_eff = effective_gravity(xi_start);
    const double span = t_end - t_start;
    rot_.assign(n_steps + 1, SO3());
    vel_.assign(n_steps + 1, Vec3::Zero());
    rot_[0] = xi_start.phi_wi;
    vel_[0] = xi_start.v_wi;
    const double h = span / n_steps;
    for (int i = 0; i < n_steps; ++i) {
      const double mu_mid = (static_cast<double>(i) + 0.5) / n_steps;
      const Vec3 w = bezier_interpolate(w_k, w_m, w_k1, mu_mid) - xi_start.beta_g;
      const Vec3 a = bezier_interpolate(a_k, a_m, a_k1, mu_mid) - xi_start.beta_a;
      const SO3 r_mid = rot_[i] * SO3::exp(0.5 * h * w);
      vel_[i + 1] = vel_[i] + (r_mid * a + g_eff) * h;
      rot_[i + 1] = rot_[i] * SO3::exp(h * w);
    }
  }

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  const Vec3& anchor_position() const { return t0_; }

  SO3 attitude_at(double tau) const {
    const double u = index_of(tau);
    const int i = static_cast<int>(u);
    const double f = u - i;
    if (i >= n_steps_) return rot_[n_steps_];
    const Vec3 step = (rot_[i].inverse() * rot_[i + 1]).log();
    return rot_[i] * SO3::exp(f * step);
  }

  Vec3 velocity_at(double tau) const {
    const double u = index_of(tau);
    const int i = static_cast<int>(u);
    const double f = u - i;
    if (i >= n_steps_) return vel_[n_steps_];
    return (1.0 - f) * vel_[i] + f * vel_[i + 1];
  }

 private:
  double index_of(double tau) const {
    const double mu = (tau - t_start_) / (t_end_ - t_start_);
    return std::clamp(mu, 0.0, 1.0) * n_steps_;
  }

  double t_start_ = 0.0, t_end_ = 1.0;
  Vec3 t0_ = Vec3::Zero();
  int n_steps_ = 0;
  std::vector<SO3> rot_;
  std::vector<Vec3> vel_;
};

// Transform one laser point (sensor frame, timestamp tau) into the world
// frame using the interpolated in-scan motion:
//   p_w = R(tau) * (p_l + t_li) + t0 + v(tau) * (tau - t_start).
// mu jitter up to mu_slack outside [0,1] is absorbed by clamping; beyond
// that the point is rejected.
inline std::optional<Vec3> undistort_point(const Vec3& p_l, double tau,
                                           const MotionInterp& interp,
                                           const Vec3& t_li,
                                           double mu_slack = 0.05) {
  const double span = interp.t_end() - interp.t_start();
  const double mu = (tau - interp.t_start()) / span;
  if (mu < -mu_slack || mu > 1.0 + mu_slack) return std::nullopt;
  const double tau_c = interp.t_start() + std::clamp(mu, 0.0, 1.0) * span;
  const SO3 r = interp.attitude_at(tau_c);
  const Vec3 v = interp.velocity_at(tau_c);
  return r * (p_l + t_li) + interp.anchor_position() +
         v * (tau_c - interp.t_start());
}

}  // namespace earol

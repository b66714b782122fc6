#pragma once

#include <Eigen/Core>

#include "earol/so3.hpp"

namespace earol {

// Error-state block layout, shared by every Jacobian in the estimator:
// [ d_pos(0) d_att(3) d_vel(6) d_bias_acc(9) d_bias_gyr(12) d_gravity(15) ]
constexpr int kErrorDim = 18;
constexpr int kIdxPos = 0;
constexpr int kIdxAtt = 3;
constexpr int kIdxVel = 6;
constexpr int kIdxBa = 9;
constexpr int kIdxBg = 12;
constexpr int kIdxGrav = 15;

using ErrorState = Eigen::Matrix<double, kErrorDim, 1>;
using Mat18 = Eigen::Matrix<double, kErrorDim, kErrorDim>;

// Navigation state: IMU pose/velocity in the world frame plus sensor
// biases and a gravity correction term.
struct StateVector {
  Vec3 t_wi = Vec3::Zero();   // position [m]
  SO3 phi_wi;                 // attitude, imu -> world
  Vec3 v_wi = Vec3::Zero();   // velocity [m/s]
  Vec3 beta_a = Vec3::Zero(); // accelerometer bias [m/s^2]
  Vec3 beta_g = Vec3::Zero(); // gyroscope bias [rad/s]
  Vec3 gamma_w = Vec3::Zero();// gravity correction [m/s^2]

  bool finite() const {
    return t_wi.allFinite() && v_wi.allFinite() && beta_a.allFinite() &&
           beta_g.allFinite() && gamma_w.allFinite() &&
           phi_wi.quat().coeffs().allFinite();
  }
};

// Gravity as seen by the filter: nominal plus the state's correction term.
constexpr double kGravityMag = 9.81;
inline Vec3 effective_gravity(const StateVector& xi) {
  return Vec3(0.0, 0.0, -kGravityMag) + xi.gamma_w;
}

// Map an error-state increment back onto the manifold. Vector blocks add;
// the attitude block composes on the right: phi * exp(d_att).
inline StateVector retract(const StateVector& xi, const ErrorState& dxi) {
  StateVector out = xi;
  out.t_wi += dxi.segment<3>(kIdxPos);
  out.phi_wi = xi.phi_wi * SO3::exp(dxi.segment<3>(kIdxAtt));
  out.v_wi += dxi.segment<3>(kIdxVel);
  out.beta_a += dxi.segment<3>(kIdxBa);
  out.beta_g += dxi.segment<3>(kIdxBg);
  out.gamma_w += dxi.segment<3>(kIdxGrav);
  return out;
}

}  // namespace earol

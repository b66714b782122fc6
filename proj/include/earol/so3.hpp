#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace earol {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

// SO(3) element backed by a unit quaternion. exp/log use the Rodrigues
// parameterization with series fallbacks near zero angle.
class SO3 {
 public:
  SO3() : q_(Eigen::Quaterniond::Identity()) {}
  explicit SO3(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  explicit SO3(const Mat3& r) : q_(r) { q_.normalize(); }

  static SO3 identity() { return SO3(); }

  static SO3 exp(const Vec3& w) {
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    double half_sinc;  // sin(theta/2)/theta
    if (theta < 1e-8) {
      half_sinc = 0.5 - theta2 / 48.0;
    } else {
      half_sinc = std::sin(0.5 * theta) / theta;
    }
    Eigen::Quaterniond q(std::cos(0.5 * theta), half_sinc * w.x(),
                         half_sinc * w.y(), half_sinc * w.z());
    return SO3(q);
  }

  // Inverse of exp. For a half-turn (angle == pi) the axis sign is
  // canonicalized so the first nonzero component is nonnegative.
  Vec3 log() const {
    Eigen::Quaterniond q = q_;
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3 v(q.x(), q.y(), q.z());
    const double vn = v.norm();
    const double theta = 2.0 * std::atan2(vn, q.w());
    if (vn < 1e-12) {
      return 2.0 * v;  // small-angle: q ~ (1, w/2)
    }
    Vec3 w = (theta / vn) * v;
    if (theta > kPi - 1e-9) {
      // pick the +/-pi representative deterministically
      for (int i = 0; i < 3; ++i) {
        if (std::abs(w[i]) > 1e-12) {
          if (w[i] < 0.0) w = -w;
          break;
        }
      }
    }
    return w;
  }

  SO3 operator*(const SO3& other) const { return SO3(q_ * other.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  SO3 inverse() const { return SO3(q_.conjugate()); }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quat() const { return q_; }

  static SO3 rot_x(double a) { return exp(Vec3(a, 0, 0)); }
  static SO3 rot_y(double a) { return exp(Vec3(0, a, 0)); }
  static SO3 rot_z(double a) { return exp(Vec3(0, 0, a)); }

  // Yaw of the rotated x-axis projected to the horizontal plane.
  double yaw() const {
    const Vec3 fwd = (*this) * Vec3::UnitX();
    return std::atan2(fwd.y(), fwd.x());
  }

 private:
  Eigen::Quaterniond q_;
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace earol

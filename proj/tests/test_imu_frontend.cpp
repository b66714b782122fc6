#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "earol/imu_frontend.hpp"

using namespace earol;

namespace {

std::vector<ImuSample> constant_stream(const Vec3& omega, const Vec3& accel,
                                       double dt, int n) {
  std::vector<ImuSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({i * dt, omega, accel});
  }
  return out;
}

}  // namespace

TEST_CASE("low_pass passthrough and fixed point") {
  REQUIRE(low_pass(0.0, 1.0, 1.0) == Catch::Approx(1.0));
  REQUIRE(low_pass(2.0, 2.0, 0.3) == Catch::Approx(2.0));
  REQUIRE_THROWS_AS(low_pass(0.0, 1.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(low_pass(0.0, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("low_pass geometric convergence") {
  // constant input c from 0: after k steps value = c (1 - (1-alpha)^k)
  const double c = 5.0, alpha = 0.3;
  double v = 0.0;
  for (int k = 1; k <= 10; ++k) {
    v = low_pass(v, c, alpha);
    REQUIRE(v == Catch::Approx(c * (1.0 - std::pow(1.0 - alpha, k))).epsilon(1e-12));
  }
}

TEST_CASE("estimate_tilt exact 20 degrees") {
  const double g = 9.81, t = 20.0 * kPi / 180.0;
  auto s = constant_stream(Vec3::Zero(), Vec3(g * std::sin(t), 0, g * std::cos(t)),
                           0.005, 200);
  const TiltEstimate e = estimate_tilt(s, 0.1);
  REQUIRE(e.pitch == Catch::Approx(t).margin(1e-9));
}

TEST_CASE("estimate_tilt level device") {
  auto s = constant_stream(Vec3::Zero(), Vec3(0, 0, 9.81), 0.005, 50);
  REQUIRE(estimate_tilt(s, 0.1).pitch == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("estimate_tilt invariant to accelerometer scale") {
  const double t = 0.31;
  auto s1 = constant_stream(Vec3::Zero(), Vec3(std::sin(t), 0, std::cos(t)), 0.005, 50);
  auto s2 = constant_stream(Vec3::Zero(), 7.3 * Vec3(std::sin(t), 0, std::cos(t)), 0.005, 50);
  REQUIRE(estimate_tilt(s1, 0.2).pitch ==
          Catch::Approx(estimate_tilt(s2, 0.2).pitch).margin(1e-12));
}

TEST_CASE("estimate_tilt error paths") {
  auto s = constant_stream(Vec3::Zero(), Vec3(0, 0, 9.81), 0.005, 5);
  REQUIRE_THROWS_AS(estimate_tilt(s, 0.1), std::invalid_argument);
  auto moving = constant_stream(Vec3(0.2, 0, 0), Vec3(0, 0, 9.81), 0.005, 50);
  REQUIRE_THROWS_AS(estimate_tilt(moving, 0.1), std::runtime_error);
  auto degenerate = constant_stream(Vec3::Zero(), Vec3(9.81, 0, 0), 0.005, 50);
  REQUIRE_THROWS_AS(estimate_tilt(degenerate, 0.1), std::runtime_error);
}

TEST_CASE("estimate_tilt under noise, Monte Carlo") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 0.05);
  const double g = 9.81, t = 20.0 * kPi / 180.0;
  std::vector<ImuSample> s;
  for (int i = 0; i < 500; ++i) {
    Vec3 a(g * std::sin(t) + gauss(rng), gauss(rng), g * std::cos(t) + gauss(rng));
    s.push_back({i * 0.005, Vec3::Zero(), a});
  }
  const TiltEstimate e = estimate_tilt(s, 0.05);
  REQUIRE(std::abs(e.pitch - t) < 0.5 * kPi / 180.0);
}

TEST_CASE("preintegrate free uniform motion") {
  StateVector xi;
  xi.v_wi = Vec3(2, 0, 0);
  // stationary attitude, accel measures only gravity reaction
  auto s = constant_stream(Vec3::Zero(), Vec3(0, 0, kGravityMag), 0.005, 201);
  const ImuDeltas d = preintegrate(s, xi);
  REQUIRE(d.dphi.norm() < 1e-12);
  REQUIRE(d.dv.norm() < 1e-9);
  REQUIRE((d.dt_pos - Vec3(2, 0, 0)).norm() < 1e-9);  // v * 1s
}

TEST_CASE("preintegrate constant yaw rate") {
  StateVector xi;
  auto s = constant_stream(Vec3(0, 0, 0.1), Vec3(0, 0, kGravityMag), 0.005, 201);
  const ImuDeltas d = preintegrate(s, xi);
  REQUIRE((d.dphi - Vec3(0, 0, 0.1)).norm() < 1e-12);
}

TEST_CASE("preintegrate constant body acceleration from rest") {
  StateVector xi;
  auto s = constant_stream(Vec3::Zero(), Vec3(1, 0, kGravityMag), 0.005, 101);
  const ImuDeltas d = preintegrate(s, xi);
  REQUIRE((d.dv - Vec3(0.5, 0, 0)).norm() < 1e-9);
  REQUIRE((d.dt_pos - Vec3(0.125, 0, 0)).norm() < 1e-9);
}

TEST_CASE("preintegrate additivity over a split interval") {
  StateVector xi;
  xi.v_wi = Vec3(0.5, -0.2, 0.1);
  std::vector<ImuSample> s;
  for (int i = 0; i <= 100; ++i) {
    const double t = i * 0.005;
    // parallel-axis rotation with varying rate plus varying accel
    s.push_back({t, Vec3(0, 0, 0.3 + 0.2 * std::sin(t)),
                 Vec3(0.4 * std::cos(t), 0.1, kGravityMag + 0.05 * t)});
  }
  const ImuDeltas whole = preintegrate(s, xi);
  for (int cut : {20, 50, 77}) {
    std::vector<ImuSample> first(s.begin(), s.begin() + cut + 1);
    std::vector<ImuSample> second(s.begin() + cut, s.end());
    const ImuDeltas d1 = preintegrate(first, xi);
    StateVector mid = propagate_state(xi, d1);
    const ImuDeltas d2 = preintegrate(second, mid);
    REQUIRE((d1.dv + d2.dv - whole.dv).norm() < 1e-9);
    REQUIRE((d1.dphi + d2.dphi - whole.dphi).norm() < 1e-9);
  }
}

TEST_CASE("propagate_state basics") {
  StateVector xi;
  const StateVector same = propagate_state(xi, ImuDeltas{});
  REQUIRE(same.t_wi.norm() == 0.0);
  StateVector moving;
  moving.v_wi = Vec3(1, 0, 0);
  ImuDeltas d;
  d.dt = 1.0;
  d.dt_pos = Vec3(1, 0, 0);  // integral of v over 1 s
  const StateVector out = propagate_state(moving, d);
  REQUIRE((out.t_wi - Vec3(1, 0, 0)).norm() == 0.0);
}

TEST_CASE("propagate_state matches a fine integrator over 2 s") {
  StateVector xi;
  xi.v_wi = Vec3(0.3, 0, 0);
  const Vec3 omega(0, 0, 0.4);
  const Vec3 accel_body(0.5, 0.2, 0);
  // coarse: 200 Hz stream through preintegrate/propagate
  std::vector<ImuSample> s;
  for (int i = 0; i <= 400; ++i) {
    const double t = i * 0.005;
    const SO3 r = SO3::exp(omega * t);
    // constant twist: body-frame accel fixed, gravity compensated
    s.push_back({t, omega, accel_body + r.inverse() * Vec3(0, 0, kGravityMag)});
  }
  const StateVector coarse = propagate_state(xi, preintegrate(s, xi));
  // fine reference: 1000 substeps of simple integration
  Vec3 p = Vec3::Zero(), v = xi.v_wi;
  const int n = 1000;
  const double h = 2.0 / n;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) * h;
    const Vec3 a_w = SO3::exp(omega * t) * accel_body;
    p += v * h + 0.5 * a_w * h * h;
    v += a_w * h;
  }
  REQUIRE((coarse.t_wi - p).norm() < 1e-3);
}

TEST_CASE("bezier endpoints and convex hull") {
  const Vec3 a(0, 0, 0), m(1, 2, 3), b(4, -1, 0);
  REQUIRE((bezier_interpolate(a, m, b, 0.0) - a).norm() == 0.0);
  REQUIRE((bezier_interpolate(a, m, b, 1.0) - b).norm() == 0.0);
  const Vec3 c(2, 2, 2);
  for (double mu : {0.0, 0.25, 0.7, 1.0}) {
    REQUIRE((bezier_interpolate(c, c, c, mu) - c).norm() < 1e-15);
  }
  // componentwise hull over random mu
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = bezier_interpolate(a, m, b, u(rng));
    for (int k = 0; k < 3; ++k) {
      REQUIRE(v[k] >= std::min({a[k], m[k], b[k]}) - 1e-12);
      REQUIRE(v[k] <= std::max({a[k], m[k], b[k]}) + 1e-12);
    }
  }
}

TEST_CASE("bezier midpoint value and clamping") {
  const Vec3 v = bezier_interpolate(Vec3::Zero(), Vec3::Ones(), Vec3::Zero(), 0.5);
  REQUIRE(v.x() == Catch::Approx(0.5));
  bool warned = false;
  bezier_interpolate(Vec3::Zero(), Vec3::Ones(), Vec3::Zero(), 1.2, &warned);
  REQUIRE(warned);
}

TEST_CASE("undistortion is exact identity on a stationary platform") {
  StateVector xi;
  MotionInterp interp;
  const Vec3 grav_meas(0, 0, kGravityMag);
  interp.build(xi, 0.0, 0.1, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
               grav_meas, grav_meas, grav_meas);
  for (double tau : {0.0, 0.03, 0.07, 0.1}) {
    const Vec3 p(3, -2, 1);
    const auto out = undistort_point(p, tau, interp, Vec3::Zero());
    REQUIRE(out);
    REQUIRE((*out - p).norm() < 1e-12);
  }
}

TEST_CASE("undistortion shifts by velocity") {
  StateVector xi;
  xi.t_wi = Vec3(10, 0, 0);
  xi.v_wi = Vec3(1, 0, 0);
  MotionInterp interp;
  const Vec3 grav_meas(0, 0, kGravityMag);
  interp.build(xi, 0.0, 0.2, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
               grav_meas, grav_meas, grav_meas);
  const Vec3 p(1, 1, 0);
  const auto out = undistort_point(p, 0.1, interp, Vec3::Zero());
  REQUIRE(out);
  REQUIRE((*out - (p + Vec3(0.1, 0, 0) + xi.t_wi)).norm() < 1e-9);
}

TEST_CASE("undistortion rejects stamps outside the slack window") {
  StateVector xi;
  MotionInterp interp;
  const Vec3 grav_meas(0, 0, kGravityMag);
  interp.build(xi, 0.0, 0.1, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
               grav_meas, grav_meas, grav_meas);
  REQUIRE(undistort_point(Vec3(1, 0, 0), 0.104, interp, Vec3::Zero()));  // clamped
  REQUIRE_FALSE(undistort_point(Vec3(1, 0, 0), 0.2, interp, Vec3::Zero()));
}

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "earol/imu_frontend.hpp"
#include "earol/state.hpp"
#include "earol/voxel_map.hpp"

namespace earol {

// One whitened point-to-plane constraint and its error-state Jacobian row.
struct Residual {
  double value = 0.0;
  Eigen::Matrix<double, 1, kErrorDim> jacobian =
      Eigen::Matrix<double, 1, kErrorDim>::Zero();
  Vec3 point_world = Vec3::Zero();
  PlaneFit plane;
};

// r = n^T (p - c) / sqrt(n^T Sigma n). The Jacobian covers the position and
// attitude blocks; p_body is recovered from the supplied linearization pose
// so the row matches a right-perturbation of the attitude.
inline std::optional<Residual> point_plane_residual(const Vec3& p_undistort,
                                                    const PlaneFit& plane,
                                                    const SO3& att,
                                                    const Vec3& pos,
                                                    double eps = 1e-12) {
  const double nsn = plane.normal.dot(plane.covariance * plane.normal);
  if (!(nsn > eps)) return std::nullopt;
  const double w = std::sqrt(nsn);
  Residual r;
  r.value = plane.normal.dot(p_undistort - plane.center) / w;
  const Vec3 p_body = att.inverse() * (p_undistort - pos);
  const Vec3 nw = plane.normal / w;
  r.jacobian.segment<3>(kIdxPos) = nw.transpose();
  r.jacobian.segment<3>(kIdxAtt) =
      (-nw.transpose() * att.matrix() * skew(p_body));
  r.point_world = p_undistort;
  r.plane = plane;
  return r;
}

// Spectral analysis of the scene's constraint directions. gamma_i are the
// normalized eigenvalues, H their Shannon entropy (natural log); directions
// with gamma below theta_th span the degenerate projector.
struct DegeneracyReport {
  double entropy = 0.0;
  Vec3 gamma = Vec3::Zero();  // descending
  bool degenerate = false;
  Mat3 projector = Mat3::Zero();  // symmetric, idempotent
};

inline DegeneracyReport detect_degeneracy(const Mat3& local_cov, double h_th,
                                          double theta_th) {
  DegeneracyReport rep;
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (local_cov + local_cov.transpose()));
  const Vec3 lambda_asc = es.eigenvalues().cwiseMax(0.0);
  const double total = lambda_asc.sum();
  if (total <= 0.0) {
    rep.gamma = Vec3::Constant(1.0 / 3.0);
    rep.entropy = 0.0;
    rep.degenerate = true;
    rep.projector = Mat3::Identity();
    return rep;
  }
  rep.gamma = (lambda_asc / total).reverse();
  double h = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double g = rep.gamma[i];
    if (g > 0.0) h -= g * std::log(g);
  }
  rep.entropy = h;
  rep.degenerate = h < h_th;
  for (int i = 0; i < 3; ++i) {
    const double g = lambda_asc[i] / total;
    if (g < theta_th) {
      const Vec3 v = es.eigenvectors().col(i);
      rep.projector += v * v.transpose();
    }
  }
  return rep;
}

struct IeskfParams {
  int max_iterations = 5;
  double convergence_tol = 1e-6;
  double damping = 1e3;                 // added along degenerate directions
  double entropy_threshold = 0.75;      // H_th
  double eigen_ratio_threshold = 0.05;  // theta_th
  int min_matches = 50;
  double sigma_meas = 0.01;             // sensor noise floor added to plane fits
  double distance_gate = 0.5;           // geometric point-to-plane gate [m]
};

struct UpdateReport {
  int iterations = 0;
  int matched = 0;
  double entropy = 0.0;
  bool degenerate = false;
  bool skipped = false;
  Mat3 projector = Mat3::Zero();
};

struct IeskfResult {
  StateVector state;
  Mat18 covariance;
  UpdateReport report;
};

// Iterated error-state update against the voxel map. Points are given in
// the scan-anchor body frame; each iteration re-associates them against the
// map at the current linearization and solves
//   dxi <- dxi - (J^T R^-1 J + P^-1)^-1 J^T R^-1 r
// with unit measurement covariance after whitening. When the constraint
// spectrum is degenerate, a damping term is added to the position and
// attitude information blocks along the degenerate directions.
inline IeskfResult ieskf_update(const StateVector& xi_prior,
                                const Mat18& p_prior,
                                std::span<const Vec3> points_body,
                                DualVoxelMap& map, const IeskfParams& params) {
  IeskfResult out;
  out.state = xi_prior;
  out.covariance = p_prior;

  const Mat18 p_inv = p_prior.inverse();
  const Mat3 sigma_floor = Mat3::Identity() * (params.sigma_meas * params.sigma_meas);

  ErrorState dxi = ErrorState::Zero();
  StateVector xi = xi_prior;
  Eigen::Matrix<double, 6, 6> h_meas6 = Eigen::Matrix<double, 6, 6>::Zero();

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    h_meas6.setZero();
    Eigen::Matrix<double, 6, 1> g_meas6 = Eigen::Matrix<double, 6, 1>::Zero();
    Mat3 normal_moment = Mat3::Zero();
    int matched = 0;

    for (const Vec3& pb : points_body) {
      const Vec3 pw = xi.phi_wi * pb + xi.t_wi;
      auto plane = map.query_plane(pw);
      if (!plane) continue;
      if (std::abs(plane->normal.dot(pw - plane->center)) > params.distance_gate) {
        continue;
      }
      PlaneFit pf = *plane;
      pf.covariance += sigma_floor;
      auto res = point_plane_residual(pw, pf, xi.phi_wi, xi.t_wi);
      if (!res) continue;
      const auto j6 = res->jacobian.segment<6>(0);
      h_meas6.noalias() += j6.transpose() * j6;
      g_meas6.noalias() += j6.transpose() * res->value;
      normal_moment.noalias() += pf.normal * pf.normal.transpose();
      ++matched;
    }

    out.report.matched = matched;
    if (matched < params.min_matches) {
      out.report.skipped = true;
      out.state = xi_prior;
      out.covariance = p_prior;
      return out;
    }

    // refreshed every iteration: re-association can change the constraint set
    const DegeneracyReport deg = detect_degeneracy(
        normal_moment / matched, params.entropy_threshold,
        params.eigen_ratio_threshold);
    out.report.entropy = deg.entropy;
    out.report.degenerate = deg.degenerate;
    out.report.projector = deg.projector;

    Mat18 info = p_inv;
    info.block<6, 6>(0, 0) += h_meas6;
    if (out.report.degenerate) {
      info.block<3, 3>(kIdxPos, kIdxPos) += params.damping * out.report.projector;
      info.block<3, 3>(kIdxAtt, kIdxAtt) += params.damping * out.report.projector;
    }
    Eigen::Matrix<double, kErrorDim, 1> rhs =
        Eigen::Matrix<double, kErrorDim, 1>::Zero();
    rhs.segment<6>(0) = g_meas6;

    const ErrorState step = info.ldlt().solve(rhs);
    const ErrorState dxi_next = dxi - step;
    out.report.iterations = iter + 1;

    xi = retract(xi_prior, dxi_next);
    const double change = (dxi_next - dxi).norm();
    dxi = dxi_next;
    if (change < params.convergence_tol) break;
  }

  out.state = xi;
  Mat18 info_post = p_inv;
  info_post.block<6, 6>(0, 0) += h_meas6;
  out.covariance = info_post.inverse();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

// Discrete error-state transition over one IMU step, matching the retract
// convention (attitude error on the right, body side).
inline void propagate_covariance(Mat18& p, const StateVector& xi,
                                 const Vec3& omega_hat, const Vec3& accel_hat,
                                 double h, const ImuNoiseModel& noise) {
  Mat18 f = Mat18::Identity();
  const Mat3 r = xi.phi_wi.matrix();
  f.block<3, 3>(kIdxPos, kIdxVel) = Mat3::Identity() * h;
  f.block<3, 3>(kIdxAtt, kIdxAtt) = SO3::exp(-omega_hat * h).matrix();
  f.block<3, 3>(kIdxAtt, kIdxBg) = -Mat3::Identity() * h;
  f.block<3, 3>(kIdxVel, kIdxAtt) = -r * skew(accel_hat) * h;
  f.block<3, 3>(kIdxVel, kIdxBa) = -r * h;
  f.block<3, 3>(kIdxVel, kIdxGrav) = Mat3::Identity() * h;

  Mat18 q = Mat18::Zero();
  q.block<3, 3>(kIdxAtt, kIdxAtt) = noise.sigma_g * h;
  q.block<3, 3>(kIdxVel, kIdxVel) = r * noise.sigma_a * r.transpose() * h;
  q.block<3, 3>(kIdxBa, kIdxBa) =
      Mat3::Identity() * (noise.sigma_ba_walk * noise.sigma_ba_walk * h);
  q.block<3, 3>(kIdxBg, kIdxBg) =
      Mat3::Identity() * (noise.sigma_bg_walk * noise.sigma_bg_walk * h);
  q.block<3, 3>(kIdxGrav, kIdxGrav) =
      Mat3::Identity() * (noise.sigma_grav * noise.sigma_grav * h);

  p = f * p * f.transpose() + q;
  p = 0.5 * (p + p.transpose());
}

}  // namespace earol

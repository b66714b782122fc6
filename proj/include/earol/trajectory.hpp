#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Minimum-jerk setting: control order s = 3, polynomial degree 2s-1 = 5.
constexpr int kCtrlOrder = 3;
constexpr int kPolyCoeffs = 2 * kCtrlOrder;  // 6 per piece

// Banded linear system with O(n) LU factorization (no pivoting; the spline
// constraint matrix is well conditioned for positive piece times).
class BandedSystem {
 public:
  void create(int n, int lower, int upper) {
    n_ = n;
    lower_ = lower;
    upper_ = upper;
    data_.assign(static_cast<size_t>(n) * (lower + upper + 1), 0.0);
  }

  double& at(int i, int j) {
    return data_[static_cast<size_t>(i - j + upper_) * n_ + j];
  }
  double at(int i, int j) const {
    return data_[static_cast<size_t>(i - j + upper_) * n_ + j];
  }

  // In-place LU. Throws when a pivot vanishes (singular system, e.g. a
  // zero piece time).
  void factorize() {
    for (int k = 0; k <= n_ - 2; ++k) {
      const int i_max = std::min(k + lower_, n_ - 1);
      const double pivot = at(k, k);
      if (std::abs(pivot) < 1e-12) {
        throw std::invalid_argument("BandedSystem: singular constraint matrix");
      }
      for (int i = k + 1; i <= i_max; ++i) {
        if (at(i, k) != 0.0) at(i, k) /= pivot;
      }
      const int j_max = std::min(k + upper_, n_ - 1);
      for (int j = k + 1; j <= j_max; ++j) {
        const double c = at(k, j);
        if (c == 0.0) continue;
        for (int i = k + 1; i <= i_max; ++i) {
          if (at(i, k) != 0.0) at(i, j) -= at(i, k) * c;
        }
      }
    }
    if (std::abs(at(n_ - 1, n_ - 1)) < 1e-12) {
      throw std::invalid_argument("BandedSystem: singular constraint matrix");
    }
  }

  // Solve A x = b for row-major multi-RHS b, in place.
  void solve(Eigen::MatrixXd& b) const {
    for (int j = 0; j < n_; ++j) {
      const int i_max = std::min(j + lower_, n_ - 1);
      for (int i = j + 1; i <= i_max; ++i) {
        if (at(i, j) != 0.0) b.row(i) -= at(i, j) * b.row(j);
      }
    }
    for (int j = n_ - 1; j >= 0; --j) {
      b.row(j) /= at(j, j);
      const int i_min = std::max(0, j - upper_);
      for (int i = i_min; i < j; ++i) {
        if (at(i, j) != 0.0) b.row(i) -= at(i, j) * b.row(j);
      }
    }
  }

  // Solve A^T x = b, in place. Used by the adjoint gradient propagation.
  void solve_transpose(Eigen::MatrixXd& b) const {
    for (int j = 0; j < n_; ++j) {
      b.row(j) /= at(j, j);
      const int i_max = std::min(j + upper_, n_ - 1);
      for (int i = j + 1; i <= i_max; ++i) {
        if (at(j, i) != 0.0) b.row(i) -= at(j, i) * b.row(j);
      }
    }
    for (int j = n_ - 1; j >= 0; --j) {
      const int i_min = std::max(0, j - lower_);
      for (int i = i_min; i < j; ++i) {
        if (at(j, i) != 0.0) b.row(i) -= at(j, i) * b.row(j);
      }
    }
  }

 private:
  int n_ = 0, lower_ = 0, upper_ = 0;
  std::vector<double> data_;
};

// Monomial basis row (t^0 .. t^5) differentiated `order` times.
inline Eigen::Matrix<double, 1, kPolyCoeffs> poly_basis(double t, int order) {
  Eigen::Matrix<double, 1, kPolyCoeffs> row =
      Eigen::Matrix<double, 1, kPolyCoeffs>::Zero();
  for (int j = order; j < kPolyCoeffs; ++j) {
    double c = 1.0;
    for (int k = 0; k < order; ++k) c *= (j - k);
    row[j] = c * std::pow(t, j - order);
  }
  return row;
}

struct BoundaryState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

// M quintic pieces with coefficients stacked as a (6M x 3) matrix.
class PiecewiseTrajectory {
 public:
  PiecewiseTrajectory() = default;
  PiecewiseTrajectory(std::vector<double> times, Eigen::MatrixXd coeffs)
      : times_(std::move(times)), coeffs_(std::move(coeffs)) {
    cumulative_.resize(times_.size() + 1);
    cumulative_[0] = 0.0;
    for (size_t i = 0; i < times_.size(); ++i) {
      cumulative_[i + 1] = cumulative_[i] + times_[i];
    }
  }

  int pieces() const { return static_cast<int>(times_.size()); }
  double duration() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& coefficients() const { return coeffs_; }

  // Derivative of the containing piece; t outside [0, duration] clamps to
  // the boundary (out_of_range reports it when supplied).
  Vec3 eval(double t, int order, bool* out_of_range = nullptr) const {
    if (times_.empty()) return Vec3::Zero();
    if (t < 0.0 || t > duration()) {
      if (out_of_range) *out_of_range = true;
      t = std::clamp(t, 0.0, duration());
    }
    int piece = static_cast<int>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), t) -
        cumulative_.begin()) - 1;
    piece = std::clamp(piece, 0, pieces() - 1);
    const double local = t - cumulative_[static_cast<size_t>(piece)];
    const auto basis = poly_basis(local, order);
    return (basis * coeffs_.block<kPolyCoeffs, 3>(piece * kPolyCoeffs, 0))
        .transpose();
  }

  Vec3 eval_piece(int piece, double local_t, int order) const {
    const auto basis = poly_basis(local_t, order);
    return (basis * coeffs_.block<kPolyCoeffs, 3>(piece * kPolyCoeffs, 0))
        .transpose();
  }

 private:
  std::vector<double> times_;
  std::vector<double> cumulative_;
  Eigen::MatrixXd coeffs_;  // (6M x 3)
};

// Builds and factorizes the spline constraint matrix for given piece times,
// then maps waypoints/boundary states to coefficients. Also propagates cost
// gradients from coefficients back to waypoints and times through the
// factorized system (adjoint solve).
class MincoSolver {
 public:
  // M >= 1 pieces, M-1 interior waypoints.
  void setup(const BoundaryState& s0, const BoundaryState& sf, int pieces) {
    if (pieces < 1) throw std::invalid_argument("MincoSolver: need >= 1 piece");
    m_ = pieces;
    s0_ = s0;
    sf_ = sf;
    n_ = kPolyCoeffs * m_;
    b_.resize(n_, 3);
  }

  int pieces() const { return m_; }

  // Solve for coefficients. waypoints has M-1 entries, times M positive
  // entries.
  void solve(const std::vector<Vec3>& waypoints,
             const std::vector<double>& times) {
    if (static_cast<int>(waypoints.size()) != m_ - 1 ||
        static_cast<int>(times.size()) != m_) {
      throw std::invalid_argument("MincoSolver: dimension mismatch");
    }
    for (double t : times) {
      if (!(t > 0.0)) throw std::invalid_argument("MincoSolver: piece times must be positive");
    }
    times_ = times;
    a_.create(n_, kPolyCoeffs, kPolyCoeffs);
    b_.setZero();

    // initial boundary: p, v, a of piece 0 at t = 0
    for (int d = 0; d < kCtrlOrder; ++d) {
      const auto row = poly_basis(0.0, d);
      for (int j = 0; j < kPolyCoeffs; ++j) {
        if (row[j] != 0.0) a_.at(d, j) = row[j];
      }
    }
    b_.row(0) = s0_.position.transpose();
    b_.row(1) = s0_.velocity.transpose();
    b_.row(2) = s0_.acceleration.transpose();

    // Junction blocks ordered so every diagonal stays nonzero for the
    // pivot-free LU: jerk/snap continuity, waypoint pin, then continuity
    // of derivatives 0..2.
    for (int i = 0; i < m_ - 1; ++i) {
      const int row0 = kCtrlOrder + kPolyCoeffs * i;
      const int col_i = kPolyCoeffs * i;
      const int col_n = kPolyCoeffs * (i + 1);
      const double ti = times_[static_cast<size_t>(i)];
      auto continuity = [&](int row, int order) {
        const auto left = poly_basis(ti, order);
        const auto right = poly_basis(0.0, order);
        for (int j = 0; j < kPolyCoeffs; ++j) {
          if (left[j] != 0.0) a_.at(row, col_i + j) = left[j];
          if (right[j] != 0.0) a_.at(row, col_n + j) = -right[j];
        }
      };
      continuity(row0 + 0, 3);
      continuity(row0 + 1, 4);
      const auto pos_row = poly_basis(ti, 0);
      for (int j = 0; j < kPolyCoeffs; ++j) a_.at(row0 + 2, col_i + j) = pos_row[j];
      b_.row(row0 + 2) = waypoints[static_cast<size_t>(i)].transpose();
      continuity(row0 + 3, 0);
      continuity(row0 + 4, 1);
      continuity(row0 + 5, 2);
    }

    // final boundary: p, v, a of the last piece at its end
    const int last_row = n_ - kCtrlOrder;
    const int last_col = kPolyCoeffs * (m_ - 1);
    const double tf = times_.back();
    for (int d = 0; d < kCtrlOrder; ++d) {
      const auto row = poly_basis(tf, d);
      for (int j = 0; j < kPolyCoeffs; ++j) {
        if (row[j] != 0.0) a_.at(last_row + d, last_col + j) = row[j];
      }
    }
    b_.row(last_row + 0) = sf_.position.transpose();
    b_.row(last_row + 1) = sf_.velocity.transpose();
    b_.row(last_row + 2) = sf_.acceleration.transpose();

    a_.factorize();
    a_.solve(b_);
  }

  const Eigen::MatrixXd& coefficients() const { return b_; }

  PiecewiseTrajectory trajectory() const {
    return PiecewiseTrajectory(times_, b_);
  }

  // Given dJ/dC, accumulate dJ/dQ and the constraint contribution to dJ/dT
  // via one adjoint solve: A^T lambda = dJ/dC, then
  //   dJ/dq_i  = lambda row of the i-th waypoint constraint,
  //   dJ/dT_i -= lambda^T (dA/dT_i) C  (rows evaluating piece i at T_i).
  void propagate_gradient(const Eigen::MatrixXd& grad_c,
                          std::vector<Vec3>& grad_q,
                          std::vector<double>& grad_t) const {
    Eigen::MatrixXd lambda = grad_c;
    a_.solve_transpose(lambda);

    grad_q.assign(static_cast<size_t>(m_ - 1), Vec3::Zero());
    for (int i = 0; i < m_ - 1; ++i) {
      grad_q[static_cast<size_t>(i)] =
          lambda.row(kCtrlOrder + kPolyCoeffs * i + 2).transpose();
    }

    if (static_cast<int>(grad_t.size()) != m_) grad_t.assign(static_cast<size_t>(m_), 0.0);
    const PiecewiseTrajectory traj(times_, b_);
    // row layout per junction: orders (3, 4, waypoint:0, 0, 1, 2)
    static constexpr int kRowOrder[6] = {3, 4, 0, 0, 1, 2};
    for (int i = 0; i < m_ - 1; ++i) {
      const int row0 = kCtrlOrder + kPolyCoeffs * i;
      const double ti = times_[static_cast<size_t>(i)];
      double acc = 0.0;
      for (int rr = 0; rr < kPolyCoeffs; ++rr) {
        acc += lambda.row(row0 + rr).dot(traj.eval_piece(i, ti, kRowOrder[rr] + 1));
      }
      grad_t[static_cast<size_t>(i)] -= acc;
    }
    const int last_row = n_ - kCtrlOrder;
    const double tf = times_.back();
    double acc = 0.0;
    for (int d = 0; d < kCtrlOrder; ++d) {
      acc += lambda.row(last_row + d).dot(traj.eval_piece(m_ - 1, tf, d + 1));
    }
    grad_t[static_cast<size_t>(m_ - 1)] -= acc;
  }

 private:
  int m_ = 0, n_ = 0;
  BoundaryState s0_, sf_;
  std::vector<double> times_;
  BandedSystem a_;
  Eigen::MatrixXd b_;
};

// Minimum-control-effort interpolant through the waypoints: continuous up
// to the (2s-2)-th derivative at junctions.
inline PiecewiseTrajectory solve_coefficients(const std::vector<Vec3>& waypoints,
                                              const std::vector<double>& times,
                                              const BoundaryState& s0,
                                              const BoundaryState& sf) {
  MincoSolver solver;
  solver.setup(s0, sf, static_cast<int>(times.size()));
  solver.solve(waypoints, times);
  return solver.trajectory();
}

}  // namespace earol

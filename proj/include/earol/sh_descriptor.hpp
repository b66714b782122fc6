#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Real spherical-harmonic expansion of a neighborhood's angular density.
// Coefficients are packed band-major: for band l, index l*l + (m + l),
// with negative m mapped to the sine basis and positive m to cosine.
struct ShDescriptor {
  int max_band = 0;
  std::vector<double> coeffs;
  std::vector<double> band_energy;  // per-band sum of squared coefficients

  bool empty() const {
    for (double c : coeffs) {
      if (c != 0.0) return false;
    }
    return true;
  }
};

namespace detail {

// Real orthonormal basis from the C++17 spherical Legendre functions.
inline double real_sh(int l, int m, double theta, double phi) {
  if (m == 0) return std::sph_legendre(l, 0, theta);
  const int ma = std::abs(m);
  const double base = std::sph_legendre(l, ma, theta) * std::sqrt(2.0);
  return m > 0 ? base * std::cos(ma * phi) : base * std::sin(ma * phi);
}

}  // namespace detail

// Discrete inner product of the range-weighted point density against each
// basis function. theta is measured from the z-axis, phi is the azimuth.
inline ShDescriptor sh_descriptor(std::span<const Vec3> points, int max_band,
                                  double range_scale = 10.0) {
  if (max_band < 0 || max_band > 6) {
    throw std::invalid_argument("sh_descriptor: band limit must be in [0,6]");
  }
  ShDescriptor d;
  d.max_band = max_band;
  d.coeffs.assign(static_cast<size_t>((max_band + 1) * (max_band + 1)), 0.0);
  d.band_energy.assign(static_cast<size_t>(max_band + 1), 0.0);
  for (const Vec3& p : points) {
    const double r = p.norm();
    if (r < 1e-9) continue;
    const double theta = std::acos(std::clamp(p.z() / r, -1.0, 1.0));
    const double phi = std::atan2(p.y(), p.x());
    const double w = std::exp(-r / range_scale);
    for (int l = 0; l <= max_band; ++l) {
      for (int m = -l; m <= l; ++m) {
        d.coeffs[static_cast<size_t>(l * l + m + l)] +=
            w * detail::real_sh(l, m, theta, phi);
      }
    }
  }
  for (int l = 0; l <= max_band; ++l) {
    double e = 0.0;
    for (int m = -l; m <= l; ++m) {
      const double c = d.coeffs[static_cast<size_t>(l * l + m + l)];
      e += c * c;
    }
    d.band_energy[static_cast<size_t>(l)] = e;
  }
  return d;
}

// Band-energy signature distance, scale-normalized so point-count changes
// between visits do not dominate.
inline double descriptor_distance(const ShDescriptor& a, const ShDescriptor& b) {
  const size_t n = std::min(a.band_energy.size(), b.band_energy.size());
  double na = 0.0, nb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    na += a.band_energy[i];
    nb += b.band_energy[i];
  }
  if (na <= 0.0 && nb <= 0.0) return 0.0;
  if (na <= 0.0 || nb <= 0.0) return 1.0;
  double dist = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double diff = a.band_energy[i] / na - b.band_energy[i] / nb;
    dist += diff * diff;
  }
  return std::sqrt(dist);
}

struct KeyframePose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

struct KeyframeEntry {
  KeyframePose pose;
  ShDescriptor descriptor;
};

// Nearest candidate by band-energy distance; absent when nothing clears the
// acceptance threshold. Pose-graph refinement of the returned pose is out
// of scope here.
inline std::optional<KeyframePose> relocalize(
    const ShDescriptor& query, std::span<const KeyframeEntry> candidate_db,
    double accept_threshold = 0.05) {
  if (candidate_db.empty()) {
    throw std::invalid_argument("relocalize: empty candidate database");
  }
  double best = std::numeric_limits<double>::infinity();
  size_t best_i = 0;
  for (size_t i = 0; i < candidate_db.size(); ++i) {
    const double dist = descriptor_distance(query, candidate_db[i].descriptor);
    if (dist < best) {
      best = dist;
      best_i = i;
    }
  }
  if (best >= accept_threshold) return std::nullopt;
  return candidate_db[best_i].pose;
}

}  // namespace earol

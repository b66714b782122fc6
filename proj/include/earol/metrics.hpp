#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "earol/io.hpp"
#include "earol/so3.hpp"

namespace earol {

// One row of the run log, sampled once per scan.
struct ScanRecord {
  double t = 0.0;
  Vec3 est_position = Vec3::Zero();
  Vec3 gt_position = Vec3::Zero();
  double exec_yaw = 0.0;
  double target_angle = -1.0;  // |wrapped offset| to the true target, <0 if inactive
  double total_entropy = 0.0;
  int matched = 0;
  int iterations = 0;
  double constraint_entropy = 0.0;  // H from the degeneracy report
  bool degenerate = false;
  bool update_skipped = false;
  bool target_detected = false;
};

struct RunMetrics {
  int scans = 0;
  double ate_rmse = 0.0;
  double ate_max = 0.0;
  double z_drift_end = 0.0;
  double z_drift_max = 0.0;
  double track_cum = 0.0;       // sum of T(psi) over tracked steps
  double track_max_deg = 0.0;   // max instantaneous offset angle
  double yaw_energy = 0.0;      // sum of squared wrapped yaw steps
  double entropy_initial = 0.0;
  double entropy_final = 0.0;
  int entropy_monotone_violations = 0;
  double matched_mean = 0.0;
  double degenerate_fraction = 0.0;
  int skipped_updates = 0;
  double detection_rate = 0.0;
  double calib_pitch_deg = 0.0;
};

// Aggregate a run log. The tracking error uses the dead-zoned normalized
// angle of the true target offset; entropy monotonicity is checked on the
// per-scan total map entropy series (meaningful for static worlds).
inline RunMetrics compute_metrics(const std::vector<ScanRecord>& log,
                                  double psi_th, bool entropy_check = true) {
  RunMetrics m;
  m.scans = static_cast<int>(log.size());
  if (log.empty()) return m;

  double se = 0.0;
  double prev_yaw = log.front().exec_yaw;
  double prev_entropy = log.front().total_entropy;
  int tracked = 0, detected = 0, target_steps = 0, degenerate = 0;
  long matched_sum = 0;
  m.entropy_initial = log.front().total_entropy;
  m.entropy_final = log.back().total_entropy;

  for (const auto& r : log) {
    const Vec3 err = r.est_position - r.gt_position;
    se += err.squaredNorm();
    m.ate_max = std::max(m.ate_max, err.norm());
    m.z_drift_max = std::max(m.z_drift_max, std::abs(err.z()));
    if (r.target_angle >= 0.0) {
      ++target_steps;
      const double off = r.target_angle <= psi_th ? 0.0 : r.target_angle;
      const double tcost = (off / kPi) * (off / kPi);
      m.track_cum += tcost;
      m.track_max_deg = std::max(m.track_max_deg, r.target_angle * 180.0 / kPi);
      ++tracked;
      if (r.target_detected) ++detected;
    }
    m.yaw_energy += wrap_angle(r.exec_yaw - prev_yaw) * wrap_angle(r.exec_yaw - prev_yaw);
    prev_yaw = r.exec_yaw;
    if (entropy_check && r.total_entropy > prev_entropy + 1e-6) {
      ++m.entropy_monotone_violations;
    }
    prev_entropy = r.total_entropy;
    matched_sum += r.matched;
    if (r.degenerate) ++degenerate;
    if (r.update_skipped) ++m.skipped_updates;
  }
  m.ate_rmse = std::sqrt(se / log.size());
  m.z_drift_end = std::abs(log.back().est_position.z() - log.back().gt_position.z());
  m.matched_mean = static_cast<double>(matched_sum) / log.size();
  m.degenerate_fraction = static_cast<double>(degenerate) / log.size();
  m.detection_rate = target_steps > 0
                         ? static_cast<double>(detected) / target_steps
                         : 0.0;
  (void)tracked;
  return m;
}

inline void fill_metrics(MetricsWriter& w, const RunMetrics& m) {
  w.set("scans", static_cast<double>(m.scans));
  w.set("calib_pitch_deg", m.calib_pitch_deg);
  w.set("ate_rmse", m.ate_rmse);
  w.set("ate_max", m.ate_max);
  w.set("z_drift_end", m.z_drift_end);
  w.set("z_drift_max", m.z_drift_max);
  w.set("track_cum", m.track_cum);
  w.set("track_max_deg", m.track_max_deg);
  w.set("yaw_energy", m.yaw_energy);
  w.set("entropy_initial", m.entropy_initial);
  w.set("entropy_final", m.entropy_final);
  w.set("entropy_monotone_violations",
        static_cast<double>(m.entropy_monotone_violations));
  w.set("matched_mean", m.matched_mean);
  w.set("degenerate_fraction", m.degenerate_fraction);
  w.set("skipped_updates", static_cast<double>(m.skipped_updates));
  w.set("detection_rate", m.detection_rate);
}

struct ComparisonEntry {
  std::string key;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;
  double pct = 0.0;  // change of a relative to b, percent
};

// Per-metric deltas between two runs of the same scenario/seed. Throws when
// the seeds differ, since cross-seed deltas are not comparable.
inline std::vector<ComparisonEntry> compare_metrics(
    const std::vector<std::pair<std::string, std::string>>& a,
    const std::vector<std::pair<std::string, std::string>>& b) {
  auto find = [](const auto& kv, const std::string& key) -> const std::string* {
    for (const auto& [k, v] : kv) {
      if (k == key) return &v;
    }
    return nullptr;
  };
  const std::string* seed_a = find(a, "seed");
  const std::string* seed_b = find(b, "seed");
  if (!seed_a || !seed_b || *seed_a != *seed_b) {
    throw std::invalid_argument("compare_metrics: seed mismatch between runs");
  }
  std::vector<ComparisonEntry> out;
  for (const auto& [k, va] : a) {
    const std::string* vb = find(b, k);
    if (!vb) continue;
    char* end_a = nullptr;
    char* end_b = nullptr;
    const double da = std::strtod(va.c_str(), &end_a);
    const double db = std::strtod(vb->c_str(), &end_b);
    if (end_a == va.c_str() || end_b == vb->c_str()) continue;  // non-numeric
    ComparisonEntry e;
    e.key = k;
    e.a = da;
    e.b = db;
    e.delta = da - db;
    e.pct = db != 0.0 ? 100.0 * (da - db) / db : 0.0;
    out.push_back(e);
  }
  return out;
}

}  // namespace earol

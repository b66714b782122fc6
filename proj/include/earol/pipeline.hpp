#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "earol/entropy_grid.hpp"
#include "earol/lio_estimator.hpp"
#include "earol/metrics.hpp"
#include "earol/ring_detect.hpp"
#include "earol/scenario.hpp"
#include "earol/sh_descriptor.hpp"

namespace earol {

enum class RunMode { kOdometry, kPlan, kTrack, kFull };
enum class YawPolicy { kPerceptionAware, kDifferential };
enum class MountType { kTiltedDown, kConventional };

struct RunOptions {
  RunMode mode = RunMode::kOdometry;
  YawPolicy yaw_policy = YawPolicy::kPerceptionAware;
  MountType mount = MountType::kTiltedDown;
  std::optional<uint64_t> seed_override;
  std::string out_dir;          // empty: no files written
  int pgm_every = 0;            // entropy snapshots every N scans (0 = off)
  bool quiet = true;
};

struct RunResult {
  std::vector<ScanRecord> records;
  RunMetrics metrics;
  std::vector<std::pair<double, double>> entropy_series;  // (t, total)
  std::vector<KeyframeEntry> keyframes;  // relocalization database
  double calib_pitch = 0.0;
  bool diverged = false;
  std::string scenario_name;
  uint64_t seed = 0;
};

namespace detail {

inline SensorModel apply_mount(SensorModel sensor, MountType mount) {
  if (mount == MountType::kConventional) {
    sensor.tilt_pitch = 0.0;
    sensor.inverted = false;
  }
  return sensor;
}

// Executed yaw timeline: piecewise-linear through planner knots, seeded
// with a fixed initial yaw. Knot spacing respects the angular-velocity
// bound by construction, so linear interpolation does too.
class YawTimeline {
 public:
  explicit YawTimeline(double t0, double psi0) { knots_.emplace_back(t0, psi0); }

  void splice(double t_now, const std::vector<std::pair<double, double>>& seq) {
    // drop knots beyond the splice point, keep history up to t_now
    while (!knots_.empty() && knots_.back().first > t_now + 1e-9) knots_.pop_back();
    if (knots_.empty() || knots_.back().first < t_now - 1e-9) {
      knots_.emplace_back(t_now, at(t_now));
    }
    double prev = knots_.back().second;
    for (const auto& [t, psi] : seq) {
      if (t <= knots_.back().first + 1e-9) continue;
      // store unwrapped so interpolation takes the short way
      const double un = knots_.back().second + wrap_angle(psi - prev);
      knots_.emplace_back(t, un);
      prev = psi;
    }
  }

  double at(double t) const {
    if (knots_.empty()) return 0.0;
    if (t <= knots_.front().first) return wrap_angle(knots_.front().second);
    if (t >= knots_.back().first) return wrap_angle(knots_.back().second);
    for (size_t i = 0; i + 1 < knots_.size(); ++i) {
      if (t <= knots_[i + 1].first) {
        const double f = (t - knots_[i].first) /
                         (knots_[i + 1].first - knots_[i].first);
        return wrap_angle(knots_[i].second +
                          f * (knots_[i + 1].second - knots_[i].second));
      }
    }
    return wrap_angle(knots_.back().second);
  }

  double rate_at(double t) const {
    for (size_t i = 0; i + 1 < knots_.size(); ++i) {
      if (t >= knots_[i].first && t <= knots_[i + 1].first) {
        return (knots_[i + 1].second - knots_[i].second) /
               std::max(1e-9, knots_[i + 1].first - knots_[i].first);
      }
    }
    return 0.0;
  }

 private:
  std::vector<std::pair<double, double>> knots_;  // (t, unwrapped psi)
};

inline double bearing_of(const Vec3& from, const Vec3& to) {
  return std::atan2(to.y() - from.y(), to.x() - from.x());
}

}  // namespace detail

// Full simulated run. Odometry and full modes run the estimator in the
// loop; track mode feeds ground-truth poses to isolate the yaw planner;
// plan mode only exercises the trajectory optimizer.
class ScenarioRunner {
 public:
  ScenarioRunner(Scenario scenario, RunOptions options)
      : scn_(std::move(scenario)), opt_(options) {
    if (opt_.seed_override) scn_.seed = *opt_.seed_override;
    scn_.sensor = detail::apply_mount(scn_.sensor, opt_.mount);
  }

  RunResult run() {
    switch (opt_.mode) {
      case RunMode::kPlan:
        return run_plan();
      default:
        return run_sim();
    }
  }

 private:
  // ---- plan mode -------------------------------------------------------
  RunResult run_plan() {
    RunResult res;
    res.scenario_name = scn_.name;
    res.seed = scn_.seed;
    const DistanceField field = make_distance_field();
    const Vec3 start = scn_.motion_waypoints.empty() ? Vec3::Zero()
                                                     : scn_.motion_waypoints.front();
    const Vec3 goal = scn_.plan_goal;
    BoundaryState s0, sf;
    s0.position = start;
    sf.position = goal;
    std::vector<Vec3> q;
    std::vector<double> times;
    if (scn_.motion_waypoints.size() > 2) {
      // route through the scenario's via points for a collision-aware guess
      q.assign(scn_.motion_waypoints.begin() + 1, scn_.motion_waypoints.end() - 1);
      for (size_t i = 0; i + 1 < scn_.motion_waypoints.size(); ++i) {
        const double len = (scn_.motion_waypoints[i + 1] - scn_.motion_waypoints[i]).norm();
        times.push_back(std::max(0.3, len / std::max(0.1, 0.5 * scn_.limits.vel_max)));
      }
      sf.position = scn_.motion_waypoints.back();
    } else {
      straight_line_guess(start, goal, scn_.plan_pieces, scn_.limits.vel_max, q, times);
    }
    const TrajOptResult opt = optimize_trajectory(q, times, s0, sf, scn_.limits, &field);

    if (!opt_.out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(opt_.out_dir);
      // 50 Hz trajectory export
      std::vector<std::vector<double>> rows;
      const double dt = 0.02;
      for (double t = 0.0; t <= opt.trajectory.duration() + 1e-9; t += dt) {
        const Vec3 p = opt.trajectory.eval(t, 0);
        const Vec3 v = opt.trajectory.eval(t, 1);
        const Vec3 a = opt.trajectory.eval(t, 2);
        rows.push_back({t, p.x(), p.y(), p.z(), v.x(), v.y(), v.z(), a.x(), a.y(), a.z()});
      }
      write_csv(opt_.out_dir + "/trajectory.csv",
                {"t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"}, rows);
      MetricsWriter w;
      w.set("scenario", scn_.name);
      w.set("mode", std::string("plan"));
      w.set("seed", static_cast<double>(scn_.seed));
      w.set("cost_initial", opt.initial_cost);
      w.set("cost_final", opt.final_cost);
      w.set("smooth_energy", opt.breakdown.smooth);
      w.set("total_time", opt.breakdown.time);
      w.set("feasibility_penalty",
            opt.breakdown.feas_vel + opt.breakdown.feas_acc + opt.breakdown.feas_jerk);
      w.set("obstacle_penalty", opt.breakdown.obstacle);
      double min_clearance = std::numeric_limits<double>::infinity();
      for (int i = 0; i < opt.trajectory.pieces(); ++i) {
        for (int k = 0; k < kQuadSamples; ++k) {
          const double tl = (k + 0.5) / kQuadSamples * opt.times[static_cast<size_t>(i)];
          min_clearance =
              std::min(min_clearance, field.distance(opt.trajectory.eval_piece(i, tl, 0)));
        }
      }
      w.set("min_clearance", min_clearance);
      w.set("iterations", static_cast<double>(opt.iterations));
      w.write(opt_.out_dir + "/metrics.txt");
    }
    return res;
  }

  // ---- simulated sensing modes ------------------------------------------
  RunResult run_sim() {
    RunResult res;
    res.scenario_name = scn_.name;
    res.seed = scn_.seed;
    const bool use_estimator =
        opt_.mode == RunMode::kOdometry || opt_.mode == RunMode::kFull;
    const bool plan_yaw =
        (opt_.mode == RunMode::kTrack || opt_.mode == RunMode::kFull);

    std::mt19937_64 rng(scn_.seed);
    const GroundTruthMotion motion = scn_.build_motion();
    const SO3 r_mount = mount_rotation(scn_.sensor);

    // executed yaw policy (track/full); odometry flies the scripted yaw
    detail::YawTimeline yaw_exec(0.0, motion.at(0.0).yaw);

    MotionFn platform_fn = [&](double t) {
      PlatformPose p = motion.at(t);
      if (plan_yaw) {
        p.yaw = yaw_exec.at(t);
        p.yaw_rate = yaw_exec.rate_at(t);
      }
      return p;
    };
    RingFn ring_fn = [&](double t) { return scn_.target.ring_at(t); };

    // IMU stream over the whole scenario
    const std::vector<ImuSample> imu_all = synthesize_imu(
        platform_fn, scn_.imu, scn_.imu_rate, 0.0, scn_.duration, rng, scn_.sensor);

    // tilt auto-calibration on the stationary hold
    double calib_pitch = 0.0;
    {
      std::vector<ImuSample> hold;
      for (const auto& s : imu_all) {
        if (s.stamp <= scn_.calibration_hold) hold.push_back(s);
      }
      if (hold.size() >= 10) {
        const TiltEstimate tilt = estimate_tilt(hold, 0.02);
        calib_pitch = -tilt.pitch;  // sensor-frame gravity ratio -> mount pitch
      }
    }
    res.calib_pitch = calib_pitch;

    // estimator init: known start pose, calibrated mount attitude
    SensorModel calibrated = scn_.sensor;
    calibrated.tilt_pitch = use_estimator ? calib_pitch : scn_.sensor.tilt_pitch;
    const SO3 r_mount_est = mount_rotation(calibrated);

    const PlatformPose pose0 = motion.at(0.0);
    StateVector xi;
    xi.t_wi = pose0.position;  // sensor co-located with the platform origin
    xi.phi_wi = SO3::rot_z(pose0.yaw) * r_mount_est;
    Mat18 cov = Mat18::Identity() * 1e-4;
    cov.block<3, 3>(kIdxVel, kIdxVel) = Mat3::Identity() * 1e-2;

    ImuNoiseModel noise_model;
    noise_model.sigma_g =
        Mat3::Identity() * std::max(1e-8, scn_.imu.gyro_noise * scn_.imu.gyro_noise);
    noise_model.sigma_a =
        Mat3::Identity() * std::max(1e-6, scn_.imu.accel_noise * scn_.imu.accel_noise);

    DualVoxelMap map;
    EntropyGridParams gp;
    gp.cell = scn_.grid_cell;
    EntropyGrid grid(scn_.world.bbox_min, scn_.world.bbox_max, gp);

    // descriptor keyframes, sampled by travelled distance
    std::vector<KeyframeEntry> keyframes;
    Vec3 last_keyframe_pos = xi.t_wi;

    TargetObservation target_est;  // planner-side estimate
    double last_detection_time = -1e9;

    const double scan_dt = scn_.sensor.scan_duration;
    const int n_scans = static_cast<int>(
        std::floor((scn_.duration - scn_.calibration_hold) / scan_dt - 0.5));
    const double replan_dt = 1.0 / scn_.yaw_params.replan_rate;
    double next_replan = scn_.calibration_hold;

    double adaptive_d = map.params().fine_resolution;
    std::vector<std::pair<double, double>> entropy_series;

    for (int k = 0; k < n_scans; ++k) {
      const double t0 = scn_.calibration_hold + k * scan_dt;
      const double t1 = t0 + scan_dt;

      // --- synthesize sensing for this interval
      LidarScan scan = synthesize_scan(scn_.world, scn_.sensor, platform_fn, t0,
                                       rng, ring_fn);
      std::vector<ImuSample> window;
      for (const auto& s : imu_all) {
        if (s.stamp >= t0 - 1e-9 && s.stamp <= t1 + 1e-9) window.push_back(s);
      }

      const PlatformPose gt_pose = platform_fn(t1);
      const SO3 gt_att = SO3::rot_z(gt_pose.yaw) * r_mount;

      StateVector xi_scan_start = xi;
      UpdateReport report;
      std::vector<Vec3> world_hits;    // pose-resolved points for grid/detection
      std::vector<Vec3> ray_origins;   // matching per-point sensor origins
      if (use_estimator && window.size() >= 2) {
        // propagate mean and covariance across the scan interval
        const ImuDeltas deltas = preintegrate(window, xi);
        for (size_t i = 0; i + 1 < window.size(); ++i) {
          const double h = window[i + 1].stamp - window[i].stamp;
          const Vec3 w_hat =
              0.5 * (window[i].omega + window[i + 1].omega) - xi.beta_g;
          const Vec3 a_hat =
              0.5 * (window[i].accel + window[i + 1].accel) - xi.beta_a;
          propagate_covariance(cov, xi, w_hat, a_hat, h, noise_model);
        }
        StateVector xi_prior = propagate_state(xi, deltas);

        // per-point undistortion with Bezier-interpolated motion; the
        // midpoint control value is the raw sample nearest to the center
        MotionInterp interp;
        const ImuSample& sk = window.front();
        const ImuSample& sk1 = window.back();
        const ImuSample& sm = window[window.size() / 2];
        interp.build(xi_scan_start, t0, t1, sk.omega, sm.omega, sk1.omega,
                     sk.accel, sm.accel, sk1.accel);
        std::vector<Vec3> world_pts, origin_pts;
        world_pts.reserve(scan.points.size());
        origin_pts.reserve(scan.points.size());
        for (const auto& lp : scan.points) {
          if (auto pw = undistort_point(lp.p, lp.stamp, interp, scan.t_li)) {
            world_pts.push_back(*pw);
            origin_pts.push_back(
                *undistort_point(Vec3::Zero(), lp.stamp, interp, scan.t_li));
          }
        }
        // anchor the scan rigidly at the propagated end state
        std::vector<Vec3> body_pts, origin_body;
        body_pts.reserve(world_pts.size());
        origin_body.reserve(world_pts.size());
        const SO3 r_end_inv = xi_prior.phi_wi.inverse();
        for (size_t i = 0; i < world_pts.size(); ++i) {
          body_pts.push_back(r_end_inv * (world_pts[i] - xi_prior.t_wi));
          origin_body.push_back(r_end_inv * (origin_pts[i] - xi_prior.t_wi));
        }
        const std::vector<Vec3> body_ds = voxel_downsample(body_pts, adaptive_d);
        adaptive_d = adapt_resolution(adaptive_d, static_cast<int>(body_ds.size()),
                                      scn_.downsample_target, scn_.downsample_eta,
                                      map.params().d_min, map.params().d_max);

        if (map.fine_size() == 0) {
          xi = xi_prior;  // bootstrap scan: no reference map yet
        } else {
          const IeskfResult up = ieskf_update(xi_prior, cov, body_ds, map, scn_.ieskf);
          xi = up.state;
          cov = up.covariance;
          report = up.report;
        }

        // map insertion at the posterior pose; the anchored body points
        // keep the per-point motion compensation
        world_hits.reserve(body_pts.size());
        ray_origins.reserve(body_pts.size());
        for (size_t i = 0; i < body_pts.size(); ++i) {
          world_hits.push_back(xi.phi_wi * body_pts[i] + xi.t_wi);
          ray_origins.push_back(xi.phi_wi * origin_body[i] + xi.t_wi);
        }
        map.insert_points(world_hits, xi.t_wi, k);

        // keyframe descriptors every keyframe_spacing meters
        if ((xi.t_wi - last_keyframe_pos).norm() >= scn_.keyframe_spacing) {
          keyframes.push_back(
              {{xi.t_wi, xi.phi_wi.yaw()}, sh_descriptor(body_ds, 4)});
          last_keyframe_pos = xi.t_wi;
        }
      } else {
        // ground-truth pose feed (track mode): project every point with
        // its own pose so the grid sees an undistorted cloud
        xi.t_wi = gt_pose.position;
        xi.phi_wi = gt_att;
        world_hits.reserve(scan.points.size());
        ray_origins.reserve(scan.points.size());
        for (const auto& lp : scan.points) {
          const PlatformPose pp = platform_fn(lp.stamp);
          const SO3 att = SO3::rot_z(pp.yaw) * r_mount;
          world_hits.push_back(att * (lp.p + scan.t_li) + pp.position);
          ray_origins.push_back(pp.position + att * scan.t_li);
        }
      }

      // --- entropy grid update from the pose-resolved scan
      for (size_t i = 0; i < world_hits.size(); ++i) {
        grid.raycast_update(ray_origins[i], world_hits[i]);
      }

      // --- ring detection for the planner
      bool detected = false;
      if (scn_.target.active && t1 >= scn_.target.start_time) {
        const bool have_prediction = (t1 - last_detection_time) < 1.5;
        const Vec3 predicted = target_est.position;
        std::vector<Vec3> candidates;
        for (const auto& pw : world_hits) {
          if (pw.z() < 0.1 || pw.z() > scn_.target.ring_height +
                                            scn_.target.ring_radius + 0.3) {
            continue;
          }
          if (have_prediction &&
              (pw - predicted).head<2>().norm() > 1.5) {
            continue;
          }
          candidates.push_back(pw);
          if (candidates.size() >= 4000) break;
        }
        if (candidates.size() >= 10) {
          RingDetectParams rp;
          if (have_prediction) {
            if (auto det = detect_ring(candidates, scn_.target.ring_radius, rng, rp)) {
              target_est.position = det->center;
              target_est.valid = true;
              last_detection_time = t1;
              detected = true;
            }
          } else {
            // acquisition: segment compact clusters first, then fit each
            const auto clusters = cluster_points(candidates, 0.5);
            int best_inliers = 0;
            for (const auto& cl : clusters) {
              if (cl.size() < 10 || cl.size() > 3000) continue;
              Vec3 lo = cl.front(), hi = cl.front();
              for (const auto& p : cl) {
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
              }
              if ((hi - lo).norm() > 2.5) continue;
              if (auto det = detect_ring(cl, scn_.target.ring_radius, rng, rp)) {
                if (det->inliers > best_inliers) {
                  best_inliers = det->inliers;
                  target_est.position = det->center;
                  target_est.valid = true;
                  last_detection_time = t1;
                  detected = true;
                }
              }
            }
          }
        }
        if (t1 - last_detection_time > 1.5) target_est.valid = false;
      } else {
        target_est.valid = false;
      }

      // --- receding-horizon yaw replanning
      if (plan_yaw && t1 >= next_replan) {
        next_replan += replan_dt;
        if (opt_.yaw_policy == YawPolicy::kPerceptionAware) {
          const double rel_t = t1 - scn_.calibration_hold;
          const auto seq = receding_replan(
              gt_pose.position, yaw_exec.at(t1), rel_t, motion.position_spline(),
              grid, target_est, {}, scn_.yaw_weights, scn_.yaw_params);
          std::vector<std::pair<double, double>> abs_seq;
          for (const auto& [ts, psi] : seq.sequence) {
            abs_seq.emplace_back(ts + scn_.calibration_hold, psi);
          }
          yaw_exec.splice(t1, abs_seq);
        } else {
          // differential baseline: yaw follows the velocity direction
          std::vector<std::pair<double, double>> abs_seq;
          for (int j = 1; j <= 4; ++j) {
            const double ts = t1 + j * scn_.yaw_params.dt;
            const PlatformPose fp = motion.at(ts);
            const double psi = fp.velocity.head<2>().norm() > 0.05
                                   ? std::atan2(fp.velocity.y(), fp.velocity.x())
                                   : yaw_exec.at(t1);
            abs_seq.emplace_back(ts, psi);
          }
          yaw_exec.splice(t1, abs_seq);
        }
      }

      // --- record
      ScanRecord rec;
      rec.t = t1;
      rec.est_position = use_estimator ? xi.t_wi : gt_pose.position;
      rec.gt_position = gt_pose.position;
      rec.exec_yaw = plan_yaw ? yaw_exec.at(t1) : gt_pose.yaw;
      if (scn_.target.active && t1 >= scn_.target.start_time) {
        const Vec3 tp = scn_.target.position_at(t1);
        const double bearing = detail::bearing_of(gt_pose.position, tp);
        rec.target_angle = std::abs(wrap_angle(bearing - rec.exec_yaw));
        rec.target_detected = detected;
      }
      rec.total_entropy = grid.total_entropy();
      rec.matched = report.matched;
      rec.iterations = report.iterations;
      rec.constraint_entropy = report.entropy;
      rec.degenerate = report.degenerate;
      rec.update_skipped = report.skipped;
      res.records.push_back(rec);
      entropy_series.emplace_back(t1, rec.total_entropy);

      if (!opt_.out_dir.empty() && opt_.pgm_every > 0 && k % opt_.pgm_every == 0) {
        namespace fs = std::filesystem;
        fs::create_directories(opt_.out_dir);
        int wpx = 0, hpx = 0;
        const auto img = grid.entropy_image(&wpx, &hpx);
        char name[64];
        std::snprintf(name, sizeof(name), "/entropy_%04d.pgm", k);
        write_pgm(opt_.out_dir + name, wpx, hpx, img);
      }
    }

    res.entropy_series = entropy_series;
    res.keyframes = std::move(keyframes);
    res.metrics = compute_metrics(res.records, scn_.yaw_params.psi_th,
                                  !scn_.target.active);
    res.metrics.calib_pitch_deg = calib_pitch * 180.0 / kPi;
    res.diverged = res.metrics.ate_rmse > 1.0;

    if (!opt_.out_dir.empty()) {
      write_outputs(res, map, grid);
    }
    return res;
  }

  DistanceField make_distance_field() const {
    const Vec3 origin = scn_.world.bbox_min;
    const double cell = 0.25;
    Eigen::Vector3i dims;
    for (int i = 0; i < 3; ++i) {
      dims[i] = std::max(
          2, static_cast<int>(std::ceil((scn_.world.bbox_max[i] - origin[i]) / cell)));
    }
    const World& world = scn_.world;
    return DistanceField(origin, dims, cell, [&](int x, int y, int z) {
      const Vec3 p = origin + cell * Vec3(x + 0.5, y + 0.5, z + 0.5);
      return world.occupied(p);
    });
  }

  void write_outputs(const RunResult& res, const DualVoxelMap& map,
                     const EntropyGrid& grid) const {
    namespace fs = std::filesystem;
    fs::create_directories(opt_.out_dir);

    std::vector<std::vector<double>> est_rows, gt_rows, entropy_rows, yaw_rows;
    for (const auto& r : res.records) {
      est_rows.push_back({r.t, r.est_position.x(), r.est_position.y(),
                          r.est_position.z(), r.exec_yaw,
                          static_cast<double>(r.matched),
                          static_cast<double>(r.iterations), r.constraint_entropy,
                          r.degenerate ? 1.0 : 0.0});
      gt_rows.push_back({r.t, r.gt_position.x(), r.gt_position.y(),
                         r.gt_position.z()});
      yaw_rows.push_back({r.t, r.exec_yaw});
    }
    for (const auto& [t, e] : res.entropy_series) entropy_rows.push_back({t, e});
    write_csv(opt_.out_dir + "/estimated.csv",
              {"t", "x", "y", "z", "yaw", "matched", "iterations", "H", "degenerate"},
              est_rows);
    write_csv(opt_.out_dir + "/ground_truth.csv", {"t", "x", "y", "z"}, gt_rows);
    write_csv(opt_.out_dir + "/yaw_sequence.csv", {"t", "psi"}, yaw_rows);
    write_csv(opt_.out_dir + "/entropy_series.csv", {"t", "total_entropy"},
              entropy_rows);
    write_ply(opt_.out_dir + "/map.ply", map.fine_means());
    {
      int wpx = 0, hpx = 0;
      const auto img = grid.entropy_image(&wpx, &hpx);
      write_pgm(opt_.out_dir + "/entropy_final.pgm", wpx, hpx, img);
    }
    if (!res.keyframes.empty()) {
      std::vector<std::vector<double>> kf_rows;
      for (const auto& kf : res.keyframes) {
        std::vector<double> row{kf.pose.position.x(), kf.pose.position.y(),
                                kf.pose.position.z(), kf.pose.yaw};
        for (double e : kf.descriptor.band_energy) row.push_back(e);
        kf_rows.push_back(row);
      }
      std::vector<std::string> header{"x", "y", "z", "yaw"};
      for (size_t l = 0; l < res.keyframes.front().descriptor.band_energy.size(); ++l) {
        header.push_back("band" + std::to_string(l));
      }
      write_csv(opt_.out_dir + "/keyframes.csv", header, kf_rows);
    }

    MetricsWriter w;
    w.set("scenario", res.scenario_name);
    w.set("mode", opt_.mode == RunMode::kOdometry ? "odometry"
                  : opt_.mode == RunMode::kTrack  ? "track"
                                                  : "full");
    w.set("yaw_mode", opt_.yaw_policy == YawPolicy::kPerceptionAware
                          ? "perception-aware"
                          : "differential");
    w.set("mount", opt_.mount == MountType::kTiltedDown ? "tilted-down"
                                                        : "conventional");
    w.set("seed", static_cast<double>(res.seed));
    w.set("diverged", res.diverged ? 1.0 : 0.0);
    fill_metrics(w, res.metrics);
    w.write(opt_.out_dir + "/metrics.txt");
  }

  Scenario scn_;
  RunOptions opt_;
};

inline RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  ScenarioRunner runner(scenario, options);
  return runner.run();
}

}  // namespace earol

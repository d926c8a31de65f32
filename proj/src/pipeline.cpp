#include "evd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "evd/kernels.hpp"
#include "evd/time_image.hpp"

namespace evd::pipeline {

namespace fs = std::filesystem;

EstimatorMode estimator_mode_from_string(const std::string& s) {
    if (s == "mono") return EstimatorMode::mono;
    if (s == "fusion") return EstimatorMode::fusion;
    throw cfg::ConfigError("unknown estimator mode: " + s);
}

const char* estimator_mode_name(EstimatorMode m) {
    return m == EstimatorMode::mono ? "mono" : "fusion";
}

namespace {

std::string resolve(const std::string& base, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base) / p).string();
}

geom::Pose pose_from_string(const std::string& s, const std::string& key) {
    double qw, qx, qy, qz, tx, ty, tz;
    if (std::sscanf(s.c_str(), "%lf %lf %lf %lf %lf %lf %lf", &qw, &qx, &qy,
                    &qz, &tx, &ty, &tz) != 7)
        throw cfg::ConfigError("key '" + key +
                               "' must be 'qw qx qy qz tx ty tz'");
    return geom::Pose::from_quaternion(qw, qx, qy, qz, {tx, ty, tz});
}

geom::Intrinsics intrinsics_from(const cfg::KeyValues& kv,
                                 const std::string& section,
                                 const geom::Intrinsics& def) {
    geom::Intrinsics K;
    K.fx = kv.get_double(section + ".fx", def.fx);
    K.fy = kv.get_double(section + ".fy", def.fy);
    K.cx = kv.get_double(section + ".cx", def.cx);
    K.cy = kv.get_double(section + ".cy", def.cy);
    K.width = kv.get_int(section + ".width", def.width);
    K.height = kv.get_int(section + ".height", def.height);
    if (!K.valid())
        throw cfg::ConfigError("invalid intrinsics in section [" + section + "]");
    return K;
}

}  // namespace

RunConfig RunConfig::from_config(const cfg::KeyValues& kv,
                                 const std::string& base_dir) {
    RunConfig c;
    c.events_path = resolve(base_dir, kv.require_string("dataset.events"));
    c.imu_path = resolve(base_dir, kv.get_string("dataset.imu", ""));
    c.poses_path = resolve(base_dir, kv.require_string("dataset.poses"));
    c.velocity_path = resolve(base_dir, kv.get_string("dataset.velocity", ""));
    c.depth_index_path =
        resolve(base_dir, kv.get_string("dataset.depth_index", ""));
    c.depth_dir = resolve(base_dir, kv.get_string("dataset.depth_dir", ""));
    c.ground_truth_path =
        resolve(base_dir, kv.get_string("dataset.ground_truth", ""));
    c.event_truth_path =
        resolve(base_dir, kv.get_string("dataset.event_truth", ""));
    c.output_dir = resolve(base_dir, kv.get_string("pipeline.output_dir", "out"));

    const sim::SceneConfig scene_defaults;
    c.event_K = intrinsics_from(kv, "event_camera", scene_defaults.event_K);
    c.depth_K = intrinsics_from(kv, "depth_camera", scene_defaults.depth_K);
    if (kv.has("depth_camera.extrinsic"))
        c.T_E_D = pose_from_string(kv.require_string("depth_camera.extrinsic"),
                                   "depth_camera.extrinsic");
    else
        c.T_E_D = scene_defaults.T_E_D;
    if (kv.has("imu.extrinsic"))
        c.T_E_imu = pose_from_string(kv.require_string("imu.extrinsic"),
                                     "imu.extrinsic");

    c.window = kv.get_double("pipeline.window", events::kDefaultWindow);
    c.compensation = mc::mode_from_string(
        kv.get_string("pipeline.compensation", "rotation+translation"));
    c.estimator = estimator_mode_from_string(
        kv.get_string("pipeline.estimator", "fusion"));
    const std::string vel_src = kv.get_string("pipeline.velocity_source", "file");
    if (vel_src == "file")
        c.velocity_source = VelocitySource::velocity_file;
    else if (vel_src == "pose_diff")
        c.velocity_source = VelocitySource::pose_difference;
    else
        throw cfg::ConfigError("unknown velocity_source: " + vel_src);
    c.kernel_backend = kv.get_string("pipeline.kernel", "auto");
    c.dump_time_images = kv.get_bool("pipeline.dump_time_images", false);
    c.contrast_box_margin =
        kv.get_double("pipeline.contrast_box_margin", c.contrast_box_margin);

    c.threshold.a = kv.get_double("threshold.a", c.threshold.a);
    c.threshold.b = kv.get_double("threshold.b", c.threshold.b);
    c.threshold.c = kv.get_double("threshold.c", c.threshold.c);

    c.fit.max_iterations = kv.get_int("detection.max_iterations", c.fit.max_iterations);
    c.fit.delta_center = kv.get_double("detection.delta_center", c.fit.delta_center);
    c.fit.delta_side = kv.get_double("detection.delta_side", c.fit.delta_side);
    c.fit.min_side = kv.get_double("detection.min_side", c.fit.min_side);
    c.retrieval_area_fraction =
        kv.get_double("detection.retrieval_area_fraction", c.retrieval_area_fraction);
    c.detection_min_pixels =
        kv.get_int("detection.min_pixels", c.detection_min_pixels);
    c.detection_min_peak =
        kv.get_double("detection.min_peak", c.detection_min_peak);

    c.tracker.jerk_psd = kv.get_double("tracker.jerk_psd", c.tracker.jerk_psd);
    c.tracker.meas_sigma = kv.get_double("tracker.meas_sigma", c.tracker.meas_sigma);
    c.tracker.gate.max_dt = kv.get_double("tracker.max_dt", c.tracker.gate.max_dt);
    c.tracker.gate.max_dist =
        kv.get_double("tracker.max_dist", c.tracker.gate.max_dist);
    c.tracker.miss_limit = kv.get_int("tracker.miss_limit", c.tracker.miss_limit);
    c.tracker.init_pos_sigma =
        kv.get_double("tracker.init_pos_sigma", c.tracker.init_pos_sigma);
    c.tracker.init_vel_sigma =
        kv.get_double("tracker.init_vel_sigma", c.tracker.init_vel_sigma);
    c.tracker.init_acc_sigma =
        kv.get_double("tracker.init_acc_sigma", c.tracker.init_acc_sigma);

    c.segmentation.bin_width =
        kv.get_double("depth_seg.bin_width", c.segmentation.bin_width);
    c.segmentation.min_peak_count =
        kv.get_int("depth_seg.min_peak_count", c.segmentation.min_peak_count);
    c.segmentation.variance_gate =
        kv.get_double("depth_seg.variance_gate", c.segmentation.variance_gate);
    c.segmentation.pixel_floor =
        kv.get_int("depth_seg.pixel_floor", c.segmentation.pixel_floor);
    c.roi_scale = kv.get_double("depth_seg.roi_scale", c.roi_scale);
    c.depth_roi_max_age = kv.get_double("depth_seg.max_age", c.depth_roi_max_age);
    c.depth_min_track_obs = static_cast<std::size_t>(
        kv.get_int("depth_seg.min_track_obs",
                   static_cast<int>(c.depth_min_track_obs)));
    c.depth_assoc_gate = kv.get_double("depth_seg.assoc_gate", c.depth_assoc_gate);
    c.depth_rate_gate = kv.get_double("depth_seg.rate_gate", c.depth_rate_gate);
    c.depth_roi_min_side =
        kv.get_double("depth_seg.roi_min_side", c.depth_roi_min_side);

    c.solver.huber_event = kv.get_double("solver.huber_event", c.solver.huber_event);
    c.solver.huber_depth = kv.get_double("solver.huber_depth", c.solver.huber_depth);
    c.solver.max_iterations =
        kv.get_int("solver.max_iterations", c.solver.max_iterations);
    c.solver.gradient_tol = kv.get_double("solver.gradient_tol", c.solver.gradient_tol);
    c.solver.step_tol = kv.get_double("solver.step_tol", c.solver.step_tol);
    c.solver.lambda_init = kv.get_double("solver.lambda_init", c.solver.lambda_init);
    c.solver.lambda_factor =
        kv.get_double("solver.lambda_factor", c.solver.lambda_factor);
    c.solver.lambda_max = kv.get_double("solver.lambda_max", c.solver.lambda_max);
    c.solver.event_weight = kv.get_double("solver.event_weight", c.solver.event_weight);
    c.solver.depth_weight = kv.get_double("solver.depth_weight", c.solver.depth_weight);
    c.solver.min_z = kv.get_double("solver.min_z", c.solver.min_z);
    c.gravity = kv.get_vec3("solver.gravity", c.gravity);
    return c;
}

sim::SceneConfig scene_from_config(const cfg::KeyValues& kv) {
    sim::SceneConfig s;
    s.event_K = intrinsics_from(kv, "event_camera", s.event_K);
    s.depth_K = intrinsics_from(kv, "depth_camera", s.depth_K);
    if (kv.has("depth_camera.extrinsic"))
        s.T_E_D = pose_from_string(kv.require_string("depth_camera.extrinsic"),
                                   "depth_camera.extrinsic");
    s.duration = kv.get_double("scene.duration", s.duration);
    s.motion = sim::camera_motion_from_string(
        kv.get_string("scene.motion", sim::camera_motion_name(s.motion)));
    s.forward_speed = kv.get_double("scene.forward_speed", s.forward_speed);
    s.yaw_rate = kv.get_double("scene.yaw_rate", s.yaw_rate);
    s.swing_amplitude = kv.get_double("scene.swing_amplitude", s.swing_amplitude);
    s.swing_frequency = kv.get_double("scene.swing_frequency", s.swing_frequency);
    s.camera_start = kv.get_vec3("scene.camera_start", s.camera_start);
    s.ball_enabled = kv.get_bool("scene.ball_enabled", s.ball_enabled);
    s.ball_p0 = kv.get_vec3("scene.ball_p0", s.ball_p0);
    s.ball_v0 = kv.get_vec3("scene.ball_v0", s.ball_v0);
    s.ball_t0 = kv.get_double("scene.ball_t0", s.ball_t0);
    s.ball_diameter = kv.get_double("scene.ball_diameter", s.ball_diameter);
    s.ball_surface_points =
        kv.get_int("scene.ball_surface_points", s.ball_surface_points);
    s.gravity = kv.get_vec3("scene.gravity", s.gravity);
    s.wall_distance = kv.get_double("scene.wall_distance", s.wall_distance);
    s.wall_density = kv.get_double("scene.wall_density", s.wall_density);
    s.wall_half_width = kv.get_double("scene.wall_half_width", s.wall_half_width);
    s.wall_half_height = kv.get_double("scene.wall_half_height", s.wall_half_height);
    s.depth_rate = kv.get_double("scene.depth_rate", s.depth_rate);
    s.imu_rate = kv.get_double("scene.imu_rate", s.imu_rate);
    s.pose_rate = kv.get_double("scene.pose_rate", s.pose_rate);
    s.pixel_jitter = kv.get_double("scene.pixel_jitter", s.pixel_jitter);
    s.depth_noise = kv.get_double("scene.depth_noise", s.depth_noise);
    s.timestamp_jitter = kv.get_double("scene.timestamp_jitter", s.timestamp_jitter);
    s.noise_rate = kv.get_double("scene.noise_rate", s.noise_rate);
    s.seed = static_cast<std::uint64_t>(kv.get_double("scene.seed", 1));
    s.event_substep = kv.get_double("scene.event_substep", s.event_substep);
    s.gt_window = kv.get_double("scene.gt_window", s.gt_window);
    return s;
}

img::Grid median_filter3(const img::Grid& in) {
    img::Grid out(in.width, in.height, 0.0);
    double window[9];
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (in.in_bounds(nx, ny)) window[n++] = in.at(nx, ny);
                }
            std::sort(window, window + n);
            out.at(x, y) = window[n / 2];
        }
    }
    return out;
}

img::Grid contrast_denoise(const ti::NormalizedMeanTimeImage& N,
                           const events::PixelGrid& groups) {
    img::Grid kept = N.values;
    for (std::size_t i = 0; i < kept.data.size(); ++i)
        if (groups.count[i] < 2) kept.data[i] = 0.0;
    return median_filter3(kept);
}

double relative_contrast(const img::Grid& denoised,
                         const sim::GroundTruthBox& box) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(box.cx - box.w / 2.0)));
    const int x1 = std::min(denoised.width - 1,
                            static_cast<int>(std::floor(box.cx + box.w / 2.0)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(box.cy - box.h / 2.0)));
    const int y1 = std::min(denoised.height - 1,
                            static_cast<int>(std::floor(box.cy + box.h / 2.0)));
    if (x1 < x0 || y1 < y0) throw MetricError("object box contains no pixel");

    double max_m = -std::numeric_limits<double>::infinity();
    double max_b = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < denoised.height; ++y)
        for (int x = 0; x < denoised.width; ++x) {
            const double v = denoised.at(x, y);
            if (x >= x0 && x <= x1 && y >= y0 && y <= y1)
                max_m = std::max(max_m, v);
            else
                max_b = std::max(max_b, v);
        }
    if (!(max_m > 0.0)) throw MetricError("object box has no signal");
    return (max_m - max_b) / max_m;
}

ApeStats ape(const traj::BallisticTrajectory& estimate,
             const traj::BallisticTrajectory& truth, double t_begin,
             double t_end, double sample_dt) {
    if (!(t_end >= t_begin)) throw MetricError("disjoint evaluation interval");
    ApeStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0, sum_sq = 0.0;
    const auto n_steps = static_cast<long>(std::floor((t_end - t_begin) / sample_dt));
    for (long k = 0; k <= n_steps; ++k) {
        const double t = t_begin + static_cast<double>(k) * sample_dt;
        const double err = (traj::ballistic_position(estimate, t) -
                            traj::ballistic_position(truth, t))
                               .norm();
        sum += err;
        sum_sq += err * err;
        s.min = std::min(s.min, err);
        s.max = std::max(s.max, err);
        ++s.samples;
    }
    s.mean = sum / static_cast<double>(s.samples);
    s.rmse = std::sqrt(sum_sq / static_cast<double>(s.samples));
    return s;
}

namespace {

struct WindowLog {
    double t0 = 0.0;
    bool detected = false;
    double cx = 0.0, cy = 0.0;
};

std::string fmt(const char* format, ...)
#if defined(__GNUC__)
    __attribute__((format(printf, 1, 2)))
#endif
    ;

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

}  // namespace

MetricsReport run(const RunConfig& cfg) {
    using clock = std::chrono::steady_clock;

    if (cfg.kernel_backend == "scalar")
        kernels::force_backend(kernels::Backend::scalar);
    else if (cfg.kernel_backend == "avx2")
        kernels::force_backend(kernels::Backend::avx2);
    else if (cfg.kernel_backend == "auto")
        kernels::force_backend(std::nullopt);
    else
        throw cfg::ConfigError("unknown kernel backend: " + cfg.kernel_backend);

    // Dataset loading.
    events::EventFile event_file;
    std::vector<mc::ImuSample> imu;
    geom::PoseTrack poses;
    std::vector<mc::VelocitySample> velocity;
    std::vector<depth::DepthFrame> depth_frames;
    sim::GroundTruth truth;
    bool have_truth = false;
    try {
        event_file = events::load_event_file(cfg.events_path);
        if (!cfg.imu_path.empty()) imu = mc::load_imu_file(cfg.imu_path);
        poses = geom::load_pose_file(cfg.poses_path);
        if (!cfg.velocity_path.empty())
            velocity = mc::load_velocity_file(cfg.velocity_path);
        if (!cfg.depth_index_path.empty()) {
            const auto index = depth::load_depth_index(cfg.depth_index_path);
            for (const auto& entry : index) {
                depth::DepthFrame f;
                f.t = entry.t;
                f.K = cfg.depth_K;
                f.depth = depth::load_depth_pgm(
                    (fs::path(cfg.depth_dir) / entry.filename).string());
                f.pose = geom::compose(poses.at(entry.t), cfg.T_E_D);
                depth_frames.push_back(std::move(f));
            }
        }
        if (!cfg.ground_truth_path.empty() && fs::exists(cfg.ground_truth_path)) {
            truth = sim::load_ground_truth(cfg.ground_truth_path);
            have_truth = true;
        }
    } catch (const std::exception& e) {
        throw DatasetError(e.what());
    }

    if (event_file.width != cfg.event_K.width ||
        event_file.height != cfg.event_K.height)
        throw DatasetError("event file sensor size does not match intrinsics");

    // Rotate IMU rates into the event camera frame.
    for (auto& s : imu) {
        s.angular_velocity = cfg.T_E_imu.rotation * s.angular_velocity;
        s.accel = cfg.T_E_imu.rotation * s.accel;
    }

    fs::create_directories(cfg.output_dir);
    std::ofstream det_log(cfg.output_dir + "/detections.csv", std::ios::binary);
    std::ofstream track_log(cfg.output_dir + "/track.csv", std::ios::binary);
    std::ofstream obs_log(cfg.output_dir + "/observations.csv", std::ios::binary);
    if (cfg.dump_time_images)
        fs::create_directories(cfg.output_dir + "/time_images");

    MetricsReport report;
    report.events_in = event_file.events.size();

    const auto windows = events::window_stream(event_file.events, cfg.window);
    report.windows = windows.size();

    // Registered-depth cache, one slot per frame, filled on demand.
    std::vector<img::Grid> registered(depth_frames.size());
    auto registered_for = [&](std::size_t i) -> const img::Grid& {
        if (registered[i].width == 0)
            registered[i] = depth::register_depth(
                depth_frames[i], cfg.event_K, poses.at(depth_frames[i].t));
        return registered[i];
    };

    track::Tracker tracker(cfg.tracker);
    std::vector<traj::EventObservation> event_obs;
    std::vector<traj::DepthObservation> depth_obs;
    bool have_estimate = false;
    traj::BallisticTrajectory estimate_result;
    traj::EstimateDiagnostics solver_diag;
    double track_t0 = 0.0;

    std::optional<detect::DetectionROI> last_roi;
    double last_roi_t = -1e18;

    std::vector<double> comp_ms;
    std::vector<WindowLog> window_logs;
    std::size_t depth_cursor = 0;  // next unconsumed depth frame
    const img::Grid empty_depth;

    auto run_estimator = [&]() {
        if (event_obs.size() < 3) return;
        const std::span<const traj::DepthObservation> depths =
            cfg.estimator == EstimatorMode::fusion
                ? std::span<const traj::DepthObservation>(depth_obs)
                : std::span<const traj::DepthObservation>();
        const traj::BallisticTrajectory* warm =
            have_estimate ? &estimate_result : nullptr;
        estimate_result = traj::estimate(event_obs, depths, cfg.gravity,
                                         track_t0, cfg.solver, &solver_diag,
                                         warm);
        have_estimate = true;
    };

    for (const auto& buffer : windows) {
        const double t0 = buffer.t0;
        const double t_end = buffer.t0 + buffer.dt;
        WindowLog wlog;
        wlog.t0 = t0;

        // Depth frames due up to the end of this window: depth observations
        // against the most recent detection ROI.
        while (depth_cursor < depth_frames.size() &&
               depth_frames[depth_cursor].t <= t_end) {
            const auto& frame = depth_frames[depth_cursor];
            if (last_roi && tracker.has_track() &&
                event_obs.size() >= cfg.depth_min_track_obs &&
                frame.t >= last_roi_t - cfg.window &&
                frame.t <= last_roi_t + cfg.depth_roi_max_age) {
                // The ROI rides on the track prediction for the frame time:
                // the raw detection box lags a fast object by more than its
                // own size.
                detect::DetectionROI roi = *last_roi;
                const auto& ts = tracker.state();
                const auto pred = track::predict(
                    ts, std::max(frame.t, ts.last_update), cfg.tracker);
                roi.cx = pred.position().x();
                roi.cy = pred.position().y();
                detect::DetectionROI scaled =
                    depth::scale_roi(roi, cfg.roi_scale, cfg.event_K.width,
                                     cfg.event_K.height);
                scaled.w = std::max(scaled.w, cfg.depth_roi_min_side);
                scaled.h = std::max(scaled.h, cfg.depth_roi_min_side);
                if (scaled.w > 0.0 && scaled.h > 0.0) try {
                    const depth::DepthMeasurement m = depth::segment_depth(
                        registered_for(depth_cursor), frame.t, scaled,
                        cfg.segmentation);
                    ++report.depth_measurements;
                    bool associated = m.accepted;
                    // Consecutive object depths must be kinematically
                    // plausible.
                    if (associated && !depth_obs.empty()) {
                        const auto& prev = depth_obs.back();
                        const double dt_obs = std::max(1e-3, m.t - prev.t);
                        associated = std::abs(m.depth - prev.d) <=
                                     cfg.depth_rate_gate * dt_obs;
                    }
                    if (associated && have_estimate && solver_diag.converged) {
                        // Background depths (the wall behind a small object)
                        // can pass the variance gate; the current estimate
                        // arbitrates.
                        traj::DepthObservation cand{m.t, m.depth, frame.pose};
                        const double r =
                            traj::depth_residual(estimate_result, cand);
                        associated = std::abs(r) <= cfg.depth_assoc_gate;
                    }
                    if (associated) {
                        ++report.depth_accepted;
                        depth_obs.push_back({m.t, m.depth, frame.pose});
                        obs_log << fmt("D,%.9f,%.6f,%.6f,%d\n", m.t, m.depth,
                                       m.variance, m.pixel_count);
                        run_estimator();
                    }
                } catch (const std::exception& e) {
                    report.stage_failures.push_back(
                        std::string("depth_fusion: ") + e.what());
                }
            }
            ++depth_cursor;
        }

        // Most recent depth frame at or before t0 feeds per-event depth.
        const img::Grid* comp_depth = &empty_depth;
        if (cfg.compensation == mc::Mode::rotation_translation) {
            std::size_t best = depth_frames.size();
            for (std::size_t i = 0; i < depth_frames.size(); ++i) {
                if (depth_frames[i].t <= t0) best = i;
                else break;
            }
            if (best < depth_frames.size()) comp_depth = &registered_for(best);
        }

        geom::Vec3 omega = geom::Vec3::Zero();
        try {
            omega = mc::average_angular_velocity(imu, t0, t_end);
        } catch (const mc::MissingImuError&) {
            // No samples in this window: assume zero rates.
        }
        geom::Vec3 vel = geom::Vec3::Zero();
        if (cfg.velocity_source == VelocitySource::velocity_file &&
            !velocity.empty())
            vel = mc::velocity_at(velocity, t0 + cfg.window / 2.0);
        else
            vel = poses.velocity_at(t0 + cfg.window / 2.0);
        const geom::Pose pose_e = poses.at(t0);

        const auto comp_start = clock::now();
        const mc::WarpTable table = mc::build_warp_table(omega, vel, cfg.window);
        mc::CompensationStats stats;
        const auto warped = mc::compensate(buffer, cfg.compensation, table,
                                           cfg.event_K, pose_e, *comp_depth,
                                           &stats);
        const auto comp_end = clock::now();
        comp_ms.push_back(
            std::chrono::duration<double, std::milli>(comp_end - comp_start)
                .count());
        report.events_dropped += stats.dropped;
        report.events_without_depth += stats.without_depth;

        const auto grid =
            events::group_by_pixel(warped, cfg.event_K.width, cfg.event_K.height);
        report.events_dropped += grid.dropped;

        ti::NormalizedMeanTimeImage N;
        try {
            N = ti::normalize(ti::build_mean_time_image(grid, t0, buffer.dt));
        } catch (const ti::EmptyImageError&) {
            window_logs.push_back(wlog);
            continue;
        }

        if (cfg.dump_time_images)
            ti::dump_pgm(N, t0, buffer.dt,
                         cfg.output_dir + "/time_images/" +
                             fmt("n_%09lld.pgm",
                                 static_cast<long long>(std::llround(t0 * 1e6))));

        // Relative contrast against the ground-truth box of this window.
        if (have_truth) {
            for (const auto& box : truth.boxes) {
                if (std::abs(box.t0 - t0) > cfg.window / 2.0 || !box.visible)
                    continue;
                sim::GroundTruthBox dilated = box;
                dilated.w += 2.0 * cfg.contrast_box_margin;
                dilated.h += 2.0 * cfg.contrast_box_margin;
                try {
                    report.relative_contrast.push_back(
                        relative_contrast(contrast_denoise(N, grid), dilated));
                } catch (const MetricError&) {
                }
                break;
            }
        }

        const img::Grid S =
            detect::adaptive_threshold(N, omega, vel, cfg.threshold);
        const img::Grid P = detect::preprocess(S);

        std::size_t support = 0;
        double peak = 0.0;
        for (const double v : P.data) {
            if (v > 0.0) ++support;
            peak = std::max(peak, v);
        }

        std::optional<detect::DetectionROI> roi;
        try {
            if (support >= static_cast<std::size_t>(cfg.detection_min_pixels) &&
                peak >= cfg.detection_min_peak) {
                roi = detect::gaussian_fit_roi(P, cfg.fit);
                if (detect::needs_region_retrieval(roi, P.width, P.height,
                                                   cfg.retrieval_area_fraction)) {
                    const auto fallback = detect::moving_region_retrieval(P);
                    if (fallback) roi = fallback;
                }
            }
        } catch (const std::exception& e) {
            report.stage_failures.push_back(std::string("detection: ") +
                                            e.what());
            roi.reset();
        }

        if (roi) try {
            ++report.detections;
            det_log << fmt("%.9f,%.3f,%.3f,%.3f,%.3f,%.6f,%d\n", t0, roi->cx,
                           roi->cy, roi->w, roi->h, roi->mass,
                           roi->converged ? 1 : 0);

            const double t_obs = t_end;
            const track::Association assoc =
                tracker.process({roi->cx, roi->cy}, t_obs);
            if (assoc == track::Association::new_track) {
                event_obs.clear();
                depth_obs.clear();
                have_estimate = false;
                track_t0 = t_obs;
            }
            if (assoc != track::Association::reject) {
                const auto& ts = tracker.state();
                track_log << fmt("%.9f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.6f\n",
                                 t_obs, ts.x[0], ts.x[1], ts.x[2], ts.x[3],
                                 ts.x[4], ts.x[5], ts.P.trace());
                traj::EventObservation obs;
                obs.t = t_obs;
                obs.u = (ts.x[0] - cfg.event_K.cx) / cfg.event_K.fx;
                obs.v = (ts.x[1] - cfg.event_K.cy) / cfg.event_K.fy;
                obs.pose = poses.at(t_obs);
                event_obs.push_back(obs);
                obs_log << fmt("E,%.9f,%.6f,%.6f\n", obs.t, obs.u, obs.v);
                ++report.event_observations;
                last_roi = roi;
                last_roi_t = t_obs;
                run_estimator();
            }
            wlog.detected = true;
            wlog.cx = roi->cx;
            wlog.cy = roi->cy;
        } catch (const std::exception& e) {
            report.stage_failures.push_back(
                std::string("tracking/estimation: ") + e.what());
        }
        window_logs.push_back(wlog);
    }

    // Aggregates.
    if (!comp_ms.empty()) {
        report.comp_ms_min = *std::min_element(comp_ms.begin(), comp_ms.end());
        report.comp_ms_max = *std::max_element(comp_ms.begin(), comp_ms.end());
        double sum = 0.0;
        for (const double v : comp_ms) sum += v;
        report.comp_ms_avg = sum / static_cast<double>(comp_ms.size());
    }
    if (!report.relative_contrast.empty()) {
        report.contrast_min = *std::min_element(report.relative_contrast.begin(),
                                                report.relative_contrast.end());
        report.contrast_max = *std::max_element(report.relative_contrast.begin(),
                                                report.relative_contrast.end());
        double sum = 0.0;
        for (const double v : report.relative_contrast) sum += v;
        report.contrast_avg =
            sum / static_cast<double>(report.relative_contrast.size());
    }

    report.has_trajectory = have_estimate;
    if (have_estimate) {
        report.trajectory = estimate_result;
        report.solver_diag = solver_diag;
        traj::save_trajectory(cfg.output_dir + "/trajectory.txt",
                              estimate_result, solver_diag);
        const double t_last = event_obs.empty() ? track_t0 : event_obs.back().t;
        traj::save_trajectory_samples(cfg.output_dir + "/trajectory_samples.csv",
                                      estimate_result, t_last + 0.1);
        if (have_truth && truth.has_trajectory && !event_obs.empty()) {
            const double t_begin = std::max(event_obs.front().t, track_t0);
            const double t_end = event_obs.back().t;
            if (t_end >= t_begin)
                report.ape = ape(estimate_result, truth.trajectory, t_begin, t_end);
        }
    }

    if (have_truth) {
        std::size_t eligible = 0, hits = 0;
        for (const auto& box : truth.boxes) {
            if (!box.visible || box.object_events < 50) continue;
            ++eligible;
            for (const auto& w : window_logs) {
                if (std::abs(w.t0 - box.t0) > cfg.window / 2.0) continue;
                if (w.detected && std::abs(w.cx - box.cx) <= box.w / 2.0 &&
                    std::abs(w.cy - box.cy) <= box.h / 2.0)
                    ++hits;
                break;
            }
        }
        if (eligible > 0)
            report.detection_rate =
                static_cast<double>(hits) / static_cast<double>(eligible);
    }

    {
        std::ofstream metrics(cfg.output_dir + "/metrics.txt", std::ios::binary);
        metrics << format_metrics(report);
        std::ofstream timing(cfg.output_dir + "/timing.txt", std::ios::binary);
        timing << format_timing(report);
    }
    return report;
}

std::string format_metrics(const MetricsReport& m) {
    std::ostringstream out;
    out << fmt("windows=%zu\n", m.windows);
    out << fmt("events_in=%zu\n", m.events_in);
    out << fmt("events_dropped=%zu\n", m.events_dropped);
    out << fmt("events_without_depth=%zu\n", m.events_without_depth);
    out << fmt("detections=%zu\n", m.detections);
    out << fmt("depth_measurements=%zu\n", m.depth_measurements);
    out << fmt("depth_accepted=%zu\n", m.depth_accepted);
    out << fmt("event_observations=%zu\n", m.event_observations);
    if (!m.relative_contrast.empty()) {
        out << fmt("contrast_min=%.6f\ncontrast_avg=%.6f\ncontrast_max=%.6f\n",
                   m.contrast_min, m.contrast_avg, m.contrast_max);
        for (std::size_t i = 0; i < m.relative_contrast.size(); ++i)
            out << fmt("contrast_%zu=%.6f\n", i, m.relative_contrast[i]);
    }
    if (m.ape)
        out << fmt("ape_mean=%.6f\nape_min=%.6f\nape_max=%.6f\nape_rmse=%.6f\n",
                   m.ape->mean, m.ape->min, m.ape->max, m.ape->rmse);
    if (m.detection_rate) out << fmt("detection_rate=%.6f\n", *m.detection_rate);
    if (m.has_trajectory) {
        const auto& t = m.trajectory;
        out << fmt("trajectory_t0=%.9f\n", t.t0);
        out << fmt("trajectory_p0=%.9f %.9f %.9f\n", t.p0.x(), t.p0.y(), t.p0.z());
        out << fmt("trajectory_v0=%.9f %.9f %.9f\n", t.v0.x(), t.v0.y(), t.v0.z());
        out << fmt("solver_cost=%.9e\nsolver_iterations=%d\nsolver_converged=%d\n",
                   m.solver_diag.final_cost, m.solver_diag.iterations,
                   m.solver_diag.converged ? 1 : 0);
    }
    if (!m.stage_failures.empty()) {
        out << fmt("stage_failures=%zu\n", m.stage_failures.size());
        for (const auto& f : m.stage_failures) out << "stage_failure=" << f << "\n";
    }
    return out.str();
}

std::string format_timing(const MetricsReport& m) {
    std::ostringstream out;
    out << fmt("compensation_ms_min=%.3f\n", m.comp_ms_min);
    out << fmt("compensation_ms_avg=%.3f\n", m.comp_ms_avg);
    out << fmt("compensation_ms_max=%.3f\n", m.comp_ms_max);
    out << fmt("kernel_backend=%s\n",
               kernels::backend_name(kernels::active_backend()));
    return out.str();
}

}  // namespace evd::pipeline

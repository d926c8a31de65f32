// Acceptance suite: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Run all with no arguments or one with
// --criterion N.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evd/kernels.hpp"
#include "evd/pipeline.hpp"

using namespace evd;
namespace fs = std::filesystem;

namespace {

std::string g_detail;

void detail(const char* format, ...) __attribute__((format(printf, 1, 2)));
void detail(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    g_detail = buf;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string work_dir() {
    const auto dir = fs::temp_directory_path() / "evd_acceptance";
    fs::create_directories(dir);
    return dir.string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Shared synthetic observation sets: a camera flying forward at 2 m/s and a
// ball thrown at about 12 m/s toward it, observed as seven event detections
// and three depth segmentations inside 0.18 s.

geom::Pose forward_pose(double t) {
    geom::Mat3 R;
    R << 0, 0, 1, -1, 0, 0, 0, -1, 0;  // camera z = world x
    return {R, geom::Vec3(2.0 * t, 0.0, 1.3)};
}

struct Scenario {
    traj::BallisticTrajectory truth;
    std::vector<traj::EventObservation> events;
    std::vector<traj::DepthObservation> depths;
};

Scenario make_scenario(double pixel_sigma_px, double depth_sigma,
                       std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> npx(0.0, pixel_sigma_px / 230.0);
    std::normal_distribution<double> nd(0.0, depth_sigma);

    Scenario s;
    s.truth.t0 = 0.2;
    s.truth.p0 = {9.0, 0.6, 1.6};
    s.truth.v0 = {-11.5, -1.2, 2.2};
    s.truth.g = {0.0, 0.0, -9.81};

    for (int k = 0; k < 7; ++k) {
        const double t = s.truth.t0 + 0.18 * k / 6.0;
        const geom::Pose pose = forward_pose(t);
        const geom::Vec3 pc =
            pose.rotation.transpose() *
            (traj::ballistic_position(s.truth, t) - pose.translation);
        traj::EventObservation o;
        o.t = t;
        o.u = pc.x() / pc.z() + (pixel_sigma_px > 0 ? npx(rng) : 0.0);
        o.v = pc.y() / pc.z() + (pixel_sigma_px > 0 ? npx(rng) : 0.0);
        o.pose = pose;
        s.events.push_back(o);
    }
    for (int i = 0; i < 3; ++i) {
        const double t = s.truth.t0 + 0.03 + 0.06 * i;
        const geom::Pose pose = forward_pose(t);
        const geom::Vec3 pc =
            pose.rotation.transpose() *
            (traj::ballistic_position(s.truth, t) - pose.translation);
        traj::DepthObservation o;
        o.t = t;
        o.d = pc.z() + (depth_sigma > 0 ? nd(rng) : 0.0);
        o.pose = pose;
        s.depths.push_back(o);
    }
    return s;
}

// ---------------------------------------------------------------------------

bool criterion1_noiseless_recovery() {
    const Scenario s = make_scenario(0.0, 0.0, 1);
    traj::EstimateDiagnostics diag;
    traj::BallisticTrajectory est;

    double best_ms = 1e18;
    for (int rep = 0; rep < 5; ++rep) {
        const double start = now_ms();
        est = traj::estimate(s.events, s.depths, s.truth.g, s.truth.t0, {},
                             &diag);
        best_ms = std::min(best_ms, now_ms() - start);
    }
    const double p_err = (est.p0 - s.truth.p0).norm();
    const double v_err = (est.v0 - s.truth.v0).norm();
    detail("|p0 err|=%.2e m (<1e-6), |v0 err|=%.2e m/s (<1e-5), solve=%.3f ms "
           "(<50)",
           p_err, v_err, best_ms);
    return p_err < 1e-6 && v_err < 1e-5 && best_ms < 50.0 && diag.converged;
}

bool criterion2_fusion_beats_mono() {
    int rmse_ok = 0, fusion_wins = 0;
    const int trials = 20;
    double worst_fused = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const Scenario s = make_scenario(1.0, 0.05, 100 + trial);
        const auto fused =
            traj::estimate(s.events, s.depths, s.truth.g, s.truth.t0);
        const auto mono = traj::estimate(
            s.events, std::span<const traj::DepthObservation>(), s.truth.g,
            s.truth.t0);
        const double t0 = s.events.front().t, t1 = s.events.back().t;
        const auto ape_f = pipeline::ape(fused, s.truth, t0, t1);
        const auto ape_m = pipeline::ape(mono, s.truth, t0, t1);
        if (ape_f.rmse < 0.3) ++rmse_ok;
        if (ape_f.rmse < ape_m.rmse) ++fusion_wins;
        worst_fused = std::max(worst_fused, ape_f.rmse);
    }
    detail("fusion RMSE<0.3m in %d/20 (need >=18), fusion<mono in %d/20 "
           "(need >=18), worst fused RMSE=%.3f m",
           rmse_ok, fusion_wins, worst_fused);
    return rmse_ok >= 18 && fusion_wins >= 18;
}

bool criterion3_rotational_sharpness() {
    sim::SceneConfig scene;
    scene.motion = sim::CameraMotion::yaw;
    scene.yaw_rate = 1.0;
    scene.ball_enabled = false;
    scene.duration = 0.5;
    scene.wall_density = 10.0;
    scene.seed = 31;
    const auto ds = sim::generate(scene);

    const double dt = events::kDefaultWindow;
    const auto windows = events::window_stream(ds.events.events, dt);

    std::size_t within = 0, total = 0;
    double drift_sum = 0.0;
    std::size_t drift_n = 0;
    std::size_t event_index = 0;

    for (const auto& buf : windows) {
        const geom::Vec3 omega =
            mc::average_angular_velocity(ds.imu, buf.t0, buf.t0 + dt);
        const auto table = mc::build_warp_table(omega, geom::Vec3::Zero(), dt);
        const auto out = mc::compensate_rotation(buf, table, scene.event_K);

        const geom::Pose pose0 = sim::camera_pose(scene, buf.t0);
        const geom::Mat3 w2c = pose0.rotation.transpose();

        // Oracle: the source point of each event, projected at t0.
        auto ref_of = [&](std::size_t gi, geom::Vec2* uv) {
            const geom::Vec3 pc =
                w2c * (ds.truth.source_points[gi] - pose0.translation);
            if (pc.z() <= 0.0) return false;
            *uv = {scene.event_K.fx * pc.x() / pc.z() + scene.event_K.cx,
                   scene.event_K.fy * pc.y() / pc.z() + scene.event_K.cy};
            return true;
        };

        // Uncompensated drift over all events of the window.
        for (std::size_t i = 0; i < buf.events.size(); ++i) {
            geom::Vec2 ref;
            if (!ref_of(event_index + i, &ref)) continue;
            drift_sum += std::hypot(buf.events[i].x - ref.x(),
                                    buf.events[i].y - ref.y());
            ++drift_n;
        }

        // Compensated events, matched back to sources by timestamp order.
        std::size_t src = 0;
        for (const auto& e : out) {
            while (src < buf.events.size() && buf.events[src].t != e.t) ++src;
            if (src >= buf.events.size()) break;
            geom::Vec2 ref;
            if (ref_of(event_index + src, &ref)) {
                ++total;
                if (std::hypot(e.x - ref.x(), e.y - ref.y()) <= 1.0) ++within;
            }
            ++src;
        }
        event_index += buf.events.size();
    }
    const double frac = total ? static_cast<double>(within) / total : 0.0;
    const double mean_drift = drift_n ? drift_sum / drift_n : 0.0;
    const double bound = scene.event_K.fx * scene.yaw_rate * dt / 2.0;
    detail("within 1px: %.2f%% of %zu (need >=99%%); uncompensated mean "
           "drift %.2f px (> %.2f)",
           100.0 * frac, total, mean_drift, bound);
    return frac >= 0.99 && mean_drift > bound;
}

bool criterion4_translational_contrast() {
    const std::string dir = work_dir() + "/c4";
    sim::SceneConfig scene;
    scene.motion = sim::CameraMotion::forward;
    scene.forward_speed = 5.0;
    scene.duration = 0.45;
    // Longer lens plus dense wall texture put the scene into the regime the
    // comparison is about: background pixels see multiple events per window
    // (collapsing cleanly once translation is compensated) while the
    // residual rotation-only streaks merge into late-timestamp regions that
    // survive the median denoise.
    scene.event_K = {460.0, 460.0, 173.0, 130.0, 346, 260};
    scene.depth_K = {920.0, 920.0, 400.0, 300.0, 800, 600};
    scene.wall_distance = 4.0;
    scene.wall_half_width = 1.8;
    scene.wall_half_height = 1.4;
    scene.wall_density = 7300.0;
    // Nearly perpendicular 12 m/s throw in front of the wall.
    scene.ball_p0 = {3.8, -1.2, 1.5};
    scene.ball_v0 = {-2.0, 11.5, 2.2};
    scene.ball_t0 = 0.1;
    scene.seed = 41;
    const auto ds = sim::generate(scene);
    sim::write_dataset(ds, dir);

    pipeline::RunConfig cfg;
    cfg.events_path = dir + "/events.csv";
    cfg.imu_path = dir + "/imu.csv";
    cfg.poses_path = dir + "/poses.txt";
    cfg.velocity_path = dir + "/velocity.csv";
    cfg.depth_index_path = dir + "/depth/index.csv";
    cfg.depth_dir = dir + "/depth";
    cfg.ground_truth_path = dir + "/ground_truth.txt";
    cfg.event_K = scene.event_K;
    cfg.depth_K = scene.depth_K;
    cfg.T_E_D = scene.T_E_D;

    cfg.compensation = mc::Mode::rotation;
    cfg.output_dir = dir + "/out_rot";
    const auto rot = pipeline::run(cfg);

    cfg.compensation = mc::Mode::rotation_translation;
    cfg.output_dir = dir + "/out_rt";
    const auto rt = pipeline::run(cfg);

    detail("contrast avg: rotation-only %.3f, rotation+translation %.3f "
           "(need +0.10); windows %zu/%zu",
           rot.contrast_avg, rt.contrast_avg, rot.relative_contrast.size(),
           rt.relative_contrast.size());
    return !rt.relative_contrast.empty() && !rot.relative_contrast.empty() &&
           rt.contrast_avg >= rot.contrast_avg + 0.10;
}

bool criterion5_gaussian_fit() {
    std::mt19937 rng(51);
    std::uniform_real_distribution<double> usigma(3.0, 15.0);
    int ok = 0;
    double worst_center = 0.0, worst_side = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        const double sigma = usigma(rng);
        const double margin = 4.0 * sigma + 2.0;
        std::uniform_real_distribution<double> ux(margin, 240.0 - margin);
        std::uniform_real_distribution<double> uy(margin, 180.0 - margin);
        const double cx = ux(rng), cy = uy(rng);

        img::Grid S(240, 180, 0.0);
        for (int y = 0; y < 180; ++y)
            for (int x = 0; x < 240; ++x) {
                const double dx = (x - cx) / sigma, dy = (y - cy) / sigma;
                S.at(x, y) = std::exp(-0.5 * (dx * dx + dy * dy));
            }
        const auto roi = detect::gaussian_fit_roi(S);
        if (!roi) continue;
        const double center_err = std::hypot(roi->cx - cx, roi->cy - cy);
        const double side_err =
            std::max(std::abs(roi->w - 4 * sigma), std::abs(roi->h - 4 * sigma)) /
            (4 * sigma);
        worst_center = std::max(worst_center, center_err);
        worst_side = std::max(worst_side, side_err);
        if (center_err < 1.0 && side_err < 0.20 && roi->iterations <= 10) ++ok;
    }
    detail("50 blobs sigma in [3,15]: %d/50 ok; worst center err %.3f px "
           "(<1), worst side err %.1f%% (<20%%)",
           ok, worst_center, 100.0 * worst_side);
    return ok == 50;
}

bool criterion6_jacobians() {
    std::mt19937 rng(61);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    double worst = 0.0;
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        traj::BallisticTrajectory t;
        t.p0 = {u(rng) * 4, u(rng) * 4, 4.0 + u(rng)};
        t.v0 = {u(rng) * 8, u(rng) * 8, u(rng) * 8};
        t.t0 = 0.0;

        traj::EventObservation eo;
        eo.t = 0.05 + std::abs(u(rng)) * 0.2;
        eo.pose = geom::Pose::identity();
        eo.pose.translation = {u(rng), u(rng), u(rng)};
        eo.u = u(rng) * 0.3;
        eo.v = u(rng) * 0.3;

        traj::DepthObservation dobs;
        dobs.t = eo.t;
        dobs.pose = geom::Pose::identity();
        dobs.pose.translation = {u(rng), u(rng), u(rng)};
        dobs.d = 3.0;

        Eigen::Vector2d r0;
        Eigen::Matrix<double, 2, 6> Je;
        if (!traj::event_residual(t, eo, r0, &Je)) continue;
        Eigen::Matrix<double, 1, 6> Jd;
        traj::depth_residual(t, dobs, &Jd);
        ++checked;

        for (int p = 0; p < 6; ++p) {
            traj::BallisticTrajectory tp = t, tm = t;
            ((p < 3) ? tp.p0 : tp.v0)[p % 3] += h;
            ((p < 3) ? tm.p0 : tm.v0)[p % 3] -= h;
            Eigen::Vector2d rp, rm;
            if (!traj::event_residual(tp, eo, rp) ||
                !traj::event_residual(tm, eo, rm))
                return false;
            const Eigen::Vector2d fd = (rp - rm) / (2 * h);
            for (int row = 0; row < 2; ++row)
                worst = std::max(worst, std::abs(fd[row] - Je(row, p)) /
                                            std::max(1.0, std::abs(Je(row, p))));
            const double fdd =
                (traj::depth_residual(tp, dobs) - traj::depth_residual(tm, dobs)) /
                (2 * h);
            worst = std::max(worst, std::abs(fdd - Jd(0, p)) /
                                        std::max(1.0, std::abs(Jd(0, p))));
        }
    }
    detail("%d configs, worst relative error %.2e (<1e-6)", checked, worst);
    return checked >= 90 && worst < 1e-6;
}

bool criterion7_tracking() {
    // Noiseless: exact recovery from three position measurements.
    track::TrackerConfig exact_cfg;
    exact_cfg.jerk_psd = 0.0;
    exact_cfg.meas_sigma = 0.0;
    const track::Vec2 p0(5, 7), v0(30, -20), a0(40, 90);
    auto truth_state = [&](double t) -> track::Vec6 {
        track::Vec6 x;
        x << p0.x() + v0.x() * t + 0.5 * a0.x() * t * t,
            p0.y() + v0.y() * t + 0.5 * a0.y() * t * t, v0.x() + a0.x() * t,
            v0.y() + a0.y() * t, a0.x(), a0.y();
        return x;
    };
    track::TrackState s = track::make_track(p0, 0.0, exact_cfg);
    for (int k = 1; k <= 3; ++k) {
        const double t = 0.025 * k;
        const track::Vec6 x = truth_state(t);
        s = track::update(s, {x[0], x[1]}, t, exact_cfg);
    }
    const double exact_err = (s.x - truth_state(0.075)).cwiseAbs().maxCoeff();

    // Noisy: sigma = 1 px over 50 steps, RMSE of the final position error.
    track::TrackerConfig cfg;
    std::mt19937 rng(71);
    std::normal_distribution<double> noise(0.0, 1.0);
    double sum_sq = 0.0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        auto pos = [&](double t) {
            return track::Vec2(100 + 120 * t + 0.5 * 60 * t * t,
                               80 - 60 * t + 0.5 * 90 * t * t);
        };
        track::TrackState st = track::make_track(pos(0), 0.0, cfg);
        double t = 0.0;
        for (int k = 1; k < 50; ++k) {
            t = 0.025 * k;
            st = track::update(
                st, pos(t) + track::Vec2(noise(rng), noise(rng)), t, cfg);
        }
        sum_sq += (st.position() - pos(t)).squaredNorm();
    }
    const double rmse = std::sqrt(sum_sq / trials);
    detail("noiseless recovery err %.2e (<1e-6); noisy final-position RMSE "
           "%.3f px (<1)",
           exact_err, rmse);
    return exact_err < 1e-6 && rmse < 1.0;
}

pipeline::RunConfig default_run_config(const std::string& dir,
                                       const sim::SceneConfig& scene) {
    pipeline::RunConfig cfg;
    cfg.events_path = dir + "/events.csv";
    cfg.imu_path = dir + "/imu.csv";
    cfg.poses_path = dir + "/poses.txt";
    cfg.velocity_path = dir + "/velocity.csv";
    cfg.depth_index_path = dir + "/depth/index.csv";
    cfg.depth_dir = dir + "/depth";
    cfg.ground_truth_path = dir + "/ground_truth.txt";
    cfg.event_K = scene.event_K;
    cfg.depth_K = scene.depth_K;
    cfg.T_E_D = scene.T_E_D;
    return cfg;
}

bool criterion8_determinism() {
    const std::string dir = work_dir() + "/c8";
    sim::SceneConfig scene;
    scene.duration = 0.45;
    scene.wall_density = 8.0;
    scene.ball_t0 = 0.1;
    scene.seed = 81;
    const auto ds = sim::generate(scene);
    sim::write_dataset(ds, dir);

    auto cfg = default_run_config(dir, scene);
    cfg.output_dir = dir + "/out_a";
    pipeline::run(cfg);
    cfg.output_dir = dir + "/out_b";
    pipeline::run(cfg);

    const char* files[] = {"metrics.txt",    "trajectory.txt",
                           "trajectory_samples.csv", "detections.csv",
                           "track.csv",      "observations.csv"};
    for (const char* f : files) {
        const std::string a = file_bytes(dir + "/out_a/" + std::string(f));
        const std::string b = file_bytes(dir + "/out_b/" + std::string(f));
        if (a.empty() || a != b) {
            detail("mismatch or empty: %s", f);
            return false;
        }
    }
    detail("6 report/trajectory files byte-identical across two runs");
    return true;
}

bool criterion9_throughput() {
    const geom::Intrinsics K{230, 230, 173, 130, 346, 260};
    const double dt = events::kDefaultWindow;
    const geom::Vec3 omega(0.2, -0.5, 0.3);
    const geom::Vec3 vel(3.0, 0.5, -0.2);
    img::Grid depth_grid(K.width, K.height, 0.0);
    std::mt19937 rng(91);
    std::uniform_real_distribution<double> ud(1.0, 12.0);
    for (auto& v : depth_grid.data) v = ud(rng);

    auto make_buffer = [&](std::size_t n) {
        events::EventBuffer buf;
        buf.t0 = 0.0;
        buf.dt = dt;
        buf.events.reserve(n);
        std::uniform_int_distribution<int> ux(0, K.width - 1);
        std::uniform_int_distribution<int> uy(0, K.height - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = dt * static_cast<double>(i) / static_cast<double>(n);
            buf.events.push_back({ux(rng), uy(rng), t, 1});
        }
        return buf;
    };

    const geom::Pose pose = forward_pose(0.0);
    const std::size_t sizes[] = {10'000, 100'000, 1'000'000};
    double per_event_ns[3] = {0, 0, 0};
    double ms_200k = 0.0;
    for (int s = 0; s < 3; ++s) {
        const auto buf = make_buffer(sizes[s]);
        double best = 1e18;
        for (int rep = 0; rep < 5; ++rep) {
            const double start = now_ms();
            const auto table = mc::build_warp_table(omega, vel, dt);
            const auto out = mc::compensate(buf, mc::Mode::rotation_translation,
                                            table, K, pose, depth_grid);
            best = std::min(best, now_ms() - start);
            if (out.empty()) return false;  // keep the work observable
        }
        per_event_ns[s] = best * 1e6 / static_cast<double>(sizes[s]);
    }
    {
        const auto buf = make_buffer(200'000);
        double best = 1e18;
        for (int rep = 0; rep < 5; ++rep) {
            const double start = now_ms();
            const auto table = mc::build_warp_table(omega, vel, dt);
            const auto out = mc::compensate(buf, mc::Mode::rotation_translation,
                                            table, K, pose, depth_grid);
            best = std::min(best, now_ms() - start);
            if (out.empty()) return false;
        }
        ms_200k = best;
    }
    const double lo = std::min({per_event_ns[0], per_event_ns[1], per_event_ns[2]});
    const double hi = std::max({per_event_ns[0], per_event_ns[1], per_event_ns[2]});
    detail("per-event %.1f/%.1f/%.1f ns at 10k/100k/1M (ratio %.2f, <2); "
           "200k window %.2f ms (<25); backend %s",
           per_event_ns[0], per_event_ns[1], per_event_ns[2], hi / lo, ms_200k,
           kernels::backend_name(kernels::active_backend()));
    return hi / lo <= 2.0 && ms_200k < 25.0;
}

bool criterion10_detection_rate() {
    const std::string dir = work_dir() + "/c10";
    sim::SceneConfig scene;  // default fast-forward scene
    scene.duration = 0.7;
    scene.wall_density = 6.0;
    scene.ball_t0 = 0.15;
    scene.seed = 101;
    const auto ds = sim::generate(scene);
    sim::write_dataset(ds, dir);

    auto cfg = default_run_config(dir, scene);
    cfg.output_dir = dir + "/out";
    const auto report = pipeline::run(cfg);
    if (!report.detection_rate) {
        detail("no eligible ground-truth windows");
        return false;
    }
    detail("ROI center inside the true box in %.1f%% of eligible windows "
           "(need >=90%%)",
           100.0 * *report.detection_rate);
    return *report.detection_rate >= 0.90;
}

struct Criterion {
    int id;
    const char* name;
    std::function<bool()> fn;
};

const Criterion kCriteria[] = {
    {1, "noiseless trajectory recovery", criterion1_noiseless_recovery},
    {2, "fusion beats mono under noise", criterion2_fusion_beats_mono},
    {3, "rotational compensation sharpness", criterion3_rotational_sharpness},
    {4, "translational compensation contrast", criterion4_translational_contrast},
    {5, "iterative gaussian fit accuracy", criterion5_gaussian_fit},
    {6, "analytic jacobians vs finite differences", criterion6_jacobians},
    {7, "kalman tracking consistency", criterion7_tracking},
    {8, "pipeline determinism", criterion8_determinism},
    {9, "compensation throughput scaling", criterion9_throughput},
    {10, "detection rate on the forward scene", criterion10_detection_rate},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
    }

    int failures = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        g_detail.clear();
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            detail("exception: %s", e.what());
        }
        std::printf("%s c%-2d %s: %s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                    g_detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

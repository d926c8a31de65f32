#include "evd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace evd::sim {

namespace {

// Deterministic scalar RNG helpers. The generator is split per concern so
// adding draws in one place does not reshuffle another.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next() {
        // splitmix64
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal(double sigma) {
        if (sigma <= 0.0) return 0.0;
        const double u1 = std::max(uniform(), 0x1.0p-60);
        const double u2 = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        // Count unit-rate exponential arrivals inside [0, lambda]; exact for
        // any lambda (no e^-lambda underflow).
        int k = 0;
        double acc = -std::log(std::max(uniform(), 0x1.0p-60));
        while (acc <= lambda) {
            ++k;
            acc += -std::log(std::max(uniform(), 0x1.0p-60));
        }
        return k;
    }

    std::int8_t polarity() { return (next() & 1) ? std::int8_t{1} : std::int8_t{-1}; }
};

geom::Mat3 base_orientation() {
    // Camera x -> world -y, camera y -> world -z, camera z -> world +x.
    geom::Mat3 R;
    R << 0.0, 0.0, 1.0,
         -1.0, 0.0, 0.0,
         0.0, -1.0, 0.0;
    return R;
}

geom::Mat3 yaw_rotation(double angle) {
    geom::Mat3 R;
    const double c = std::cos(angle), s = std::sin(angle);
    R << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return R;
}

}  // namespace

CameraMotion camera_motion_from_string(const std::string& s) {
    if (s == "hover") return CameraMotion::hover;
    if (s == "forward") return CameraMotion::forward;
    if (s == "swing") return CameraMotion::swing;
    if (s == "yaw") return CameraMotion::yaw;
    throw std::invalid_argument("unknown camera motion: " + s);
}

const char* camera_motion_name(CameraMotion m) {
    switch (m) {
        case CameraMotion::hover: return "hover";
        case CameraMotion::forward: return "forward";
        case CameraMotion::swing: return "swing";
        case CameraMotion::yaw: return "yaw";
    }
    return "unknown";
}

geom::Pose camera_pose(const SceneConfig& cfg, double t) {
    geom::Pose p;
    p.rotation = base_orientation();
    p.translation = cfg.camera_start;
    switch (cfg.motion) {
        case CameraMotion::hover:
            break;
        case CameraMotion::forward:
            p.translation.x() += cfg.forward_speed * t;
            break;
        case CameraMotion::swing:
            p.translation.x() += cfg.forward_speed * t;
            p.translation.y() += cfg.swing_amplitude *
                                 std::sin(2.0 * std::numbers::pi *
                                          cfg.swing_frequency * t);
            break;
        case CameraMotion::yaw:
            p.rotation = yaw_rotation(cfg.yaw_rate * t) * p.rotation;
            break;
    }
    return p;
}

geom::Vec3 camera_velocity(const SceneConfig& cfg, double t) {
    switch (cfg.motion) {
        case CameraMotion::hover:
        case CameraMotion::yaw:
            return geom::Vec3::Zero();
        case CameraMotion::forward:
            return {cfg.forward_speed, 0.0, 0.0};
        case CameraMotion::swing: {
            const double w = 2.0 * std::numbers::pi * cfg.swing_frequency;
            return {cfg.forward_speed, cfg.swing_amplitude * w * std::cos(w * t),
                    0.0};
        }
    }
    return geom::Vec3::Zero();
}

geom::Vec3 camera_omega(const SceneConfig& cfg, double t) {
    if (cfg.motion != CameraMotion::yaw) return geom::Vec3::Zero();
    const geom::Vec3 omega_world(0.0, 0.0, cfg.yaw_rate);
    return camera_pose(cfg, t).rotation.transpose() * omega_world;
}

geom::Vec3 ball_center(const SceneConfig& cfg, double t) {
    const double dt = t - cfg.ball_t0;
    return cfg.ball_p0 + dt * cfg.ball_v0 + 0.5 * dt * dt * cfg.gravity;
}

namespace {

struct TrackedPoint {
    geom::Vec3 world;       // for the ball: offset direction (unit, sphere frame)
    bool is_object = false;
    bool has_ref = false;
    double ref_u = 0.0, ref_v = 0.0;    // projection at the last emitted event
    double prev_u = 0.0, prev_v = 0.0;  // projection at the previous sub-step
    double prev_t = 0.0;
};

struct RawEvent {
    double t;
    int x, y;
    std::int8_t polarity;
    EventLabel label;
    geom::Vec3 source;
    std::uint64_t seq;
};

// Projection of a world point into the event camera at a prepared pose,
// false when behind the camera or off the sensor.
bool project_into(const geom::Intrinsics& K, const geom::Mat3& world_to_cam,
                  const geom::Vec3& cam_pos, const geom::Vec3& p, double* u,
                  double* v, double* z) {
    const geom::Vec3 pc = world_to_cam * (p - cam_pos);
    if (pc.z() <= 0.05) return false;
    *u = K.fx * pc.x() / pc.z() + K.cx;
    *v = K.fy * pc.y() / pc.z() + K.cy;
    *z = pc.z();
    return K.contains(*u, *v);
}

}  // namespace

Dataset generate(const SceneConfig& cfg) {
    Dataset ds;
    ds.config = cfg;
    ds.events.width = cfg.event_K.width;
    ds.events.height = cfg.event_K.height;

    const double radius = cfg.ball_diameter / 2.0;

    // Scene sampling (seeded independently of the event loop).
    Rng scene_rng(cfg.seed * 0x2545f4914f6cdd1dULL + 1);
    std::vector<TrackedPoint> points;
    {
        const double area = 4.0 * cfg.wall_half_width * cfg.wall_half_height;
        const auto n_wall = static_cast<std::size_t>(cfg.wall_density * area);
        points.reserve(n_wall + cfg.ball_surface_points);
        for (std::size_t i = 0; i < n_wall; ++i) {
            TrackedPoint p;
            p.world = {cfg.wall_distance,
                       scene_rng.uniform(-cfg.wall_half_width, cfg.wall_half_width),
                       cfg.camera_start.z() +
                           scene_rng.uniform(-cfg.wall_half_height,
                                             cfg.wall_half_height)};
            points.push_back(p);
        }
        if (cfg.ball_enabled) {
            for (int i = 0; i < cfg.ball_surface_points; ++i) {
                TrackedPoint p;
                p.is_object = true;
                geom::Vec3 dir;
                do {
                    dir = {scene_rng.normal(1.0), scene_rng.normal(1.0),
                           scene_rng.normal(1.0)};
                } while (dir.norm() < 1e-6);
                p.world = dir.normalized();  // sphere-surface direction
                points.push_back(p);
            }
        }
    }

    Rng event_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 2);
    std::vector<RawEvent> raw;
    std::uint64_t seq = 0;

    const auto n_steps = static_cast<std::size_t>(
        std::ceil(cfg.duration / cfg.event_substep));

    // Per-step camera state, shared across points.
    for (std::size_t step = 0; step <= n_steps; ++step) {
        const double t = std::min(static_cast<double>(step) * cfg.event_substep,
                                  cfg.duration);
        const geom::Pose pose = camera_pose(cfg, t);
        const geom::Mat3 world_to_cam = pose.rotation.transpose();
        const geom::Vec3 cam_pos = pose.translation;

        const bool ball_active = cfg.ball_enabled && t >= cfg.ball_t0;
        const geom::Vec3 bc = ball_active ? ball_center(cfg, t) : geom::Vec3::Zero();

        // Projected ball disc, used for occlusion of background points.
        double ball_u = 0.0, ball_v = 0.0, ball_z = 0.0, ball_r_px = 0.0;
        bool ball_on_screen = false;
        if (ball_active) {
            const geom::Vec3 bc_cam = world_to_cam * (bc - cam_pos);
            if (bc_cam.z() > 0.05) {
                ball_u = cfg.event_K.fx * bc_cam.x() / bc_cam.z() + cfg.event_K.cx;
                ball_v = cfg.event_K.fy * bc_cam.y() / bc_cam.z() + cfg.event_K.cy;
                ball_z = bc_cam.z();
                ball_r_px = cfg.event_K.fx * radius / bc_cam.z();
                ball_on_screen = true;
            }
        }

        for (TrackedPoint& p : points) {
            geom::Vec3 world;
            if (p.is_object) {
                if (!ball_active) {
                    p.has_ref = false;
                    continue;
                }
                world = bc + radius * p.world;
                // Only the hemisphere facing the camera triggers events.
                if (p.world.dot(cam_pos - world) <= 0.0) {
                    p.has_ref = false;
                    continue;
                }
                // The wall occludes a ball flying behind it.
                if (world.x() > cfg.wall_distance &&
                    cam_pos.x() < cfg.wall_distance) {
                    const double lambda = (cfg.wall_distance - cam_pos.x()) /
                                          (world.x() - cam_pos.x());
                    const geom::Vec3 hit = cam_pos + lambda * (world - cam_pos);
                    if (std::abs(hit.y()) <= cfg.wall_half_width &&
                        std::abs(hit.z() - cfg.camera_start.z()) <=
                            cfg.wall_half_height) {
                        p.has_ref = false;
                        continue;
                    }
                }
            } else {
                world = p.world;
            }

            double u, v, z;
            if (!project_into(cfg.event_K, world_to_cam, cam_pos, world, &u, &v,
                              &z)) {
                p.has_ref = false;
                continue;
            }
            // The ball occludes background points behind it.
            if (!p.is_object && ball_on_screen && z > ball_z &&
                std::hypot(u - ball_u, v - ball_v) <= ball_r_px) {
                p.has_ref = false;
                continue;
            }

            if (!p.has_ref) {
                p.has_ref = true;
                p.ref_u = u;
                p.ref_v = v;
                p.prev_u = u;
                p.prev_v = v;
                p.prev_t = t;
                continue;
            }

            // Emit one event per pixel of accumulated displacement, with the
            // crossing position and timestamp interpolated inside the
            // sub-step. Sub-pixel motion per sub-step keeps the
            // linearization exact for practical purposes.
            int guard = 0;
            while (++guard <= 8) {
                const double d_prev = std::hypot(p.prev_u - p.ref_u,
                                                 p.prev_v - p.ref_v);
                const double d_cur = std::hypot(u - p.ref_u, v - p.ref_v);
                if (d_cur < cfg.displacement_threshold) break;
                double alpha = 1.0;
                if (d_cur > d_prev)
                    alpha = (cfg.displacement_threshold - d_prev) / (d_cur - d_prev);
                alpha = std::clamp(alpha, 0.0, 1.0);
                const double eu = p.prev_u + alpha * (u - p.prev_u);
                const double ev = p.prev_v + alpha * (v - p.prev_v);
                const double et = p.prev_t + alpha * (t - p.prev_t);

                const double jx = eu + event_rng.normal(cfg.pixel_jitter);
                const double jy = ev + event_rng.normal(cfg.pixel_jitter);
                const double jt =
                    std::max(0.0, et + event_rng.normal(cfg.timestamp_jitter));
                const std::int8_t pol = event_rng.polarity();

                const long px = std::lround(jx);
                const long py = std::lround(jy);
                if (px >= 0 && px < cfg.event_K.width && py >= 0 &&
                    py < cfg.event_K.height) {
                    RawEvent e;
                    e.t = jt;
                    e.x = static_cast<int>(px);
                    e.y = static_cast<int>(py);
                    e.polarity = pol;
                    e.label = p.is_object ? EventLabel::object : EventLabel::background;
                    e.source = world;
                    e.seq = seq++;
                    raw.push_back(e);
                }
                p.ref_u = eu;
                p.ref_v = ev;
                p.prev_u = eu;
                p.prev_v = ev;
                p.prev_t = et;
            }
            p.prev_u = u;
            p.prev_v = v;
            p.prev_t = t;
        }
    }

    // Spurious (noise) events.
    {
        Rng noise_rng(cfg.seed * 0xda942042e4dd58b5ULL + 3);
        const int n = noise_rng.poisson(cfg.noise_rate * cfg.duration);
        for (int i = 0; i < n; ++i) {
            RawEvent e;
            e.t = noise_rng.uniform(0.0, cfg.duration);
            e.x = static_cast<int>(noise_rng.uniform() * cfg.event_K.width);
            e.y = static_cast<int>(noise_rng.uniform() * cfg.event_K.height);
            e.x = std::min(e.x, cfg.event_K.width - 1);
            e.y = std::min(e.y, cfg.event_K.height - 1);
            e.polarity = noise_rng.polarity();
            e.label = EventLabel::noise;
            e.source = geom::Vec3::Zero();
            e.seq = seq++;
            raw.push_back(e);
        }
    }

    std::sort(raw.begin(), raw.end(), [](const RawEvent& a, const RawEvent& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.seq < b.seq;
    });

    ds.events.events.reserve(raw.size());
    ds.truth.labels.reserve(raw.size());
    ds.truth.source_points.reserve(raw.size());
    for (const RawEvent& e : raw) {
        ds.events.events.push_back({e.x, e.y, e.t, e.polarity});
        ds.truth.labels.push_back(e.label);
        ds.truth.source_points.push_back(e.source);
    }

    // Sensor streams.
    {
        // Sensor streams run slightly past the event horizon so windowed
        // consumers never have to extrapolate at the tail.
        const double t_sensor_end = cfg.duration + 0.05;
        const auto n_imu =
            static_cast<std::size_t>(t_sensor_end * cfg.imu_rate);
        for (std::size_t i = 0; i <= n_imu; ++i) {
            const double t = static_cast<double>(i) / cfg.imu_rate;
            mc::ImuSample s;
            s.t = t;
            s.angular_velocity = camera_omega(cfg, t);
            // Specific force (no accelerometer noise model).
            geom::Vec3 a_world = geom::Vec3::Zero();
            if (cfg.motion == CameraMotion::swing) {
                const double w = 2.0 * std::numbers::pi * cfg.swing_frequency;
                a_world.y() =
                    -cfg.swing_amplitude * w * w * std::sin(w * t);
            }
            s.accel = camera_pose(cfg, t).rotation.transpose() *
                      (a_world - cfg.gravity);
            ds.imu.push_back(s);
        }
        const auto n_pose =
            static_cast<std::size_t>(t_sensor_end * cfg.pose_rate);
        for (std::size_t i = 0; i <= n_pose; ++i) {
            const double t = static_cast<double>(i) / cfg.pose_rate;
            ds.poses.push_back({t, camera_pose(cfg, t)});
            ds.velocities.push_back({t, camera_velocity(cfg, t)});
        }
    }

    // Depth frames by exact ray casting (plane + sphere), z-buffered.
    {
        Rng depth_rng(cfg.seed * 0xd6e8feb86659fd93ULL + 4);
        const auto n_frames =
            static_cast<std::size_t>(cfg.duration * cfg.depth_rate);
        for (std::size_t i = 0; i <= n_frames; ++i) {
            const double t = static_cast<double>(i) / cfg.depth_rate;
            depth::DepthFrame frame;
            frame.t = t;
            frame.K = cfg.depth_K;
            frame.pose = geom::compose(camera_pose(cfg, t), cfg.T_E_D);
            frame.depth = img::Grid(cfg.depth_K.width, cfg.depth_K.height, 0.0);

            const geom::Mat3 R = frame.pose.rotation;
            const geom::Vec3 o = frame.pose.translation;
            const bool ball_active = cfg.ball_enabled && t >= cfg.ball_t0;
            const geom::Vec3 bc =
                ball_active ? ball_center(cfg, t) : geom::Vec3::Zero();

            for (int y = 0; y < cfg.depth_K.height; ++y) {
                for (int x = 0; x < cfg.depth_K.width; ++x) {
                    const geom::Vec3 dir_cam((x - cfg.depth_K.cx) / cfg.depth_K.fx,
                                             (y - cfg.depth_K.cy) / cfg.depth_K.fy,
                                             1.0);
                    const geom::Vec3 D = R * dir_cam;
                    double depth_val = 0.0;  // camera z-depth, 0 = miss

                    if (D.x() > 1e-9) {
                        const double lambda = (cfg.wall_distance - o.x()) / D.x();
                        if (lambda > 0.0) {
                            const geom::Vec3 hit = o + lambda * D;
                            if (std::abs(hit.y()) <= cfg.wall_half_width &&
                                std::abs(hit.z() - cfg.camera_start.z()) <=
                                    cfg.wall_half_height)
                                depth_val = lambda;
                        }
                    }
                    if (ball_active) {
                        const geom::Vec3 oc = o - bc;
                        const double a = D.squaredNorm();
                        const double b = 2.0 * D.dot(oc);
                        const double c = oc.squaredNorm() - radius * radius;
                        const double disc = b * b - 4.0 * a * c;
                        if (disc >= 0.0) {
                            const double lambda = (-b - std::sqrt(disc)) / (2.0 * a);
                            if (lambda > 0.0 &&
                                (depth_val <= 0.0 || lambda < depth_val))
                                depth_val = lambda;
                        }
                    }
                    if (depth_val > 0.0 && cfg.depth_noise > 0.0)
                        depth_val =
                            std::max(1e-3, depth_val + depth_rng.normal(cfg.depth_noise));
                    frame.depth.at(x, y) = depth_val;
                }
            }
            ds.depth_frames.push_back(std::move(frame));
        }
    }

    // Ground truth: exact trajectory and per-window boxes.
    if (cfg.ball_enabled) {
        ds.truth.has_trajectory = true;
        ds.truth.trajectory.p0 = cfg.ball_p0;
        ds.truth.trajectory.v0 = cfg.ball_v0;
        ds.truth.trajectory.g = cfg.gravity;
        ds.truth.trajectory.t0 = cfg.ball_t0;
    }
    {
        const double t_anchor = ds.events.events.empty() ? 0.0 : ds.events.events.front().t;
        const auto n_windows = static_cast<std::size_t>(
            std::max(0.0, (cfg.duration - t_anchor) / cfg.gt_window)) + 1;
        ds.truth.boxes.resize(n_windows);
        for (std::size_t k = 0; k < n_windows; ++k) {
            GroundTruthBox& box = ds.truth.boxes[k];
            box.t0 = t_anchor + static_cast<double>(k) * cfg.gt_window;
            if (!cfg.ball_enabled) continue;
            double lo_u = 1e18, hi_u = -1e18, lo_v = 1e18, hi_v = -1e18;
            bool any = false;
            for (int s = 0; s <= 25; ++s) {
                const double t = box.t0 + cfg.gt_window * s / 25.0;
                if (t < cfg.ball_t0 || t > cfg.duration) continue;
                const geom::Pose pose = camera_pose(cfg, t);
                const geom::Vec3 pc =
                    pose.rotation.transpose() * (ball_center(cfg, t) - pose.translation);
                if (pc.z() <= 0.05) continue;
                const double u = cfg.event_K.fx * pc.x() / pc.z() + cfg.event_K.cx;
                const double v = cfg.event_K.fy * pc.y() / pc.z() + cfg.event_K.cy;
                const double ru = cfg.event_K.fx * radius / pc.z();
                const double rv = cfg.event_K.fy * radius / pc.z();
                if (!cfg.event_K.contains(u, v)) continue;
                any = true;
                lo_u = std::min(lo_u, u - ru);
                hi_u = std::max(hi_u, u + ru);
                lo_v = std::min(lo_v, v - rv);
                hi_v = std::max(hi_v, v + rv);
            }
            box.visible = any;
            if (any) {
                box.cx = 0.5 * (lo_u + hi_u);
                box.cy = 0.5 * (lo_v + hi_v);
                box.w = hi_u - lo_u;
                box.h = hi_v - lo_v;
            }
        }
        // Count object events per window.
        for (std::size_t i = 0; i < ds.events.events.size(); ++i) {
            if (ds.truth.labels[i] != EventLabel::object) continue;
            const double t = ds.events.events[i].t;
            const auto k = static_cast<std::size_t>(
                std::max(0.0, (t - t_anchor) / cfg.gt_window));
            if (k < ds.truth.boxes.size()) ++ds.truth.boxes[k].object_events;
        }
    }
    if (cfg.ball_enabled) {
        bool ever_visible = false;
        for (const auto& b : ds.truth.boxes) ever_visible |= b.visible;
        if (!ever_visible)
            ds.warnings.push_back(
                "ball never enters the camera frustum; no object events");
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::create_directories(dir + "/depth");

    events::save_event_file(dir + "/events.csv", ds.events);
    mc::save_imu_file(dir + "/imu.csv", ds.imu);
    mc::save_velocity_file(dir + "/velocity.csv", ds.velocities);
    geom::save_pose_file(dir + "/poses.txt", ds.poses);

    std::vector<depth::DepthIndexEntry> index;
    for (const auto& f : ds.depth_frames) {
        const std::string name = depth::depth_frame_filename(f.t);
        depth::save_depth_pgm(dir + "/depth/" + name, f.depth);
        index.push_back({f.t, name});
    }
    depth::save_depth_index(dir + "/depth/index.csv", index);

    save_ground_truth(dir + "/ground_truth.txt", ds.truth, ds.truth.has_trajectory);
    save_event_truth(dir + "/event_truth.csv", ds.truth);
}

void save_ground_truth(const std::string& path, const GroundTruth& truth,
                       bool has_ball) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write ground truth: " + path);
    char buf[320];
    if (has_ball) {
        const auto& tr = truth.trajectory;
        std::snprintf(buf, sizeof(buf),
                      "traj %.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                      tr.t0, tr.p0.x(), tr.p0.y(), tr.p0.z(), tr.v0.x(),
                      tr.v0.y(), tr.v0.z(), tr.g.x(), tr.g.y(), tr.g.z());
        out << buf;
    }
    for (const auto& b : truth.boxes) {
        std::snprintf(buf, sizeof(buf), "box %.9f %.3f %.3f %.3f %.3f %d %zu\n",
                      b.t0, b.cx, b.cy, b.w, b.h, b.visible ? 1 : 0,
                      b.object_events);
        out << buf;
    }
}

GroundTruth load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ground truth: " + path);
    GroundTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("traj ", 0) == 0) {
            auto& tr = truth.trajectory;
            if (std::sscanf(line.c_str(),
                            "traj %lf %lf %lf %lf %lf %lf %lf %lf %lf %lf",
                            &tr.t0, &tr.p0.x(), &tr.p0.y(), &tr.p0.z(),
                            &tr.v0.x(), &tr.v0.y(), &tr.v0.z(), &tr.g.x(),
                            &tr.g.y(), &tr.g.z()) != 10)
                throw std::runtime_error(path + ": malformed traj line");
            truth.has_trajectory = true;
        } else if (line.rfind("box ", 0) == 0) {
            GroundTruthBox b;
            int visible = 0;
            std::size_t n = 0;
            if (std::sscanf(line.c_str(), "box %lf %lf %lf %lf %lf %d %zu",
                            &b.t0, &b.cx, &b.cy, &b.w, &b.h, &visible, &n) != 7)
                throw std::runtime_error(path + ": malformed box line");
            b.visible = visible != 0;
            b.object_events = n;
            truth.boxes.push_back(b);
        }
    }
    return truth;
}

void save_event_truth(const std::string& path, const GroundTruth& truth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write event truth: " + path);
    char buf[160];
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        const auto& p = truth.source_points[i];
        std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f\n",
                      static_cast<int>(truth.labels[i]), p.x(), p.y(), p.z());
        out << buf;
    }
}

void load_event_truth(const std::string& path, GroundTruth& truth) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open event truth: " + path);
    truth.labels.clear();
    truth.source_points.clear();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int label;
        double x, y, z;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &label, &x, &y, &z) != 4)
            throw std::runtime_error(path + ": malformed event truth line");
        truth.labels.push_back(static_cast<EventLabel>(label));
        truth.source_points.emplace_back(x, y, z);
    }
}

}  // namespace evd::sim

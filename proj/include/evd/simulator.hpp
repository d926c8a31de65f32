#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evd/depth_fusion.hpp"
#include "evd/event_core.hpp"
#include "evd/geometry.hpp"
#include "evd/motion_compensation.hpp"
#include "evd/trajectory.hpp"

namespace evd::sim {

enum class CameraMotion { hover, forward, swing, yaw };

CameraMotion camera_motion_from_string(const std::string& s);
const char* camera_motion_name(CameraMotion m);

/// Synthetic scene description. World frame: x forward, y left, z up,
/// gravity along -z. The camera starts looking down +x with image x to the
/// right (world -y) and image y down (world -z).
struct SceneConfig {
    geom::Intrinsics event_K{230.0, 230.0, 173.0, 130.0, 346, 260};
    geom::Intrinsics depth_K{460.0, 460.0, 400.0, 300.0, 800, 600};
    geom::Pose T_E_D{geom::Mat3::Identity(), geom::Vec3(0.03, 0.0, 0.0)};

    double duration = 1.0;  ///< seconds of generated data

    CameraMotion motion = CameraMotion::forward;
    double forward_speed = 2.0;    ///< m/s, forward and swing modes
    double yaw_rate = 1.0;         ///< rad/s about world z, yaw mode
    double swing_amplitude = 0.4;  ///< m, lateral sinusoid
    double swing_frequency = 1.5;  ///< Hz
    geom::Vec3 camera_start{0.0, 0.0, 1.3};

    bool ball_enabled = true;
    // Thrown from one side toward the other while approaching, about 12 m/s.
    geom::Vec3 ball_p0{9.0, -2.5, 1.6};
    geom::Vec3 ball_v0{-10.0, 5.5, 2.5};
    double ball_t0 = 0.2;         ///< launch time, s
    double ball_diameter = 0.21;  ///< m
    int ball_surface_points = 200;
    geom::Vec3 gravity{0.0, 0.0, -9.81};

    double wall_distance = 10.0;   ///< world x of the background wall
    double wall_density = 18.0;    ///< sample points per m^2
    double wall_half_width = 8.0;  ///< m, world y extent
    double wall_half_height = 5.0;

    double depth_rate = 30.0;  ///< Hz
    double imu_rate = 200.0;
    double pose_rate = 200.0;

    double pixel_jitter = 0.0;      ///< px sigma on emitted event pixels
    double depth_noise = 0.0;       ///< m sigma on rendered depth
    double timestamp_jitter = 0.0;  ///< s sigma on event timestamps
    double noise_rate = 0.0;        ///< spurious events per second

    std::uint64_t seed = 1;
    double event_substep = 1e-4;          ///< s, projection sub-stepping
    double displacement_threshold = 1.0;  ///< px per emitted event
    double gt_window = events::kDefaultWindow;  ///< window length for truth boxes
};

enum class EventLabel : std::uint8_t { background = 0, object = 1, noise = 2 };

/// Per-window true object box (pixel units, event camera frame).
struct GroundTruthBox {
    double t0 = 0.0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    bool visible = false;
    std::size_t object_events = 0;
};

/// Everything the evaluation needs and the sensors cannot provide: the exact
/// ballistic parameters, per-window boxes, and per-event provenance.
struct GroundTruth {
    traj::BallisticTrajectory trajectory;
    bool has_trajectory = false;
    std::vector<GroundTruthBox> boxes;
    std::vector<EventLabel> labels;          ///< parallel to the event list
    std::vector<geom::Vec3> source_points;   ///< world point behind each event
};

struct Dataset {
    SceneConfig config;
    events::EventFile events;
    std::vector<depth::DepthFrame> depth_frames;
    std::vector<mc::ImuSample> imu;
    std::vector<mc::VelocitySample> velocities;
    geom::PoseTrack poses;  ///< event camera, ^W T_E
    GroundTruth truth;
    std::vector<std::string> warnings;  ///< e.g. a ball that never shows up
};

/// Camera pose of the configured motion at time t (exact, not sampled).
geom::Pose camera_pose(const SceneConfig& cfg, double t);
geom::Vec3 camera_velocity(const SceneConfig& cfg, double t);
/// Camera-frame angular velocity at time t.
geom::Vec3 camera_omega(const SceneConfig& cfg, double t);

/// Ball center at time t (t >= ball_t0 expected).
geom::Vec3 ball_center(const SceneConfig& cfg, double t);

/// Generate the full dataset. Identical configs (same seed) produce
/// identical datasets, bit for bit.
Dataset generate(const SceneConfig& cfg);

/// Write the dataset in the on-disk layout consumed by the pipeline:
/// events.csv, imu.csv, velocity.csv, poses.txt, depth/*.pgm + depth/index.csv,
/// ground_truth.txt, event_truth.csv.
void write_dataset(const Dataset& ds, const std::string& dir);

/// Ground truth I/O (trajectory + per-window boxes).
void save_ground_truth(const std::string& path, const GroundTruth& truth,
                       bool has_ball);
GroundTruth load_ground_truth(const std::string& path);

/// Per-event provenance: `label,px,py,pz` lines parallel to events.csv.
void save_event_truth(const std::string& path, const GroundTruth& truth);
void load_event_truth(const std::string& path, GroundTruth& truth);

}  // namespace evd::sim

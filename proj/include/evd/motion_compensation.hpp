#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evd/event_core.hpp"
#include "evd/geometry.hpp"
#include "evd/image.hpp"

namespace evd::mc {

struct MissingImuError : std::runtime_error {
    MissingImuError() : std::runtime_error("no IMU samples inside window") {}
};

/// Inertial sample. Angular velocity is expected in the event-camera frame
/// (apply the IMU extrinsic before building samples).
struct ImuSample {
    double t = 0.0;
    geom::Vec3 angular_velocity = geom::Vec3::Zero();  ///< rad/s
    geom::Vec3 accel = geom::Vec3::Zero();             ///< m/s^2, carried only
};

/// Ego-motion state of one window: average rates plus the camera pose at the
/// window reference time.
struct EgoMotionSample {
    double t = 0.0;
    geom::Vec3 angular_velocity = geom::Vec3::Zero();  ///< rad/s, camera frame
    geom::Vec3 linear_velocity = geom::Vec3::Zero();   ///< m/s, world frame
    geom::Pose pose;                                   ///< ^W T_E
};

/// Arithmetic mean of the angular velocity samples with t in [t0, t1].
/// Throws MissingImuError when the window holds no sample.
geom::Vec3 average_angular_velocity(std::span<const ImuSample> samples,
                                    double t0, double t1);

/// Rotation matrix from an axis-angle vector (angle = norm, radians).
/// The zero vector maps to identity.
geom::Mat3 rodrigues(const geom::Vec3& axis_angle);

/// Per-millisecond warp buckets covering one window. The matrices are
/// rebuilt once per millisecond; bucket k represents its midpoint
/// tau_k = (k + 0.5) * bucket_len, which halves the worst-case quantization
/// error relative to using the tick time.
///
/// rotation[k] undoes the camera rotation accumulated over tau_k: a camera
/// ray observed at t0 + tau maps back to the t0 orientation as
/// r(t0) = rotation[k] * r(t). translation[k] holds the world-frame camera
/// displacement v * tau_k.
struct WarpTable {
    double bucket_len = 1e-3;
    double window = 0.0;
    std::vector<geom::Mat3> rotation;
    std::vector<geom::Vec3> translation;

    std::size_t buckets() const { return rotation.size(); }

    std::size_t bucket_of(double tau) const {
        if (tau <= 0.0) return 0;
        auto k = static_cast<std::size_t>(tau / bucket_len);
        return k < buckets() ? k : buckets() - 1;
    }
};

WarpTable build_warp_table(const geom::Vec3& omega_bar,
                           const geom::Vec3& velocity_world, double window,
                           double bucket_len = 1e-3);

/// Compensation statistics of one window.
struct CompensationStats {
    std::size_t input = 0;
    std::size_t dropped = 0;        ///< warped off the sensor (or behind it)
    std::size_t without_depth = 0;  ///< passed through the translational stage
};

/// Undo camera rotation: each event ray is rotated by its bucket's matrix and
/// reprojected through K. Timestamps are preserved; events whose warp leaves
/// the frame are dropped.
std::vector<events::WarpedEvent> compensate_rotation(
    const events::EventBuffer& buffer, const WarpTable& table,
    const geom::Intrinsics& K, CompensationStats* stats = nullptr);

/// Undo camera translation using per-event depth looked up in
/// `registered_depth` (event-camera grid, 0 = invalid) at the event's current
/// pixel. Events without valid depth pass through rotation-only, flagged via
/// WarpedEvent::depth_compensated. `pose` supplies the rotation that maps the
/// world-frame velocity offsets into the camera frame.
std::vector<events::WarpedEvent> compensate_translation(
    std::span<const events::WarpedEvent> input, double t0,
    const img::Grid& registered_depth, const WarpTable& table,
    const geom::Intrinsics& K, const geom::Pose& pose,
    CompensationStats* stats = nullptr);

/// Identity warp: buffer events as WarpedEvents (compensation mode "none").
std::vector<events::WarpedEvent> to_warped(const events::EventBuffer& buffer);

enum class Mode { none, rotation, rotation_translation };

Mode mode_from_string(const std::string& s);
const char* mode_name(Mode m);

/// Run the configured compensation chain on one buffer. `registered_depth`
/// may be empty (width 0), which degrades rotation_translation to
/// rotation-only lookups that always miss.
std::vector<events::WarpedEvent> compensate(
    const events::EventBuffer& buffer, Mode mode, const WarpTable& table,
    const geom::Intrinsics& K, const geom::Pose& pose,
    const img::Grid& registered_depth, CompensationStats* stats = nullptr);

/// IMU file I/O: one sample per line, `t,wx,wy,wz,ax,ay,az`.
std::vector<ImuSample> load_imu_file(const std::string& path);
void save_imu_file(const std::string& path, std::span<const ImuSample> samples);

/// Optional velocity file: `t,vx,vy,vz` (world frame).
struct VelocitySample {
    double t = 0.0;
    geom::Vec3 v = geom::Vec3::Zero();
};

std::vector<VelocitySample> load_velocity_file(const std::string& path);
void save_velocity_file(const std::string& path,
                        std::span<const VelocitySample> samples);

/// Piecewise-linear velocity lookup, clamped at the ends.
geom::Vec3 velocity_at(std::span<const VelocitySample> samples, double t);

}  // namespace evd::mc

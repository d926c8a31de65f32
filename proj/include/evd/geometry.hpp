#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <vector>

namespace evd::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// 3D point in meters.
using Point3 = Vec3;

struct BehindCameraError : std::domain_error {
    BehindCameraError() : std::domain_error("point has non-positive depth") {}
};

struct InvalidDepthError : std::domain_error {
    InvalidDepthError() : std::domain_error("depth must be positive") {}
};

/// Pinhole intrinsics. No distortion model; lenses are assumed rectified
/// upstream (extension point if that ever changes).
struct Intrinsics {
    double fx = 0.0;  ///< focal length, pixels
    double fy = 0.0;
    double cx = 0.0;  ///< principal point, pixels
    double cy = 0.0;
    int width = 0;    ///< sensor resolution, pixels
    int height = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && cx >= 0.0 && cx < width && cy >= 0.0 &&
               cy < height && width > 0 && height > 0;
    }

    /// True if the real-valued pixel rounds to a coordinate on the sensor.
    bool contains(double u, double v) const {
        return u >= -0.5 && u < width - 0.5 && v >= -0.5 && v < height - 0.5;
    }
};

/// Rigid body pose. `rotation` and `translation` map local coordinates into
/// the parent frame: p_parent = R * p_local + t. For a camera pose in the
/// world frame this is the camera-to-world transform.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return Pose{}; }

    static Pose from_quaternion(double qw, double qx, double qy, double qz,
                                const Vec3& t) {
        Eigen::Quaterniond q(qw, qx, qy, qz);
        q.normalize();
        return Pose{q.toRotationMatrix(), t};
    }

    Eigen::Quaterniond quaternion() const {
        return Eigen::Quaterniond(rotation);
    }

    /// Orthonormality check: R^T R = I and det R = 1 within `tol`.
    bool is_valid(double tol = 1e-9) const;

    /// Project the rotation back onto SO(3). Cheap enough to run after long
    /// composition chains.
    void reorthonormalize();
};

/// Perspective projection, p must have z > 0.
Vec2 project(const Intrinsics& K, const Point3& p);

/// Inverse projection at depth d (z-depth, meters), d must be > 0.
Point3 backproject(const Intrinsics& K, double u, double v, double d);

inline Point3 transform(const Pose& T, const Point3& p) {
    return T.rotation * p + T.translation;
}

Pose inverse(const Pose& T);
Pose compose(const Pose& a, const Pose& b);

/// Pose sample on a time-indexed trajectory.
struct PoseSample {
    double t = 0.0;
    Pose pose;
};

/// Time-sorted pose samples with interpolated lookup. Rotation is slerped,
/// translation lerped; queries outside the sampled range clamp to the ends.
class PoseTrack {
  public:
    PoseTrack() = default;
    explicit PoseTrack(std::vector<PoseSample> samples);

    void push_back(const PoseSample& s);

    bool empty() const { return samples_.empty(); }
    std::size_t size() const { return samples_.size(); }
    const std::vector<PoseSample>& samples() const { return samples_; }
    double t_begin() const { return samples_.front().t; }
    double t_end() const { return samples_.back().t; }

    Pose at(double t) const;

    /// Linear velocity by central finite difference of neighbouring samples.
    Vec3 velocity_at(double t) const;

  private:
    std::vector<PoseSample> samples_;
};

/// Pose file: one line per sample, `t qw qx qy qz tx ty tz`.
PoseTrack load_pose_file(const std::string& path);
void save_pose_file(const std::string& path, const PoseTrack& track);

}  // namespace evd::geom

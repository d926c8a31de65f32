#include "evd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evd::geom {

bool Pose::is_valid(double tol) const {
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(rotation.determinant() - 1.0) > tol) return false;
    return translation.allFinite();
}

void Pose::reorthonormalize() {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    rotation = q.toRotationMatrix();
}

Vec2 project(const Intrinsics& K, const Point3& p) {
    if (!(p.z() > 0.0)) throw BehindCameraError{};
    return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

Point3 backproject(const Intrinsics& K, double u, double v, double d) {
    if (!(d > 0.0)) throw InvalidDepthError{};
    return {(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d};
}

Pose inverse(const Pose& T) {
    Pose out;
    out.rotation = T.rotation.transpose();
    out.translation = -(out.rotation * T.translation);
    return out;
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

PoseTrack::PoseTrack(std::vector<PoseSample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        if (samples_[i].t < samples_[i - 1].t)
            throw std::invalid_argument("pose samples must be time-sorted");
    }
}

void PoseTrack::push_back(const PoseSample& s) {
    if (!samples_.empty() && s.t < samples_.back().t)
        throw std::invalid_argument("pose samples must be time-sorted");
    samples_.push_back(s);
}

Pose PoseTrack::at(double t) const {
    if (samples_.empty()) throw std::runtime_error("empty pose track");
    if (t <= samples_.front().t) return samples_.front().pose;
    if (t >= samples_.back().t) return samples_.back().pose;
    const auto it = std::upper_bound(
        samples_.begin(), samples_.end(), t,
        [](double v, const PoseSample& s) { return v < s.t; });
    const PoseSample& hi = *it;
    const PoseSample& lo = *(it - 1);
    const double span = hi.t - lo.t;
    if (span <= 0.0) return lo.pose;
    const double a = (t - lo.t) / span;
    Pose out;
    const Eigen::Quaterniond q =
        lo.pose.quaternion().slerp(a, hi.pose.quaternion());
    out.rotation = q.toRotationMatrix();
    out.translation = (1.0 - a) * lo.pose.translation + a * hi.pose.translation;
    return out;
}

Vec3 PoseTrack::velocity_at(double t) const {
    if (samples_.size() < 2) return Vec3::Zero();
    // Central difference over the bracketing samples; one-sided at the ends.
    const auto it = std::upper_bound(
        samples_.begin(), samples_.end(), t,
        [](double v, const PoseSample& s) { return v < s.t; });
    std::size_t hi = static_cast<std::size_t>(it - samples_.begin());
    if (hi == 0) hi = 1;
    if (hi >= samples_.size()) hi = samples_.size() - 1;
    const std::size_t lo = hi - 1;
    const double dt = samples_[hi].t - samples_[lo].t;
    if (dt <= 0.0) return Vec3::Zero();
    return (samples_[hi].pose.translation - samples_[lo].pose.translation) / dt;
}

PoseTrack load_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pose file: " + path);
    PoseTrack track;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double t, qw, qx, qy, qz, tx, ty, tz;
        if (!(ss >> t >> qw >> qx >> qy >> qz >> tx >> ty >> tz))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed pose line");
        track.push_back({t, Pose::from_quaternion(qw, qx, qy, qz, {tx, ty, tz})});
    }
    return track;
}

void save_pose_file(const std::string& path, const PoseTrack& track) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write pose file: " + path);
    char buf[256];
    for (const auto& s : track.samples()) {
        const Eigen::Quaterniond q = s.pose.quaternion();
        std::snprintf(buf, sizeof(buf),
                      "%.9f %.12f %.12f %.12f %.12f %.9f %.9f %.9f\n", s.t,
                      q.w(), q.x(), q.y(), q.z(), s.pose.translation.x(),
                      s.pose.translation.y(), s.pose.translation.z());
        out << buf;
    }
}

}  // namespace evd::geom

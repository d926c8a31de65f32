#include "evd/motion_compensation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "evd/kernels.hpp"

namespace evd::mc {

namespace {
constexpr double kMinHomogeneous = 1e-9;  // w/z at or below this -> dropped
}

geom::Vec3 average_angular_velocity(std::span<const ImuSample> samples,
                                    double t0, double t1) {
    geom::Vec3 sum = geom::Vec3::Zero();
    std::size_t n = 0;
    for (const ImuSample& s : samples) {
        if (s.t < t0 || s.t > t1) continue;
        sum += s.angular_velocity;
        ++n;
    }
    if (n == 0) throw MissingImuError{};
    return sum / static_cast<double>(n);
}

geom::Mat3 rodrigues(const geom::Vec3& axis_angle) {
    const double theta2 = axis_angle.squaredNorm();
    // Series coefficients a = sin(t)/t, b = (1-cos(t))/t^2 stay accurate
    // through t -> 0.
    double a, b;
    if (theta2 < 1e-14) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    geom::Mat3 K;
    K << 0.0, -axis_angle.z(), axis_angle.y(),
         axis_angle.z(), 0.0, -axis_angle.x(),
         -axis_angle.y(), axis_angle.x(), 0.0;
    return geom::Mat3::Identity() + a * K + b * (K * K);
}

WarpTable build_warp_table(const geom::Vec3& omega_bar,
                           const geom::Vec3& velocity_world, double window,
                           double bucket_len) {
    if (window <= 0.0) throw std::invalid_argument("window must be positive");
    if (bucket_len <= 0.0) throw std::invalid_argument("bucket length must be positive");
    WarpTable t;
    t.bucket_len = bucket_len;
    t.window = window;
    const auto count = static_cast<std::size_t>(std::ceil(window / bucket_len));
    t.rotation.reserve(count);
    t.translation.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        // Bucket midpoint: halves the worst-case quantization error of the
        // millisecond update compared to the tick time itself.
        const double tau = (static_cast<double>(k) + 0.5) * bucket_len;
        t.rotation.push_back(rodrigues(omega_bar * tau));
        t.translation.push_back(velocity_world * tau);
    }
    return t;
}

namespace {

// Contiguous [begin, end) index range of events sharing one warp bucket.
// Works for any time-sorted sequence with a t member.
template <typename Seq, typename GetT>
std::size_t bucket_range_end(const Seq& seq, std::size_t begin, double t0,
                             const WarpTable& table, GetT get_t,
                             std::size_t* bucket_out) {
    const std::size_t k = table.bucket_of(get_t(seq[begin]) - t0);
    std::size_t end = begin + 1;
    while (end < seq.size() && table.bucket_of(get_t(seq[end]) - t0) == k) ++end;
    *bucket_out = k;
    return end;
}

std::array<double, 9> homography_for(const geom::Intrinsics& K,
                                     const geom::Mat3& R) {
    geom::Mat3 Km;
    Km << K.fx, 0.0, K.cx, 0.0, K.fy, K.cy, 0.0, 0.0, 1.0;
    geom::Mat3 Kinv;
    Kinv << 1.0 / K.fx, 0.0, -K.cx / K.fx, 0.0, 1.0 / K.fy, -K.cy / K.fy, 0.0,
        0.0, 1.0;
    const geom::Mat3 H = Km * R * Kinv;
    std::array<double, 9> out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out[3 * r + c] = H(r, c);
    return out;
}

}  // namespace

std::vector<events::WarpedEvent> compensate_rotation(
    const events::EventBuffer& buffer, const WarpTable& table,
    const geom::Intrinsics& K, CompensationStats* stats) {
    std::vector<events::WarpedEvent> out;
    out.reserve(buffer.size());
    if (stats) stats->input += buffer.size();
    if (buffer.empty()) return out;

    std::vector<double> xs, ys, us, vs, ws;
    std::size_t begin = 0;
    while (begin < buffer.events.size()) {
        std::size_t bucket;
        const std::size_t end =
            bucket_range_end(buffer.events, begin, buffer.t0, table,
                             [](const events::Event& e) { return e.t; }, &bucket);
        const std::size_t n = end - begin;
        xs.resize(n);
        ys.resize(n);
        us.resize(n);
        vs.resize(n);
        ws.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = static_cast<double>(buffer.events[begin + i].x);
            ys[i] = static_cast<double>(buffer.events[begin + i].y);
        }
        const auto H = homography_for(K, table.rotation[bucket]);
        kernels::warp_projective(H.data(), xs.data(), ys.data(), n, us.data(),
                                 vs.data(), ws.data());
        for (std::size_t i = 0; i < n; ++i) {
            if (ws[i] <= kMinHomogeneous || !K.contains(us[i], vs[i])) {
                if (stats) ++stats->dropped;
                continue;
            }
            const events::Event& e = buffer.events[begin + i];
            out.push_back({us[i], vs[i], e.t, e.polarity, false});
        }
        begin = end;
    }
    return out;
}

std::vector<events::WarpedEvent> compensate_translation(
    std::span<const events::WarpedEvent> input, double t0,
    const img::Grid& registered_depth, const WarpTable& table,
    const geom::Intrinsics& K, const geom::Pose& pose,
    CompensationStats* stats) {
    std::vector<events::WarpedEvent> out;
    out.reserve(input.size());
    if (input.empty()) return out;

    const geom::Mat3 world_to_cam = pose.rotation.transpose();
    const kernels::PinholeK pk{K.fx, K.fy, K.cx, K.cy};

    std::vector<double> xs, ys, ds, us, vs, zs;
    std::vector<std::size_t> with_depth;

    std::size_t begin = 0;
    while (begin < input.size()) {
        std::size_t bucket;
        const std::size_t end = bucket_range_end(
            input, begin, t0, table,
            [](const events::WarpedEvent& e) { return e.t; }, &bucket);

        xs.clear();
        ys.clear();
        ds.clear();
        with_depth.clear();
        for (std::size_t i = begin; i < end; ++i) {
            int px, py;
            double d = 0.0;
            if (registered_depth.width > 0 &&
                events::round_to_pixel(input[i], registered_depth.width,
                                       registered_depth.height, px, py))
                d = registered_depth.at(px, py);
            if (d > 0.0) {
                with_depth.push_back(i);
                xs.push_back(input[i].x);
                ys.push_back(input[i].y);
                ds.push_back(d);
            }
        }

        const std::size_t n = with_depth.size();
        us.resize(n);
        vs.resize(n);
        zs.resize(n);
        if (n > 0) {
            // Camera displacement over tau, undone in the t0 camera frame:
            // X' = X + R_WE^T * v_world * tau.
            const geom::Vec3 off_cam = world_to_cam * table.translation[bucket];
            const double off[3] = {off_cam.x(), off_cam.y(), off_cam.z()};
            kernels::warp_translate(pk, off, xs.data(), ys.data(), ds.data(), n,
                                    us.data(), vs.data(), zs.data());
        }

        std::size_t bi = 0;
        for (std::size_t i = begin; i < end; ++i) {
            events::WarpedEvent e = input[i];
            if (bi < n && with_depth[bi] == i) {
                if (zs[bi] <= kMinHomogeneous || !K.contains(us[bi], vs[bi])) {
                    if (stats) ++stats->dropped;
                    ++bi;
                    continue;
                }
                e.x = us[bi];
                e.y = vs[bi];
                e.depth_compensated = true;
                ++bi;
            } else {
                e.depth_compensated = false;
                if (stats) ++stats->without_depth;
            }
            out.push_back(e);
        }
        begin = end;
    }
    return out;
}

std::vector<events::WarpedEvent> to_warped(const events::EventBuffer& buffer) {
    std::vector<events::WarpedEvent> out;
    out.reserve(buffer.size());
    for (const events::Event& e : buffer.events)
        out.push_back({static_cast<double>(e.x), static_cast<double>(e.y), e.t,
                       e.polarity, false});
    return out;
}

Mode mode_from_string(const std::string& s) {
    if (s == "none") return Mode::none;
    if (s == "rotation") return Mode::rotation;
    if (s == "rotation+translation" || s == "rotation_translation")
        return Mode::rotation_translation;
    throw std::invalid_argument("unknown compensation mode: " + s);
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::none: return "none";
        case Mode::rotation: return "rotation";
        case Mode::rotation_translation: return "rotation+translation";
    }
    return "unknown";
}

std::vector<events::WarpedEvent> compensate(
    const events::EventBuffer& buffer, Mode mode, const WarpTable& table,
    const geom::Intrinsics& K, const geom::Pose& pose,
    const img::Grid& registered_depth, CompensationStats* stats) {
    switch (mode) {
        case Mode::none: {
            if (stats) stats->input += buffer.size();
            return to_warped(buffer);
        }
        case Mode::rotation:
            return compensate_rotation(buffer, table, K, stats);
        case Mode::rotation_translation: {
            CompensationStats rot_stats;
            auto rotated = compensate_rotation(buffer, table, K, &rot_stats);
            CompensationStats trans_stats;
            auto out = compensate_translation(rotated, buffer.t0,
                                              registered_depth, table, K, pose,
                                              &trans_stats);
            if (stats) {
                stats->input += rot_stats.input;
                stats->dropped += rot_stats.dropped + trans_stats.dropped;
                stats->without_depth += trans_stats.without_depth;
            }
            return out;
        }
    }
    throw std::logic_error("unreachable compensation mode");
}

std::vector<ImuSample> load_imu_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open imu file: " + path);
    std::vector<ImuSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        ImuSample s;
        double wx, wy, wz, ax, ay, az;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &s.t, &wx,
                        &wy, &wz, &ax, &ay, &az) != 7)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed imu line");
        s.angular_velocity = {wx, wy, wz};
        s.accel = {ax, ay, az};
        out.push_back(s);
    }
    return out;
}

void save_imu_file(const std::string& path, std::span<const ImuSample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write imu file: " + path);
    char buf[192];
    for (const ImuSample& s : samples) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n",
                      s.t, s.angular_velocity.x(), s.angular_velocity.y(),
                      s.angular_velocity.z(), s.accel.x(), s.accel.y(),
                      s.accel.z());
        out << buf;
    }
}

std::vector<VelocitySample> load_velocity_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open velocity file: " + path);
    std::vector<VelocitySample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        VelocitySample s;
        double vx, vy, vz;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &s.t, &vx, &vy, &vz) != 4)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed velocity line");
        s.v = {vx, vy, vz};
        out.push_back(s);
    }
    return out;
}

void save_velocity_file(const std::string& path,
                        std::span<const VelocitySample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write velocity file: " + path);
    char buf[128];
    for (const VelocitySample& s : samples) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.9f,%.9f\n", s.t, s.v.x(),
                      s.v.y(), s.v.z());
        out << buf;
    }
}

geom::Vec3 velocity_at(std::span<const VelocitySample> samples, double t) {
    if (samples.empty()) return geom::Vec3::Zero();
    if (t <= samples.front().t) return samples.front().v;
    if (t >= samples.back().t) return samples.back().v;
    const auto it = std::upper_bound(
        samples.begin(), samples.end(), t,
        [](double v, const VelocitySample& s) { return v < s.t; });
    const VelocitySample& hi = *it;
    const VelocitySample& lo = *(it - 1);
    const double span = hi.t - lo.t;
    if (span <= 0.0) return lo.v;
    const double a = (t - lo.t) / span;
    return (1.0 - a) * lo.v + a * hi.v;
}

}  // namespace evd::mc

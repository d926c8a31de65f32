#include "evd/depth_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace evd::depth {

img::Grid register_depth(const DepthFrame& frame, const geom::Intrinsics& K_E,
                         const geom::Pose& T_WE) {
    img::Grid out(K_E.width, K_E.height, 0.0);
    const geom::Pose T_ED = geom::compose(geom::inverse(T_WE), frame.pose);
    for (int y = 0; y < frame.depth.height; ++y) {
        for (int x = 0; x < frame.depth.width; ++x) {
            const double d = frame.depth.at(x, y);
            if (d <= 0.0) continue;
            const geom::Point3 p_d = geom::backproject(frame.K, x, y, d);
            const geom::Point3 p_e = geom::transform(T_ED, p_d);
            if (p_e.z() <= 0.0) continue;
            const geom::Vec2 uv = geom::project(K_E, p_e);
            const int px = static_cast<int>(std::lround(uv.x()));
            const int py = static_cast<int>(std::lround(uv.y()));
            if (!out.in_bounds(px, py)) continue;
            double& cell = out.at(px, py);
            if (cell <= 0.0 || p_e.z() < cell) cell = p_e.z();
        }
    }
    return out;
}

detect::DetectionROI scale_roi(const detect::DetectionROI& roi, double factor,
                               int width, int height) {
    if (factor <= 0.0) throw std::invalid_argument("scale factor must be positive");
    detect::DetectionROI out = roi;
    const double w = roi.w * factor;
    const double h = roi.h * factor;
    const double x_lo = std::max(-0.5, roi.cx - w / 2.0);
    const double x_hi = std::min(width - 0.5, roi.cx + w / 2.0);
    const double y_lo = std::max(-0.5, roi.cy - h / 2.0);
    const double y_hi = std::min(height - 0.5, roi.cy + h / 2.0);
    if (x_hi <= x_lo || y_hi <= y_lo) {
        out.w = out.h = 0.0;
        return out;
    }
    out.cx = 0.5 * (x_lo + x_hi);
    out.cy = 0.5 * (y_lo + y_hi);
    out.w = x_hi - x_lo;
    out.h = y_hi - y_lo;
    return out;
}

namespace {

struct Population {
    double mean = 0.0;
    double variance = 0.0;
    int count = 0;
};

Population stats(const std::vector<double>& v) {
    Population p;
    p.count = static_cast<int>(v.size());
    if (v.empty()) return p;
    double sum = 0.0;
    for (const double d : v) sum += d;
    p.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (const double d : v) ss += (d - p.mean) * (d - p.mean);
    p.variance = ss / static_cast<double>(v.size());
    return p;
}

}  // namespace

DepthMeasurement segment_depth(const img::Grid& registered, double t,
                               const detect::DetectionROI& roi,
                               const SegmentationParams& params) {
    DepthMeasurement m;
    m.t = t;

    const int x0 = std::max(0, static_cast<int>(std::ceil(roi.cx - roi.w / 2.0)));
    const int x1 = std::min(registered.width - 1,
                            static_cast<int>(std::floor(roi.cx + roi.w / 2.0)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(roi.cy - roi.h / 2.0)));
    const int y1 = std::min(registered.height - 1,
                            static_cast<int>(std::floor(roi.cy + roi.h / 2.0)));

    std::vector<double> depths;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = registered.at(x, y);
            if (d > 0.0) depths.push_back(d);
        }
    if (depths.empty()) return m;  // rejected, pixel_count 0

    // Depth histogram, nearest usable local maximum.
    const double max_d = *std::max_element(depths.begin(), depths.end());
    const auto nbins = static_cast<std::size_t>(max_d / params.bin_width) + 1;
    std::vector<int> hist(nbins, 0);
    for (const double d : depths)
        ++hist[static_cast<std::size_t>(d / params.bin_width)];

    auto count_at = [&](std::ptrdiff_t i) {
        return (i < 0 || i >= static_cast<std::ptrdiff_t>(nbins)) ? 0
               : hist[static_cast<std::size_t>(i)];
    };
    std::ptrdiff_t peak = -1;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nbins); ++i) {
        if (hist[i] < params.min_peak_count) continue;
        if (hist[i] >= count_at(i - 1) && hist[i] >= count_at(i + 1)) {
            peak = i;
            break;
        }
    }
    if (peak < 0) {
        // No peak structure: report the whole population, rejected.
        const Population p = stats(depths);
        m.depth = p.mean;
        m.variance = p.variance;
        m.pixel_count = p.count;
        m.accepted = false;
        return m;
    }

    // Contiguous above-half-peak band around the peak bin.
    const double half = hist[peak] / 2.0;
    std::ptrdiff_t lo = peak, hi = peak;
    while (count_at(lo - 1) >= half) --lo;
    while (count_at(hi + 1) >= half) ++hi;

    std::vector<double> band;
    const double d_lo = static_cast<double>(lo) * params.bin_width;
    const double d_hi = static_cast<double>(hi + 1) * params.bin_width;
    for (const double d : depths)
        if (d >= d_lo && d < d_hi) band.push_back(d);

    const Population p = stats(band);
    m.depth = p.mean;
    m.variance = p.variance;
    m.pixel_count = p.count;
    m.accepted =
        p.variance <= params.variance_gate && p.count >= params.pixel_floor;
    return m;
}

void save_depth_pgm(const std::string& path, const img::Grid& depth_m) {
    std::vector<std::uint16_t> mm(depth_m.size());
    for (std::size_t i = 0; i < mm.size(); ++i) {
        const double v = depth_m.data[i] * 1000.0;
        mm[i] = static_cast<std::uint16_t>(
            std::clamp(std::lround(v), 0L, 65535L));
    }
    img::write_pgm16(path, depth_m.width, depth_m.height, mm);
}

img::Grid load_depth_pgm(const std::string& path) {
    const img::Pgm16 p = img::read_pgm16(path);
    img::Grid g(p.width, p.height, 0.0);
    for (std::size_t i = 0; i < p.samples.size(); ++i)
        g.data[i] = static_cast<double>(p.samples[i]) / 1000.0;
    return g;
}

std::string depth_frame_filename(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "depth_%lld.pgm",
                  static_cast<long long>(std::llround(t * 1e6)));
    return buf;
}

std::vector<DepthIndexEntry> load_depth_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open depth index: " + path);
    std::vector<DepthIndexEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed index line");
        DepthIndexEntry e;
        e.t = std::stod(line.substr(0, comma));
        e.filename = line.substr(comma + 1);
        out.push_back(std::move(e));
    }
    return out;
}

void save_depth_index(const std::string& path,
                      const std::vector<DepthIndexEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write depth index: " + path);
    char buf[160];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "%.9f,%s\n", e.t, e.filename.c_str());
        out << buf;
    }
}

}  // namespace evd::depth

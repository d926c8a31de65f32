#include "evd/time_image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace evd::ti {

std::size_t NormalizedMeanTimeImage::valid_count() const {
    std::size_t n = 0;
    for (const auto v : valid) n += v;
    return n;
}

double NormalizedMeanTimeImage::valid_mean() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (!valid[i]) continue;
        sum += values.data[i];
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

CountImage build_count_image(const events::PixelGrid& groups) {
    CountImage img;
    img.width = groups.width;
    img.height = groups.height;
    img.counts = groups.count;
    return img;
}

MeanTimeImage build_mean_time_image(const events::PixelGrid& groups, double t0,
                                    double dt) {
    MeanTimeImage img;
    img.width = groups.width;
    img.height = groups.height;
    img.t0 = t0;
    img.dt = dt;
    img.mean_t.assign(groups.count.size(), 0.0);
    img.valid.assign(groups.count.size(), 0);
    for (std::size_t i = 0; i < groups.count.size(); ++i) {
        if (groups.count[i] == 0) continue;
        img.mean_t[i] = groups.time_sum[i] / static_cast<double>(groups.count[i]);
        img.valid[i] = 1;
    }
    return img;
}

NormalizedMeanTimeImage normalize(const MeanTimeImage& T) {
    NormalizedMeanTimeImage out;
    out.values = img::Grid(T.width, T.height, 0.0);
    out.valid = T.valid;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < T.valid.size(); ++i) {
        if (!T.valid[i]) continue;
        lo = std::min(lo, T.mean_t[i]);
        hi = std::max(hi, T.mean_t[i]);
    }
    if (!(lo <= hi)) throw EmptyImageError{};
    out.min_t = lo;
    out.max_t = hi;

    const double range = hi - lo;
    if (range <= 0.0) return out;  // information-free window -> all zero
    for (std::size_t i = 0; i < T.valid.size(); ++i) {
        if (!T.valid[i]) continue;
        out.values.data[i] = (T.mean_t[i] - lo) / range;
    }
    return out;
}

void dump_pgm(const NormalizedMeanTimeImage& N, double t0, double dt,
              const std::string& path) {
    std::vector<std::uint16_t> samples(N.values.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] =
            static_cast<std::uint16_t>(std::lround(N.values.data[i] * 65535.0));
    img::write_pgm16(path, N.values.width, N.values.height, samples);

    std::ofstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("cannot write pgm sidecar: " + path);
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "t0=%.9f\ndt=%.9f\nmin_mean_t=%.9f\nmax_mean_t=%.9f\n", t0,
                  dt, N.min_t, N.max_t);
    meta << buf;
}

}  // namespace evd::ti

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evd/event_core.hpp"
#include "evd/image.hpp"

namespace evd::ti {

struct EmptyImageError : std::runtime_error {
    EmptyImageError() : std::runtime_error("no valid pixels to normalize") {}
};

/// Per-pixel event counts of one window.
struct CountImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> counts;

    std::uint32_t at(int x, int y) const {
        return counts[static_cast<std::size_t>(y) * width + x];
    }
};

/// Per-pixel average event timestamp (seconds). Pixels without events are
/// masked invalid.
struct MeanTimeImage {
    int width = 0;
    int height = 0;
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> mean_t;
    std::vector<std::uint8_t> valid;

    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
};

/// Mean-time image rescaled to [0, 1] over its valid pixels. Invalid pixels
/// carry 0 downstream.
struct NormalizedMeanTimeImage {
    img::Grid values;
    std::vector<std::uint8_t> valid;
    double min_t = 0.0;
    double max_t = 0.0;

    std::size_t valid_count() const;
    /// Mean of the normalized values over valid pixels (threshold baseline).
    double valid_mean() const;
};

CountImage build_count_image(const events::PixelGrid& groups);

MeanTimeImage build_mean_time_image(const events::PixelGrid& groups, double t0,
                                    double dt);

/// Affine rescale over valid pixels. A degenerate image (max == min) maps to
/// all-zero; an image without valid pixels throws EmptyImageError.
NormalizedMeanTimeImage normalize(const MeanTimeImage& T);

/// Debug dump: 16-bit PGM with value round(N * 65535) plus `<path>.meta`
/// sidecar carrying t0, dt, min/max mean timestamp.
void dump_pgm(const NormalizedMeanTimeImage& N, double t0, double dt,
              const std::string& path);

}  // namespace evd::ti

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evd::img {

/// Dense row-major double image.
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Grid() = default;
    Grid(int w, int h, double fill = 0.0)
        : width(w), height(h),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("grid dimensions must be positive");
    }

    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    double& at(int x, int y) { return data[idx(x, y)]; }
    double at(int x, int y) const { return data[idx(x, y)]; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    std::size_t size() const { return data.size(); }
};

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
void write_pgm16(const std::string& path, int width, int height,
                 const std::vector<std::uint16_t>& samples);

struct Pgm16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> samples;
};

Pgm16 read_pgm16(const std::string& path);

}  // namespace evd::img

#include "evd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace evd::detect {

img::Grid adaptive_threshold(const ti::NormalizedMeanTimeImage& N,
                             const geom::Vec3& omega, const geom::Vec3& v,
                             const ThresholdParams& params, double* theta_out) {
    double theta = N.valid_mean() + params.a * omega.norm() +
                   params.b * v.norm() + params.c;
    theta = std::clamp(theta, 0.0, 1.0);
    if (theta_out) *theta_out = theta;

    img::Grid S(N.values.width, N.values.height, 0.0);
    for (std::size_t i = 0; i < N.values.size(); ++i) {
        if (!N.valid[i]) continue;
        if (N.values.data[i] >= theta) S.data[i] = N.values.data[i];
    }
    return S;
}

namespace {

img::Grid mean_filter3(const img::Grid& in) {
    img::Grid out(in.width, in.height, 0.0);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double sum = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (in.in_bounds(nx, ny)) sum += in.at(nx, ny);
                }
            out.at(x, y) = sum / 9.0;  // zero padding outside the frame
        }
    }
    return out;
}

enum class Morph { erode, dilate };

img::Grid morph3(const img::Grid& in, Morph op) {
    img::Grid out(in.width, in.height, 0.0);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double v = in.at(x, y);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    const double s = in.in_bounds(nx, ny) ? in.at(nx, ny) : 0.0;
                    v = op == Morph::erode ? std::min(v, s) : std::max(v, s);
                }
            out.at(x, y) = v;
        }
    }
    return out;
}

}  // namespace

img::Grid preprocess(const img::Grid& S) {
    // Mean filter first: it consolidates the ragged thresholded blob into a
    // solid neighborhood that survives the opening (a small object eroded
    // before smoothing would vanish). Lone salt pixels come out attenuated
    // by (1/9)^2 rather than exactly zero.
    img::Grid out = mean_filter3(S);
    out = morph3(out, Morph::erode);
    out = morph3(out, Morph::dilate);
    for (double& v : out.data) v *= v;
    return out;
}

namespace {

struct PixelBox {
    int x0, x1, y0, y1;  // inclusive
    bool empty() const { return x1 < x0 || y1 < y0; }
};

PixelBox clip_box(const img::Grid& S, double cx, double cy, double w, double h) {
    PixelBox b;
    b.x0 = std::max(0, static_cast<int>(std::ceil(cx - w / 2.0)));
    b.x1 = std::min(S.width - 1, static_cast<int>(std::floor(cx + w / 2.0)));
    b.y0 = std::max(0, static_cast<int>(std::ceil(cy - h / 2.0)));
    b.y1 = std::min(S.height - 1, static_cast<int>(std::floor(cy + h / 2.0)));
    return b;
}

struct Moments {
    double mass = 0.0;
    double mx = 0.0, my = 0.0;
    double sx = 0.0, sy = 0.0;  // raw per-axis standard deviation
};

Moments box_moments(const img::Grid& S, const PixelBox& b) {
    Moments m;
    if (b.empty()) return m;
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
    for (int y = b.y0; y <= b.y1; ++y)
        for (int x = b.x0; x <= b.x1; ++x) {
            const double w = S.at(x, y);
            if (w <= 0.0) continue;
            m.mass += w;
            sx += w * x;
            sy += w * y;
            sxx += w * static_cast<double>(x) * x;
            syy += w * static_cast<double>(y) * y;
        }
    if (m.mass <= 0.0) return m;
    m.mx = sx / m.mass;
    m.my = sy / m.mass;
    m.sx = std::sqrt(std::max(0.0, sxx / m.mass - m.mx * m.mx));
    m.sy = std::sqrt(std::max(0.0, syy / m.mass - m.my * m.my));
    return m;
}

// Variance shrink factor of a centered normal truncated to [-k, k] sigma.
double truncation_factor(double k) {
    const double phi = std::exp(-0.5 * k * k) / std::sqrt(2.0 * std::numbers::pi);
    const double mass = std::erf(k / std::numbers::sqrt2);  // = 2*Phi(k)-1
    if (mass <= 1e-12) return 0.0;
    return 1.0 - 2.0 * k * phi / mass;
}

// Estimate the sigma of the underlying Gaussian from the raw standard
// deviation of data truncated to a box of half-extent h. Plain moments
// understate sigma once the box is tighter than ~4 sigma, which would make
// the 4*sigma update rule settle near 3*sigma of the true blob; inverting
// the truncated-moment relation keeps the fitted side lengths at 4*sigma.
double corrected_sigma(double sigma_raw, double h) {
    if (sigma_raw < 0.5 || h <= 0.0) return sigma_raw;
    if (h / sigma_raw > 4.0) return sigma_raw;  // truncation negligible
    const double cap = 3.0 * sigma_raw;
    double sigma = sigma_raw;
    for (int i = 0; i < 16; ++i) {
        const double f = truncation_factor(h / sigma);
        if (f <= 1e-6) return cap;  // data ~uniform inside the box
        sigma = std::min(cap, sigma_raw / std::sqrt(f));
    }
    return sigma;
}

}  // namespace

double roi_mass(const img::Grid& S, const DetectionROI& roi) {
    return box_moments(S, clip_box(S, roi.cx, roi.cy, roi.w, roi.h)).mass;
}

std::optional<DetectionROI> gaussian_fit_roi(const img::Grid& S,
                                             const FitParams& params) {
    // Initial center: brightest pixel; initial sides: half the image.
    int best_x = -1, best_y = -1;
    double best = 0.0;
    for (int y = 0; y < S.height; ++y)
        for (int x = 0; x < S.width; ++x)
            if (S.at(x, y) > best) {
                best = S.at(x, y);
                best_x = x;
                best_y = y;
            }
    if (best_x < 0) return std::nullopt;

    DetectionROI roi;
    roi.cx = best_x;
    roi.cy = best_y;
    roi.w = S.width / 2.0;
    roi.h = S.height / 2.0;

    for (int k = 0; k < params.max_iterations; ++k) {
        const PixelBox box = clip_box(S, roi.cx, roi.cy, roi.w, roi.h);
        const Moments m = box_moments(S, box);
        roi.iterations = k + 1;
        if (m.mass <= 0.0) {
            roi.converged = false;
            break;
        }
        const double hx = (box.x1 - box.x0 + 1) / 2.0;
        const double hy = (box.y1 - box.y0 + 1) / 2.0;
        const double new_w =
            std::max(params.min_side, 4.0 * corrected_sigma(m.sx, hx));
        const double new_h =
            std::max(params.min_side, 4.0 * corrected_sigma(m.sy, hy));
        const double dc = std::hypot(m.mx - roi.cx, m.my - roi.cy);
        const double dw = std::abs(new_w - roi.w);
        const double dh = std::abs(new_h - roi.h);
        roi.cx = m.mx;
        roi.cy = m.my;
        roi.w = new_w;
        roi.h = new_h;
        if (dc < params.delta_center && dw < params.delta_side &&
            dh < params.delta_side) {
            roi.converged = true;
            break;
        }
    }
    roi.mass = roi_mass(S, roi);
    return roi;
}

std::optional<DetectionROI> moving_region_retrieval(const img::Grid& S) {
    // Binarize at the mean of the positive pixels.
    double sum = 0.0;
    std::size_t n = 0;
    for (const double v : S.data) {
        if (v <= 0.0) continue;
        sum += v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    const double thresh = sum / static_cast<double>(n);

    std::vector<std::int32_t> label(S.size(), -1);
    auto above = [&](int x, int y) { return S.at(x, y) >= thresh; };

    double best_mass = -1.0;
    DetectionROI best;
    std::vector<std::pair<int, int>> stack;
    std::int32_t next_label = 0;
    for (int y = 0; y < S.height; ++y) {
        for (int x = 0; x < S.width; ++x) {
            if (!above(x, y) || label[S.idx(x, y)] >= 0) continue;
            // Flood-fill one 8-connected component.
            double mass = 0.0;
            int x0 = x, x1 = x, y0 = y, y1 = y;
            stack.clear();
            stack.emplace_back(x, y);
            label[S.idx(x, y)] = next_label;
            while (!stack.empty()) {
                const auto [px, py] = stack.back();
                stack.pop_back();
                mass += S.at(px, py);
                x0 = std::min(x0, px);
                x1 = std::max(x1, px);
                y0 = std::min(y0, py);
                y1 = std::max(y1, py);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = px + dx, ny = py + dy;
                        if (!S.in_bounds(nx, ny)) continue;
                        if (label[S.idx(nx, ny)] >= 0 || !above(nx, ny)) continue;
                        label[S.idx(nx, ny)] = next_label;
                        stack.emplace_back(nx, ny);
                    }
            }
            ++next_label;
            if (mass > best_mass) {
                best_mass = mass;
                best.cx = (x0 + x1) / 2.0;
                best.cy = (y0 + y1) / 2.0;
                best.w = static_cast<double>(x1 - x0 + 1);
                best.h = static_cast<double>(y1 - y0 + 1);
                best.mass = mass;
                best.converged = true;
            }
        }
    }
    if (best_mass < 0.0) return std::nullopt;
    return best;
}

bool needs_region_retrieval(const std::optional<DetectionROI>& roi, int width,
                            int height, double area_fraction,
                            double mass_floor) {
    if (!roi) return false;  // empty image: nothing to retrieve either
    if (!roi->converged) return true;
    if (roi->mass < mass_floor) return true;
    const double area = roi->w * roi->h;
    return area > area_fraction * static_cast<double>(width) * height;
}

}  // namespace evd::detect

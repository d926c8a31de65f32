#pragma once

#include <optional>
#include <vector>

#include "evd/geometry.hpp"
#include "evd/image.hpp"
#include "evd/time_image.hpp"

namespace evd::detect {

/// Adaptive threshold weights: theta = mean(N) + a*|omega| + b*|v| + c,
/// clamped to [0, 1].
struct ThresholdParams {
    double a = 0.04;  ///< s/rad
    double b = 0.01;  ///< s/m
    double c = 0.05;
};

/// Fitted moving-object region: real-valued center, side lengths, the sum of
/// segmented values inside the box, and how the fit exited.
struct DetectionROI {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    bool converged = false;
    double mass = 0.0;
    int iterations = 0;
};

struct FitParams {
    int max_iterations = 10;
    double delta_center = 2.0;  ///< px
    double delta_side = 2.0;    ///< px
    double min_side = 3.0;      ///< px, avoids zero-variance collapse
};

/// Keep pixels with N >= theta(omega, v), zero the rest. Invalid pixels of N
/// never survive.
img::Grid adaptive_threshold(const ti::NormalizedMeanTimeImage& N,
                             const geom::Vec3& omega, const geom::Vec3& v,
                             const ThresholdParams& params,
                             double* theta_out = nullptr);

/// Denoise/enhance the segmented image: 3x3 mean filter, 3x3 grayscale
/// opening, element-wise square.
img::Grid preprocess(const img::Grid& S);

/// Iterative Gaussian fit. Starts at the brightest pixel with
/// half-image side lengths, alternates moment evaluation inside the current
/// box with (center, sides) <- (mu, 4*sigma) until both movements drop below
/// their tolerances or the iteration budget runs out. The per-axis sigma is
/// corrected for box truncation so the fitted sides track 4*sigma of the
/// underlying blob rather than of the clipped data. Returns nullopt when S
/// has no positive pixel.
std::optional<DetectionROI> gaussian_fit_roi(const img::Grid& S,
                                             const FitParams& params = {});

/// Connected-component fallback: binarize S at the mean of its positive
/// pixels, label 8-connected components, return the tight bounding box of the
/// component with the largest value mass. Returns nullopt when nothing
/// survives binarization.
std::optional<DetectionROI> moving_region_retrieval(const img::Grid& S);

/// True when the fit result warrants the connected-component fallback:
/// non-convergence, runaway box area, or negligible mass.
bool needs_region_retrieval(const std::optional<DetectionROI>& roi, int width,
                            int height, double area_fraction = 0.25,
                            double mass_floor = 1e-9);

/// Sum of S over the (clipped) pixel box of an ROI.
double roi_mass(const img::Grid& S, const DetectionROI& roi);

}  // namespace evd::detect

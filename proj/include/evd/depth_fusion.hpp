#pragma once

#include <string>
#include <vector>

#include "evd/detection.hpp"
#include "evd/geometry.hpp"
#include "evd/image.hpp"

namespace evd::depth {

/// One depth camera frame: z-depth in meters (0 = invalid), with the camera
/// intrinsics and world pose at capture time.
struct DepthFrame {
    double t = 0.0;
    img::Grid depth;
    geom::Intrinsics K;
    geom::Pose pose;  ///< ^W T_D
};

struct SegmentationParams {
    double bin_width = 0.10;      ///< m
    int min_peak_count = 20;      ///< px, peaks below this do not count
    double variance_gate = 0.05;  ///< m^2
    int pixel_floor = 20;         ///< px, minimum segmented population
};

/// Scalar depth extracted from a detection ROI.
struct DepthMeasurement {
    double t = 0.0;
    double depth = 0.0;     ///< mean of the segmented pixels, m
    double variance = 0.0;  ///< m^2
    int pixel_count = 0;
    bool accepted = false;
};

/// Reproject a depth frame into the event-camera pixel grid: back-project
/// every valid pixel, move it D -> E, z-buffer on collisions (nearest wins).
/// Holes stay invalid (0).
img::Grid register_depth(const DepthFrame& frame, const geom::Intrinsics& K_E,
                         const geom::Pose& T_WE);

/// Grow/shrink an ROI about its center, then clip to the frame. The clipped
/// box defines the new center and sides. A box fully outside the frame comes
/// back with zero sides.
detect::DetectionROI scale_roi(const detect::DetectionROI& roi, double factor,
                               int width, int height);

/// Histogram segmentation inside the ROI: find the nearest (smallest-depth)
/// local-maximum bin with enough support, gather the contiguous
/// above-half-peak band around it, report mean/variance of those pixels.
/// The measurement is accepted when the variance passes the gate and the
/// pixel count meets the floor; otherwise the band (or, with no usable peak,
/// the whole ROI population) is reported with accepted = false.
DepthMeasurement segment_depth(const img::Grid& registered, double t,
                               const detect::DetectionROI& roi,
                               const SegmentationParams& params = {});

/// Depth frame files: 16-bit PGM in millimeters (0 = invalid), named
/// `depth_<t_in_microseconds>.pgm`, listed in an index file of `t,filename`
/// lines.
void save_depth_pgm(const std::string& path, const img::Grid& depth_m);
img::Grid load_depth_pgm(const std::string& path);

struct DepthIndexEntry {
    double t = 0.0;
    std::string filename;
};

std::vector<DepthIndexEntry> load_depth_index(const std::string& path);
void save_depth_index(const std::string& path,
                      const std::vector<DepthIndexEntry>& entries);
std::string depth_frame_filename(double t);

}  // namespace evd::depth

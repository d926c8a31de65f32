#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evd/config.hpp"
#include "evd/depth_fusion.hpp"
#include "evd/detection.hpp"
#include "evd/event_core.hpp"
#include "evd/geometry.hpp"
#include "evd/motion_compensation.hpp"
#include "evd/simulator.hpp"
#include "evd/time_image.hpp"
#include "evd/tracking2d.hpp"
#include "evd/trajectory.hpp"

namespace evd::pipeline {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class EstimatorMode { mono, fusion };

EstimatorMode estimator_mode_from_string(const std::string& s);
const char* estimator_mode_name(EstimatorMode m);

/// Where the window velocity estimate comes from.
enum class VelocitySource { velocity_file, pose_difference };

struct RunConfig {
    // Dataset paths (resolved against the config file's directory).
    std::string events_path;
    std::string imu_path;
    std::string poses_path;
    std::string velocity_path;     ///< optional
    std::string depth_index_path;  ///< optional
    std::string depth_dir;
    std::string ground_truth_path;  ///< optional
    std::string event_truth_path;   ///< optional
    std::string output_dir = "out";

    geom::Intrinsics event_K;
    geom::Intrinsics depth_K;
    geom::Pose T_E_D;    ///< depth camera in the event camera frame
    geom::Pose T_E_imu;  ///< IMU in the event camera frame (rotation used)

    double window = events::kDefaultWindow;
    mc::Mode compensation = mc::Mode::rotation_translation;
    EstimatorMode estimator = EstimatorMode::fusion;
    VelocitySource velocity_source = VelocitySource::velocity_file;

    detect::ThresholdParams threshold;
    detect::FitParams fit;
    double retrieval_area_fraction = 0.25;
    int detection_min_pixels = 10;  ///< segmented-pixel floor per window
    /// Peak floor on the preprocessed image. An isolated hot pixel leaves a
    /// residue of at most (1/9)^2 ~ 0.0123 after the mean/open/square chain,
    /// so anything below this is indistinguishable from salt noise.
    double detection_min_peak = 0.015;

    track::TrackerConfig tracker;
    depth::SegmentationParams segmentation;
    double roi_scale = 2.0;
    double depth_roi_max_age = 0.05;  ///< s, detection freshness for depth use
    /// Depth measurements are used only once the track has this many
    /// observations (rules out segmenting around spurious detections).
    std::size_t depth_min_track_obs = 2;
    /// Once an estimate exists, depth measurements farther than this from the
    /// predicted depth are treated as background and dropped.
    double depth_assoc_gate = 1.5;  ///< m
    /// Consecutive object depths may not jump faster than this.
    double depth_rate_gate = 30.0;  ///< m/s
    /// Floor on the depth ROI sides after scaling.
    double depth_roi_min_side = 10.0;  ///< px

    traj::SolverConfig solver;
    geom::Vec3 gravity{0.0, 0.0, -9.81};  ///< world frame, known a priori

    std::string kernel_backend = "auto";  ///< auto | scalar | avx2
    bool dump_time_images = false;
    /// Dilation of the ground-truth box when computing relative contrast
    /// (event emission spills up to ~1 px past the projected disc, plus
    /// pixel rounding).
    double contrast_box_margin = 2.0;  ///< px

    /// Build from a parsed config; relative paths resolve against base_dir.
    static RunConfig from_config(const cfg::KeyValues& kv,
                                 const std::string& base_dir);
};

/// Scene config from a `[scene]` config file.
sim::SceneConfig scene_from_config(const cfg::KeyValues& kv);

struct ApeStats {
    double mean = 0.0, min = 0.0, max = 0.0, rmse = 0.0;
    std::size_t samples = 0;
};

struct MetricsReport {
    std::size_t windows = 0;
    std::size_t events_in = 0;
    std::size_t events_dropped = 0;
    std::size_t events_without_depth = 0;
    std::size_t detections = 0;
    std::size_t depth_measurements = 0;
    std::size_t depth_accepted = 0;
    std::size_t event_observations = 0;

    /// Relative contrast over windows with a visible ground-truth box.
    std::vector<double> relative_contrast;
    double contrast_min = 0.0, contrast_avg = 0.0, contrast_max = 0.0;

    /// Compensation wall time (table build + warp), milliseconds.
    double comp_ms_min = 0.0, comp_ms_avg = 0.0, comp_ms_max = 0.0;

    std::optional<ApeStats> ape;
    /// Fraction of ground-truth windows (>= 50 object events) whose final ROI
    /// center falls inside the true box.
    std::optional<double> detection_rate;

    bool has_trajectory = false;
    traj::BallisticTrajectory trajectory;
    traj::EstimateDiagnostics solver_diag;

    /// Stage failures that were contained (the run continued on later
    /// windows), "<stage>: <what>" each.
    std::vector<std::string> stage_failures;
};

/// Run the full pipeline. Writes detections.csv, track.csv, trajectory.txt,
/// trajectory_samples.csv, metrics.txt and timing.txt into the output dir.
MetricsReport run(const RunConfig& cfg);

/// Relative contrast of an object box M against the background complement:
/// (max M - max B) / max M, computed on the denoised image. Throws
/// MetricError when the box contains no pixel.
double relative_contrast(const img::Grid& denoised, const sim::GroundTruthBox& box);

/// 3x3 median filter (in-bounds neighborhood).
img::Grid median_filter3(const img::Grid& in);

/// Unified denoising ahead of the contrast metric, identical for every
/// compensation mode: pixels backed by a single event carry that event's
/// arbitrary timestamp and are dropped, then a 3x3 median clears isolated
/// survivors.
img::Grid contrast_denoise(const ti::NormalizedMeanTimeImage& N,
                           const events::PixelGrid& groups);

/// Absolute position error of an estimated trajectory against ground truth
/// samples taken every `sample_dt` over [t_begin, t_end]. Throws MetricError
/// when the ranges do not overlap.
ApeStats ape(const traj::BallisticTrajectory& estimate,
             const traj::BallisticTrajectory& truth, double t_begin,
             double t_end, double sample_dt = 0.01);

/// Serialize the deterministic part of the report (everything but wall
/// times, which go to timing.txt).
std::string format_metrics(const MetricsReport& m);
std::string format_timing(const MetricsReport& m);

}  // namespace evd::pipeline

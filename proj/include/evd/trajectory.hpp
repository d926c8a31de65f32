#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evd/geometry.hpp"

namespace evd::traj {

struct InsufficientObservationsError : std::runtime_error {
    InsufficientObservationsError()
        : std::runtime_error(
              "need >= 3 event observations (and 2*N_event + N_depth >= 6)") {}
};

/// Free-fall trajectory with known gravity:
/// p(t) = p0 + (t - t0) v0 + 0.5 g (t - t0)^2.
struct BallisticTrajectory {
    geom::Vec3 p0 = geom::Vec3::Zero();   ///< world frame, m
    geom::Vec3 v0 = geom::Vec3::Zero();   ///< m/s
    geom::Vec3 g{0.0, 0.0, -9.81};        ///< m/s^2, fixed during optimization
    double t0 = 0.0;
};

geom::Point3 ballistic_position(const BallisticTrajectory& traj, double t);

/// Forward prediction (t >= t0 expected).
geom::Point3 predict(const BallisticTrajectory& traj, double t);

/// Tracked 2D detection in normalized image coordinates (pixels mapped
/// through the inverse intrinsics), with the event-camera pose at its time.
struct EventObservation {
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
    geom::Pose pose;  ///< ^W T_E at t
};

/// Scalar depth of the segmented object with the depth-camera pose at its
/// time.
struct DepthObservation {
    double t = 0.0;
    double d = 0.0;
    geom::Pose pose;  ///< ^W T_D at t
};

struct SolverConfig {
    double huber_event = 0.01;  ///< normalized-coordinate residual scale
    double huber_depth = 0.10;  ///< m
    int max_iterations = 50;
    double gradient_tol = 1e-10;
    double step_tol = 1e-12;
    double lambda_init = 1e-3;
    double lambda_factor = 10.0;
    double lambda_max = 1e12;
    double event_weight = 1.0;
    double depth_weight = 1.0;
    double min_z = 0.01;  ///< cheirality floor, m
};

/// Reprojection residual r = (x/z - u, y/z - v) in the observing camera
/// frame, with optional Jacobian w.r.t. (p0, v0). Returns false when the
/// predicted point violates the cheirality floor and the observation must be
/// skipped for this iterate.
bool event_residual(const BallisticTrajectory& traj, const EventObservation& obs,
                    Eigen::Vector2d& r,
                    Eigen::Matrix<double, 2, 6>* jacobian = nullptr,
                    double min_z = 0.01);

/// Depth residual r = z - d in the depth camera frame, with optional
/// Jacobian w.r.t. (p0, v0).
double depth_residual(const BallisticTrajectory& traj, const DepthObservation& obs,
                      Eigen::Matrix<double, 1, 6>* jacobian = nullptr);

struct EstimateDiagnostics {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    double event_cost = 0.0;   ///< robust cost share of event residuals
    double depth_cost = 0.0;   ///< robust cost share of depth residuals
    int skipped_events = 0;    ///< cheirality skips at the final iterate
};

/// Huber-robustified damped Gauss-Newton fit of (p0, v0). Throws
/// InsufficientObservationsError when fewer than 3 event observations are
/// given (depth residuals alone cannot pin the trajectory). `warm_start`
/// seeds the iteration; otherwise p0/v0 are initialized from back-projecting
/// the first and last event observations at the first accepted depth (5 m
/// when no depth is available).
BallisticTrajectory estimate(std::span<const EventObservation> events,
                             std::span<const DepthObservation> depths,
                             const geom::Vec3& g, double t0,
                             const SolverConfig& cfg = {},
                             EstimateDiagnostics* diag = nullptr,
                             const BallisticTrajectory* warm_start = nullptr);

/// Trajectory result file: single line
/// `t0 p0x p0y p0z v0x v0y v0z cost iters converged`.
void save_trajectory(const std::string& path, const BallisticTrajectory& traj,
                     const EstimateDiagnostics& diag);

/// Sampled dump `t,x,y,z` at the given rate over [t0, t1].
void save_trajectory_samples(const std::string& path,
                             const BallisticTrajectory& traj, double t1,
                             double rate_hz = 100.0);

}  // namespace evd::traj

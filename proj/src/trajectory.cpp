#include "evd/trajectory.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace evd::traj {

geom::Point3 ballistic_position(const BallisticTrajectory& traj, double t) {
    const double dt = t - traj.t0;
    return traj.p0 + dt * traj.v0 + 0.5 * dt * dt * traj.g;
}

geom::Point3 predict(const BallisticTrajectory& traj, double t) {
    return ballistic_position(traj, t);
}

bool event_residual(const BallisticTrajectory& traj, const EventObservation& obs,
                    Eigen::Vector2d& r, Eigen::Matrix<double, 2, 6>* jacobian,
                    double min_z) {
    const geom::Mat3 Rt = obs.pose.rotation.transpose();
    const geom::Vec3 X = Rt * (ballistic_position(traj, obs.t) - obs.pose.translation);
    if (X.z() <= min_z) return false;
    r[0] = X.x() / X.z() - obs.u;
    r[1] = X.y() / X.z() - obs.v;
    if (jacobian) {
        const double inv_z = 1.0 / X.z();
        Eigen::Matrix<double, 2, 3> dr_dX;
        dr_dX << inv_z, 0.0, -X.x() * inv_z * inv_z,
                 0.0, inv_z, -X.y() * inv_z * inv_z;
        const double dt = obs.t - traj.t0;
        const Eigen::Matrix<double, 2, 3> front = dr_dX * Rt;
        jacobian->leftCols<3>() = front;
        jacobian->rightCols<3>() = dt * front;
    }
    return true;
}

double depth_residual(const BallisticTrajectory& traj, const DepthObservation& obs,
                      Eigen::Matrix<double, 1, 6>* jacobian) {
    const geom::Mat3 Rt = obs.pose.rotation.transpose();
    const geom::Vec3 X = Rt * (ballistic_position(traj, obs.t) - obs.pose.translation);
    if (jacobian) {
        const Eigen::RowVector3d row = Rt.row(2);
        const double dt = obs.t - traj.t0;
        jacobian->leftCols<3>() = row;
        jacobian->rightCols<3>() = dt * row;
    }
    return X.z() - obs.d;
}

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

double huber(double s, double delta) {
    return s <= delta ? s * s : 2.0 * delta * s - delta * delta;
}

double irls_weight(double s, double delta) {
    return s <= delta ? 1.0 : delta / s;
}

struct CostBreakdown {
    double total = 0.0;
    double event_part = 0.0;
    double depth_part = 0.0;
    int skipped = 0;
    int active_events = 0;
};

BallisticTrajectory with_params(const BallisticTrajectory& base, const Vec6& th) {
    BallisticTrajectory t = base;
    t.p0 = th.head<3>();
    t.v0 = th.tail<3>();
    return t;
}

CostBreakdown evaluate_cost(const BallisticTrajectory& base, const Vec6& th,
                            std::span<const EventObservation> events,
                            std::span<const DepthObservation> depths,
                            const SolverConfig& cfg) {
    const BallisticTrajectory traj = with_params(base, th);
    CostBreakdown out;
    Eigen::Vector2d r;
    for (const auto& e : events) {
        if (!event_residual(traj, e, r, nullptr, cfg.min_z)) {
            ++out.skipped;
            continue;
        }
        ++out.active_events;
        out.event_part += cfg.event_weight * huber(r.norm(), cfg.huber_event);
    }
    for (const auto& d : depths) {
        const double rd = depth_residual(traj, d);
        out.depth_part += cfg.depth_weight * huber(std::abs(rd), cfg.huber_depth);
    }
    out.total = out.event_part + out.depth_part;
    return out;
}

// Robustified normal equations: A = sum w J^T J, grad = sum w J^T r.
void build_normal_equations(const BallisticTrajectory& base, const Vec6& th,
                            std::span<const EventObservation> events,
                            std::span<const DepthObservation> depths,
                            const SolverConfig& cfg, Mat6& A, Vec6& grad) {
    const BallisticTrajectory traj = with_params(base, th);
    A.setZero();
    grad.setZero();
    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 6> Je;
    for (const auto& e : events) {
        if (!event_residual(traj, e, r, &Je, cfg.min_z)) continue;
        const double w = cfg.event_weight * irls_weight(r.norm(), cfg.huber_event);
        A.noalias() += w * Je.transpose() * Je;
        grad.noalias() += w * Je.transpose() * r;
    }
    Eigen::Matrix<double, 1, 6> Jd;
    for (const auto& d : depths) {
        const double rd = depth_residual(traj, d, &Jd);
        const double w = cfg.depth_weight * irls_weight(std::abs(rd), cfg.huber_depth);
        A.noalias() += w * Jd.transpose() * Jd;
        grad.noalias() += w * Jd.transpose() * rd;
    }
}

Vec6 initial_guess(std::span<const EventObservation> events,
                   std::span<const DepthObservation> depths,
                   const geom::Vec3& g, double t0) {
    const double d_hat = depths.empty() ? 5.0 : depths.front().d;
    const EventObservation& first = events.front();
    const EventObservation& last = events.back();
    const geom::Vec3 p_first = geom::transform(
        first.pose, geom::Vec3(first.u * d_hat, first.v * d_hat, d_hat));
    const geom::Vec3 p_last = geom::transform(
        last.pose, geom::Vec3(last.u * d_hat, last.v * d_hat, d_hat));
    const double span = last.t - first.t;
    geom::Vec3 v0 = geom::Vec3::Zero();
    if (span > 1e-9) v0 = (p_last - p_first) / span;
    const double dt1 = first.t - t0;
    const geom::Vec3 p0 = p_first - v0 * dt1 - 0.5 * dt1 * dt1 * g;
    Vec6 th;
    th << p0, v0;
    return th;
}

}  // namespace

BallisticTrajectory estimate(std::span<const EventObservation> events,
                             std::span<const DepthObservation> depths,
                             const geom::Vec3& g, double t0,
                             const SolverConfig& cfg, EstimateDiagnostics* diag,
                             const BallisticTrajectory* warm_start) {
    if (events.size() < 3 || 2 * events.size() + depths.size() < 6)
        throw InsufficientObservationsError{};

    BallisticTrajectory base;
    base.g = g;
    base.t0 = t0;

    Vec6 th;
    if (warm_start) {
        th << warm_start->p0, warm_start->v0;
    } else {
        th = initial_guess(events, depths, g, t0);
    }

    CostBreakdown cost = evaluate_cost(base, th, events, depths, cfg);
    if (warm_start && cost.active_events < 3) {
        // A stale warm start can sit behind the cameras, where skipped
        // event residuals make the problem blind; restart from scratch.
        th = initial_guess(events, depths, g, t0);
        cost = evaluate_cost(base, th, events, depths, cfg);
    }
    Vec6 best_th = th;
    CostBreakdown best_cost = cost;

    double lambda = cfg.lambda_init;
    bool converged = false;
    std::string stop_reason = "max iterations";
    int iterations = 0;
    const double initial_cost = cost.total;

    Mat6 A;
    Vec6 grad;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        build_normal_equations(base, th, events, depths, cfg, A, grad);
        if (grad.cwiseAbs().maxCoeff() < cfg.gradient_tol) {
            // With most events behind the camera a flat gradient is not a
            // solution, it is blindness.
            converged = cost.active_events >= 3;
            stop_reason = converged ? "gradient" : "cheirality";
            break;
        }

        bool stepped = false;
        while (lambda <= cfg.lambda_max) {
            Mat6 damped = A;
            for (int i = 0; i < 6; ++i)
                damped(i, i) += lambda * std::max(A(i, i), 1e-12);
            const Vec6 step = damped.ldlt().solve(-grad);
            if (!step.allFinite()) {
                lambda *= cfg.lambda_factor;
                continue;
            }
            if (step.norm() < cfg.step_tol) {
                // The damping has shrunk the step below the movement
                // tolerance: nothing measurable left to gain.
                converged = true;
                stop_reason = "step";
                break;
            }
            const Vec6 candidate = th + step;
            const CostBreakdown cand_cost =
                evaluate_cost(base, candidate, events, depths, cfg);
            // Steps may not trade cost for cheirality skips: a candidate
            // that hides observations behind the camera shrinks the cost
            // without fitting anything.
            if (cand_cost.total < cost.total &&
                cand_cost.skipped <= cost.skipped &&
                cand_cost.active_events >= 3) {
                th = candidate;
                cost = cand_cost;
                lambda = std::max(lambda / cfg.lambda_factor, 1e-15);
                stepped = true;
                if (cost.total < best_cost.total) {
                    best_th = th;
                    best_cost = cost;
                }
                ++iterations;
                break;
            }
            lambda *= cfg.lambda_factor;
        }
        if (converged) break;
        if (!stepped) {
            stop_reason = "damping limit";
            break;
        }
    }

    if (diag) {
        diag->initial_cost = initial_cost;
        diag->final_cost = best_cost.total;
        diag->iterations = iterations;
        diag->converged = converged;
        diag->stop_reason = stop_reason;
        diag->event_cost = best_cost.event_part;
        diag->depth_cost = best_cost.depth_part;
        diag->skipped_events = best_cost.skipped;
    }
    return with_params(base, best_th);
}

void save_trajectory(const std::string& path, const BallisticTrajectory& traj,
                     const EstimateDiagnostics& diag) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.12e %d %d\n", traj.t0,
                  traj.p0.x(), traj.p0.y(), traj.p0.z(), traj.v0.x(),
                  traj.v0.y(), traj.v0.z(), diag.final_cost, diag.iterations,
                  diag.converged ? 1 : 0);
    out << buf;
}

void save_trajectory_samples(const std::string& path,
                             const BallisticTrajectory& traj, double t1,
                             double rate_hz) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trajectory samples: " + path);
    const auto steps = static_cast<long>(std::floor((t1 - traj.t0) * rate_hz));
    char buf[160];
    for (long k = 0; k <= std::max(0L, steps); ++k) {
        const double t = traj.t0 + static_cast<double>(k) / rate_hz;
        const geom::Point3 p = ballistic_position(traj, t);
        std::snprintf(buf, sizeof(buf), "%.9f,%.6f,%.6f,%.6f\n", t, p.x(), p.y(),
                      p.z());
        out << buf;
    }
}

}  // namespace evd::traj

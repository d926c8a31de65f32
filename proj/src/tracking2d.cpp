#include "evd/tracking2d.hpp"

#include <cmath>

namespace evd::track {

namespace {

// Per-axis state indices: axis 0 -> (0, 2, 4), axis 1 -> (1, 3, 5).
Mat6 transition(double dt) {
    Mat6 F = Mat6::Identity();
    for (int axis = 0; axis < 2; ++axis) {
        F(axis, axis + 2) = dt;
        F(axis, axis + 4) = 0.5 * dt * dt;
        F(axis + 2, axis + 4) = dt;
    }
    return F;
}

// Discretized white-jerk process noise.
Mat6 process_noise(double dt, double q) {
    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
    Mat6 Q = Mat6::Zero();
    for (int axis = 0; axis < 2; ++axis) {
        const int p = axis, v = axis + 2, a = axis + 4;
        Q(p, p) = q * dt5 / 20.0;
        Q(p, v) = Q(v, p) = q * dt4 / 8.0;
        Q(p, a) = Q(a, p) = q * dt3 / 6.0;
        Q(v, v) = q * dt3 / 3.0;
        Q(v, a) = Q(a, v) = q * dt2 / 2.0;
        Q(a, a) = q * dt;
    }
    return Q;
}

}  // namespace

TrackState make_track(const Vec2& position, double t, const TrackerConfig& cfg) {
    TrackState s;
    s.x[0] = position.x();
    s.x[1] = position.y();
    s.last_update = t;
    const double p2 = cfg.init_pos_sigma * cfg.init_pos_sigma;
    const double v2 = cfg.init_vel_sigma * cfg.init_vel_sigma;
    const double a2 = cfg.init_acc_sigma * cfg.init_acc_sigma;
    s.P.diagonal() << p2, p2, v2, v2, a2, a2;
    return s;
}

TrackState predict(const TrackState& s, double t, const TrackerConfig& cfg) {
    if (t < s.last_update)
        throw std::invalid_argument("predict target time is in the past");
    const double dt = t - s.last_update;
    TrackState out = s;
    if (dt == 0.0) return out;
    const Mat6 F = transition(dt);
    out.x = F * s.x;
    out.P = F * s.P * F.transpose() + process_noise(dt, cfg.jerk_psd);
    out.last_update = t;
    return out;
}

TrackState update(const TrackState& s, const Vec2& measurement, double t,
                  const TrackerConfig& cfg) {
    TrackState pred = predict(s, t, cfg);
    const double r = cfg.meas_sigma * cfg.meas_sigma;

    // H selects (x, y); S and the gain are computed in closed form.
    const double s00 = pred.P(0, 0) + r;
    const double s01 = pred.P(0, 1);
    const double s11 = pred.P(1, 1) + r;
    const double det = s00 * s11 - s01 * s01;

    const Vec2 innovation = measurement - pred.position();
    TrackState out = pred;
    out.miss_count = 0;
    if (!(det > 1e-300)) {
        // Degenerate gate (exact filter fully collapsed with R = 0): the
        // position is already pinned, take the measurement verbatim.
        out.x[0] = measurement.x();
        out.x[1] = measurement.y();
        return out;
    }

    Eigen::Matrix2d S_inv;
    S_inv << s11, -s01, -s01, s00;
    S_inv /= det;

    const Eigen::Matrix<double, 6, 2> PHt = pred.P.leftCols<2>();
    const Eigen::Matrix<double, 6, 2> K = PHt * S_inv;

    out.x = pred.x + K * innovation;
    // Joseph form keeps P symmetric PSD with arbitrary gains.
    Mat6 IKH = Mat6::Identity();
    IKH.block<6, 2>(0, 0) -= K;
    out.P = IKH * pred.P * IKH.transpose() +
            K * (Eigen::Matrix2d::Identity() * r) * K.transpose();
    out.P = 0.5 * (out.P + out.P.transpose()).eval();
    return out;
}

Association associate(const TrackState& s, const Vec2& detection, double t,
                      const TrackerConfig& cfg) {
    const double dt = t - s.last_update;
    if (dt < 0.0) return Association::reject;
    if (dt > cfg.gate.max_dt) return Association::new_track;
    const TrackState pred = predict(s, t, cfg);
    const double dist = (detection - pred.position()).norm();
    return dist <= cfg.gate.max_dist ? Association::accept : Association::reject;
}

Association Tracker::process(const Vec2& detection, double t) {
    if (!state_) {
        state_ = make_track(detection, t, cfg_);
        return Association::new_track;
    }
    const Association a = associate(*state_, detection, t, cfg_);
    switch (a) {
        case Association::accept:
            state_ = update(*state_, detection, t, cfg_);
            return a;
        case Association::new_track:
            state_ = make_track(detection, t, cfg_);
            return a;
        case Association::reject:
            state_->miss_count += 1;
            if (state_->miss_count > cfg_.miss_limit) {
                state_ = make_track(detection, t, cfg_);
                return Association::new_track;
            }
            return a;
    }
    return Association::reject;
}

}  // namespace evd::track

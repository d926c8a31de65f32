#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>

namespace evd::track {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec2 = Eigen::Vector2d;

/// Image-plane track: position, velocity and acceleration per axis, state
/// order (x, y, vx, vy, ax, ay).
struct TrackState {
    Vec6 x = Vec6::Zero();
    Mat6 P = Mat6::Zero();
    double last_update = 0.0;
    int miss_count = 0;

    Vec2 position() const { return {x[0], x[1]}; }
    Vec2 velocity() const { return {x[2], x[3]}; }
    Vec2 acceleration() const { return {x[4], x[5]}; }
};

struct AssociationGate {
    double max_dt = 0.1;     ///< seconds
    double max_dist = 50.0;  ///< pixels
};

struct TrackerConfig {
    double jerk_psd = 1e3;      ///< white-jerk PSD, px^2/s^5
    double meas_sigma = 2.0;    ///< measurement noise, px
    AssociationGate gate;
    int miss_limit = 3;
    double init_pos_sigma = 5.0;
    double init_vel_sigma = 100.0;
    double init_acc_sigma = 500.0;
};

enum class Association { accept, reject, new_track };

/// Fresh track anchored at a detection: zero velocity/acceleration, diagonal
/// prior covariance.
TrackState make_track(const Vec2& position, double t, const TrackerConfig& cfg);

/// Propagate by the constant-acceleration model to time t (t >= last_update).
TrackState predict(const TrackState& s, double t, const TrackerConfig& cfg);

/// Predict to t, then apply the position measurement. Resets miss_count.
TrackState update(const TrackState& s, const Vec2& measurement, double t,
                  const TrackerConfig& cfg);

/// Gate a detection against the track: stale tracks demand a new one,
/// detections inside the time/distance gate (closed boundaries) are accepted,
/// the rest are rejected.
Association associate(const TrackState& s, const Vec2& detection, double t,
                      const TrackerConfig& cfg);

/// Single-object tracker wrapping the gate/update bookkeeping.
class Tracker {
  public:
    explicit Tracker(const TrackerConfig& cfg = {}) : cfg_(cfg) {}

    /// Feed one detection; returns the association decision applied.
    Association process(const Vec2& detection, double t);

    bool has_track() const { return state_.has_value(); }
    const TrackState& state() const { return *state_; }
    const TrackerConfig& config() const { return cfg_; }

  private:
    TrackerConfig cfg_;
    std::optional<TrackState> state_;
};

}  // namespace evd::track

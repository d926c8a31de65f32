#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "evd/tracking2d.hpp"

using namespace evd;

namespace {

bool is_psd(const track::Mat6& P, double tol = 1e-9) {
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > tol) return false;
    Eigen::SelfAdjointEigenSolver<track::Mat6> es(P);
    return es.eigenvalues().minCoeff() >= -tol;
}

}  // namespace

TEST_SUITE("tracking2d") {

TEST_CASE("predict kinematics") {
    track::TrackerConfig cfg;
    track::TrackState s = track::make_track({0, 0}, 0.0, cfg);

    SUBCASE("zero dt is a no-op") {
        const auto out = track::predict(s, 0.0, cfg);
        CHECK(out.x.isApprox(s.x));
        CHECK(out.P.isApprox(s.P));
    }

    SUBCASE("constant velocity") {
        s.x << 0, 0, 10, 0, 0, 0;
        const auto out = track::predict(s, 0.1, cfg);
        CHECK(out.position().x() == doctest::Approx(1.0));
        CHECK(out.position().y() == doctest::Approx(0.0));
    }

    SUBCASE("constant acceleration closed form") {
        s.x << 0, 0, 0, 0, 2, 0;
        const auto out = track::predict(s, 1.0, cfg);
        CHECK(out.position().x() == doctest::Approx(1.0));  // 0.5*a*dt^2
        CHECK(out.velocity().x() == doctest::Approx(2.0));  // a*dt
    }

    SUBCASE("past target time throws") {
        s.last_update = 1.0;
        CHECK_THROWS_AS(track::predict(s, 0.5, cfg), std::invalid_argument);
    }
}

TEST_CASE("update with measurement at prediction keeps the mean") {
    track::TrackerConfig cfg;
    track::TrackState s = track::make_track({10, 20}, 0.0, cfg);
    s.x << 10, 20, 1, -1, 0, 0;
    const auto pred = track::predict(s, 0.05, cfg);
    const auto out = track::update(s, pred.position(), 0.05, cfg);
    CHECK((out.x - pred.x).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(out.P.trace() < pred.P.trace());  // covariance shrinks
}

TEST_CASE("perfect measurement pins the position") {
    track::TrackerConfig cfg;
    cfg.meas_sigma = 0.0;
    track::TrackState s = track::make_track({0, 0}, 0.0, cfg);
    const auto out = track::update(s, {7.0, -3.0}, 0.03, cfg);
    CHECK(out.position().x() == doctest::Approx(7.0));
    CHECK(out.position().y() == doctest::Approx(-3.0));
}

TEST_CASE("noiseless filter reproduces a constant-acceleration track") {
    // Exact recovery after 3 position-only updates: the 6-state model is
    // observable from 3 distinct-time measurements with Q = R = 0.
    track::TrackerConfig cfg;
    cfg.jerk_psd = 0.0;
    cfg.meas_sigma = 0.0;
    cfg.gate.max_dt = 10.0;

    const track::Vec2 p0(5, 7), v0(30, -20), a0(40, 90);
    auto truth = [&](double t) -> track::Vec6 {
        track::Vec6 x;
        x << p0.x() + v0.x() * t + 0.5 * a0.x() * t * t,
            p0.y() + v0.y() * t + 0.5 * a0.y() * t * t, v0.x() + a0.x() * t,
            v0.y() + a0.y() * t, a0.x(), a0.y();
        return x;
    };

    track::TrackState s = track::make_track({truth(0)[0], truth(0)[1]}, 0.0, cfg);
    for (int k = 1; k <= 3; ++k) {
        const double t = 0.025 * k;
        s = track::update(s, {truth(t)[0], truth(t)[1]}, t, cfg);
    }
    CHECK((s.x - truth(0.075)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("noisy tracking accuracy over 50 steps") {
    track::TrackerConfig cfg;
    std::mt19937 rng(89);
    std::normal_distribution<double> noise(0.0, 1.0);

    double sum_sq = 0.0;
    double vel_err_sum = 0.0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        const track::Vec2 p0(100, 80), v0(120, -60), a0(60, 90);
        auto pos = [&](double t) {
            return track::Vec2(p0.x() + v0.x() * t + 0.5 * a0.x() * t * t,
                               p0.y() + v0.y() * t + 0.5 * a0.y() * t * t);
        };
        track::TrackState s = track::make_track(pos(0), 0.0, cfg);
        double t = 0.0;
        for (int k = 1; k < 50; ++k) {
            t = 0.025 * k;
            const track::Vec2 z =
                pos(t) + track::Vec2(noise(rng), noise(rng));
            s = track::update(s, z, t, cfg);
        }
        sum_sq += (s.position() - pos(t)).squaredNorm();
        const track::Vec2 v_true(v0.x() + a0.x() * t, v0.y() + a0.y() * t);
        vel_err_sum += (s.velocity() - v_true).norm() / v_true.norm();
    }
    CHECK(std::sqrt(sum_sq / trials) < 1.0);   // final position RMSE < 1 px
    CHECK(vel_err_sum / trials < 0.10);        // velocity within 10%
}

TEST_CASE("association gate") {
    track::TrackerConfig cfg;
    track::TrackState s = track::make_track({100, 100}, 0.0, cfg);

    // Stale track: new one.
    CHECK(track::associate(s, {100, 100}, 10.0, cfg) ==
          track::Association::new_track);
    // Close in time and space: accept.
    CHECK(track::associate(s, {101, 100}, 0.03, cfg) ==
          track::Association::accept);
    // Exactly on the distance boundary: accept (closed gate).
    CHECK(track::associate(s, {100.0 + cfg.gate.max_dist, 100.0}, 0.0, cfg) ==
          track::Association::accept);
    // Beyond the gate: reject.
    CHECK(track::associate(s, {100.0 + cfg.gate.max_dist + 0.001, 100.0}, 0.0,
                           cfg) == track::Association::reject);
}

TEST_CASE("tracker lifecycle") {
    track::Tracker tracker;
    CHECK(tracker.process({50, 50}, 0.0) == track::Association::new_track);
    CHECK(tracker.process({51, 50}, 0.025) == track::Association::accept);
    // Far detection: rejected until the miss limit spawns a new track.
    CHECK(tracker.process({300, 200}, 0.05) == track::Association::reject);
    CHECK(tracker.process({300, 200}, 0.05) == track::Association::reject);
    CHECK(tracker.process({300, 200}, 0.05) == track::Association::reject);
    CHECK(tracker.process({300, 200}, 0.05) == track::Association::new_track);
    CHECK(tracker.state().position().x() == doctest::Approx(300.0));
}

TEST_CASE("covariance stays symmetric PSD through random cycles") {
    track::TrackerConfig cfg;
    std::mt19937 rng(97);
    std::uniform_real_distribution<double> udt(0.001, 0.1);
    std::uniform_real_distribution<double> upos(-200.0, 200.0);

    track::TrackState s = track::make_track({0, 0}, 0.0, cfg);
    double t = 0.0;
    for (int i = 0; i < 1000; ++i) {
        t += udt(rng);
        if (i % 2 == 0) {
            s = track::predict(s, t, cfg);
        } else {
            s = track::update(s, {upos(rng), upos(rng)}, t, cfg);
        }
        CHECK(is_psd(s.P));
    }
}

}  // TEST_SUITE

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "evd/kernels.hpp"
#include "evd/pipeline.hpp"
#include "evd/time_image.hpp"

using namespace evd;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name)
        : path((fs::temp_directory_path() / name).string()) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

pipeline::RunConfig config_for_dataset(const std::string& dir,
                                       const sim::SceneConfig& scene) {
    pipeline::RunConfig cfg;
    cfg.events_path = dir + "/events.csv";
    cfg.imu_path = dir + "/imu.csv";
    cfg.poses_path = dir + "/poses.txt";
    cfg.velocity_path = dir + "/velocity.csv";
    cfg.depth_index_path = dir + "/depth/index.csv";
    cfg.depth_dir = dir + "/depth";
    cfg.ground_truth_path = dir + "/ground_truth.txt";
    cfg.output_dir = dir + "/out";
    cfg.event_K = scene.event_K;
    cfg.depth_K = scene.depth_K;
    cfg.T_E_D = scene.T_E_D;
    return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("median filter basics") {
    img::Grid g(3, 3, 0.0);
    g.at(1, 1) = 9.0;  // lone spike
    const auto out = pipeline::median_filter3(g);
    CHECK(out.at(1, 1) == 0.0);

    img::Grid flat(5, 5, 2.0);
    const auto out2 = pipeline::median_filter3(flat);
    for (const double v : out2.data) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("relative contrast formula") {
    img::Grid g(20, 20, 0.0);
    sim::GroundTruthBox box;
    box.cx = 5;
    box.cy = 5;
    box.w = 6;
    box.h = 6;
    box.visible = true;

    g.at(5, 5) = 1.0;    // inside the box
    g.at(15, 15) = 0.671;  // background
    CHECK(pipeline::relative_contrast(g, box) ==
          doctest::Approx((1.0 - 0.671) / 1.0));

    g.at(15, 15) = 1.0;  // equal maxima
    CHECK(pipeline::relative_contrast(g, box) == doctest::Approx(0.0));

    g.at(15, 15) = 1.25;  // background exceeds the object
    CHECK(pipeline::relative_contrast(g, box) < 0.0);

    box.cx = 100;  // box outside the image
    CHECK_THROWS_AS(pipeline::relative_contrast(g, box),
                    pipeline::MetricError);
}

TEST_CASE("ape statistics") {
    traj::BallisticTrajectory truth;
    truth.p0 = {1, 2, 3};
    truth.v0 = {4, 5, 6};
    truth.t0 = 0.0;

    SUBCASE("estimate equals truth") {
        const auto s = pipeline::ape(truth, truth, 0.0, 0.5);
        CHECK(s.mean == doctest::Approx(0.0));
        CHECK(s.rmse == doctest::Approx(0.0));
        CHECK(s.max == doctest::Approx(0.0));
    }

    SUBCASE("constant offset") {
        traj::BallisticTrajectory est = truth;
        est.p0.x() += 0.1;
        const auto s = pipeline::ape(est, truth, 0.0, 0.5);
        CHECK(s.mean == doctest::Approx(0.1));
        CHECK(s.min == doctest::Approx(0.1));
        CHECK(s.max == doctest::Approx(0.1));
        CHECK(s.rmse == doctest::Approx(0.1));
    }

    SUBCASE("matches brute-force evaluation") {
        traj::BallisticTrajectory est = truth;
        est.p0 += geom::Vec3(0.05, -0.02, 0.01);
        est.v0 += geom::Vec3(-0.1, 0.2, 0.05);
        const double t0 = 0.1, t1 = 0.45, dt = 0.01;
        const auto s = pipeline::ape(est, truth, t0, t1, dt);
        double sum = 0, sum_sq = 0, mn = 1e18, mx = -1e18;
        std::size_t n = 0;
        for (long k = 0; k <= static_cast<long>(std::floor((t1 - t0) / dt));
             ++k) {
            const double t = t0 + k * dt;
            const double e = (traj::ballistic_position(est, t) -
                              traj::ballistic_position(truth, t))
                                 .norm();
            sum += e;
            sum_sq += e * e;
            mn = std::min(mn, e);
            mx = std::max(mx, e);
            ++n;
        }
        CHECK(s.samples == n);
        CHECK(s.mean == doctest::Approx(sum / n));
        CHECK(s.rmse == doctest::Approx(std::sqrt(sum_sq / n)));
        CHECK(s.min == doctest::Approx(mn));
        CHECK(s.max == doctest::Approx(mx));
    }

    SUBCASE("disjoint interval throws") {
        CHECK_THROWS_AS(pipeline::ape(truth, truth, 1.0, 0.5),
                        pipeline::MetricError);
    }
}

TEST_CASE("config parsing") {
    const std::string text =
        "[dataset]\n"
        "events = events.csv\n"
        "poses = poses.txt\n"
        "[event_camera]\n"
        "fx = 230\nfy = 230\ncx = 173\ncy = 130\nwidth = 346\nheight = 260\n"
        "[pipeline]\n"
        "window = 0.02\n"
        "compensation = rotation\n"
        "estimator = mono\n"
        "[threshold]\n"
        "a = 0.1\n";
    const auto kv = cfg::KeyValues::parse(text, "test.cfg");
    const auto rc = pipeline::RunConfig::from_config(kv, "/data");
    CHECK(rc.events_path == "/data/events.csv");
    CHECK(rc.window == doctest::Approx(0.02));
    CHECK(rc.compensation == mc::Mode::rotation);
    CHECK(rc.estimator == pipeline::EstimatorMode::mono);
    CHECK(rc.threshold.a == doctest::Approx(0.1));
    CHECK(rc.threshold.b == doctest::Approx(0.01));  // default

    CHECK_THROWS_AS(pipeline::RunConfig::from_config(
                        cfg::KeyValues::parse("", "empty.cfg"), "."),
                    cfg::ConfigError);
}

TEST_CASE("scene config parsing") {
    const std::string text =
        "[scene]\n"
        "motion = yaw\n"
        "yaw_rate = 2.5\n"
        "duration = 0.5\n"
        "ball_enabled = false\n"
        "seed = 9\n";
    const auto scene =
        pipeline::scene_from_config(cfg::KeyValues::parse(text, "scene.cfg"));
    CHECK(scene.motion == sim::CameraMotion::yaw);
    CHECK(scene.yaw_rate == doctest::Approx(2.5));
    CHECK(scene.duration == doctest::Approx(0.5));
    CHECK(!scene.ball_enabled);
    CHECK(scene.seed == 9);
}

TEST_CASE("full pipeline on a forward scene") {
    TempDir dir("evd_pipeline_full");
    sim::SceneConfig scene;
    scene.duration = 0.7;
    scene.wall_density = 6.0;
    scene.ball_t0 = 0.15;
    scene.seed = 5;
    const auto ds = sim::generate(scene);
    sim::write_dataset(ds, dir.path);

    auto cfg = config_for_dataset(dir.path, scene);
    const auto report = pipeline::run(cfg);

    CHECK(report.windows > 20);
    CHECK(report.events_in == ds.events.events.size());
    CHECK(report.detections > 5);
    CHECK(report.event_observations >= 3);
    CHECK(report.depth_accepted >= 1);
    REQUIRE(report.has_trajectory);
    REQUIRE(report.ape.has_value());
    CHECK(report.ape->rmse < 0.5);
    REQUIRE(report.detection_rate.has_value());
    CHECK(*report.detection_rate > 0.5);

    CHECK(fs::exists(cfg.output_dir + "/metrics.txt"));
    CHECK(fs::exists(cfg.output_dir + "/detections.csv"));
    CHECK(fs::exists(cfg.output_dir + "/track.csv"));
    CHECK(fs::exists(cfg.output_dir + "/trajectory.txt"));
    CHECK(fs::exists(cfg.output_dir + "/trajectory_samples.csv"));
    CHECK(fs::exists(cfg.output_dir + "/timing.txt"));
}

TEST_CASE("compensation separates the object's temporal distribution") {
    // The detection premise: compensation collapses each background point's
    // events onto one pixel (whose mean time settles near mid-window), while
    // the un-compensatable object leaves a trail of fresh pixels, so the
    // extreme mean timestamps of the window belong to the object region
    // and its per-pixel bursts stay short.
    sim::SceneConfig scene;
    scene.duration = 0.5;
    scene.wall_density = 12.0;
    scene.forward_speed = 5.0;
    scene.ball_t0 = 0.1;
    scene.seed = 11;
    const auto ds = sim::generate(scene);

    const auto windows = events::window_stream(ds.events.events, 0.025);
    std::size_t windows_checked = 0, contrast_positive = 0;
    double obj_spread_sum = 0.0, bg_spread_sum = 0.0;
    std::size_t obj_n = 0, bg_n = 0;
    for (const auto& buf : windows) {
        const sim::GroundTruthBox* box = nullptr;
        for (const auto& b : ds.truth.boxes)
            if (std::abs(b.t0 - buf.t0) < 0.0125 && b.visible &&
                b.object_events > 100) {
                box = &b;
                break;
            }
        if (!box) continue;

        const geom::Vec3 vel = sim::camera_velocity(scene, buf.t0);
        const auto table = mc::build_warp_table(geom::Vec3::Zero(), vel, 0.025);
        const geom::Pose pose = sim::camera_pose(scene, buf.t0);

        const depth::DepthFrame* frame = nullptr;
        for (const auto& f : ds.depth_frames)
            if (f.t <= buf.t0) frame = &f;
        if (!frame) continue;
        const auto registered = depth::register_depth(
            *frame, scene.event_K, sim::camera_pose(scene, frame->t));

        const auto warped =
            mc::compensate(buf, mc::Mode::rotation_translation, table,
                           scene.event_K, pose, registered);
        const auto grid = events::group_by_pixel(warped, scene.event_K.width,
                                                 scene.event_K.height);

        for (int y = 0; y < grid.height; ++y)
            for (int x = 0; x < grid.width; ++x) {
                const std::size_t i = grid.idx(x, y);
                if (grid.count[i] < 2) continue;
                const double spread = grid.time_max[i] - grid.time_min[i];
                const bool inside = std::abs(x - box->cx) <= box->w / 2.0 &&
                                    std::abs(y - box->cy) <= box->h / 2.0;
                if (inside) {
                    obj_spread_sum += spread;
                    ++obj_n;
                } else {
                    bg_spread_sum += spread;
                    ++bg_n;
                }
            }

        // Isolated late background singles tie the raw maximum, so the
        // freshness comparison runs on the denoised image, as the relative
        // contrast metric does.
        const auto N = ti::normalize(
            ti::build_mean_time_image(grid, buf.t0, buf.dt));
        ++windows_checked;
        try {
            if (pipeline::relative_contrast(
                    pipeline::contrast_denoise(N, grid), *box) > 0.0)
                ++contrast_positive;
        } catch (const pipeline::MetricError&) {
        }
    }
    REQUIRE(windows_checked >= 5);
    // The freshest denoised pixels of (nearly) every object window are the
    // object's.
    CHECK(static_cast<double>(contrast_positive) / windows_checked >= 0.9);
    // Collapsed background pixels integrate the whole window; object pixels
    // hold short bursts of the sweep.
    REQUIRE(obj_n > 10);
    REQUIRE(bg_n > 10);
    CHECK(obj_spread_sum / obj_n < bg_spread_sum / bg_n);
}

TEST_CASE("scalar and avx2 kernel runs are byte-identical") {
    if (!kernels::backend_available(kernels::Backend::avx2)) {
        MESSAGE("avx2 unavailable on this host, skipping");
        return;
    }
    TempDir dir("evd_pipeline_backends");
    sim::SceneConfig scene;
    scene.duration = 0.4;
    scene.wall_density = 6.0;
    scene.ball_t0 = 0.1;
    scene.seed = 33;
    const auto ds = sim::generate(scene);
    sim::write_dataset(ds, dir.path);

    auto cfg = config_for_dataset(dir.path, scene);
    cfg.kernel_backend = "scalar";
    cfg.output_dir = dir.path + "/out_scalar";
    pipeline::run(cfg);
    cfg.kernel_backend = "avx2";
    cfg.output_dir = dir.path + "/out_avx2";
    pipeline::run(cfg);
    kernels::force_backend(std::nullopt);

    for (const char* name : {"metrics.txt", "detections.csv", "track.csv",
                             "observations.csv", "trajectory.txt"}) {
        std::ifstream a(dir.path + "/out_scalar/" + name, std::ios::binary);
        std::ifstream b(dir.path + "/out_avx2/" + name, std::ios::binary);
        std::ostringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        REQUIRE(!sa.str().empty());
        CHECK(sa.str() == sb.str());
    }
}

TEST_CASE("empty event file yields an empty report") {
    TempDir dir("evd_pipeline_empty");
    {
        std::ofstream out(dir.path + "/events.csv");
        out << "# width=346 height=260\n";
        std::ofstream imu(dir.path + "/imu.csv");
        imu << "0.0,0,0,0,0,0,9.81\n";
        geom::PoseTrack track;
        track.push_back({0.0, geom::Pose::identity()});
        track.push_back({1.0, geom::Pose::identity()});
        geom::save_pose_file(dir.path + "/poses.txt", track);
    }
    pipeline::RunConfig cfg;
    cfg.events_path = dir.path + "/events.csv";
    cfg.imu_path = dir.path + "/imu.csv";
    cfg.poses_path = dir.path + "/poses.txt";
    cfg.output_dir = dir.path + "/out";
    cfg.event_K = sim::SceneConfig{}.event_K;
    const auto report = pipeline::run(cfg);
    CHECK(report.windows == 0);
    CHECK(report.detections == 0);
    CHECK(!report.has_trajectory);
    CHECK(fs::exists(cfg.output_dir + "/metrics.txt"));
}

TEST_CASE("malformed dataset reports file context") {
    TempDir dir("evd_pipeline_bad");
    {
        std::ofstream out(dir.path + "/events.csv");
        out << "# width=346 height=260\nnot,an,event\n";
    }
    pipeline::RunConfig cfg;
    cfg.events_path = dir.path + "/events.csv";
    cfg.poses_path = dir.path + "/poses.txt";
    cfg.output_dir = dir.path + "/out";
    CHECK_THROWS_AS(pipeline::run(cfg), pipeline::DatasetError);
}

}  // TEST_SUITE

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "evd/config.hpp"
#include "evd/kernels.hpp"
#include "evd/pipeline.hpp"
#include "evd/simulator.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 config error, 2 dataset error, 3 pipeline failure.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDatasetError = 2;
constexpr int kPipelineError = 3;

void write_run_config(const std::string& dir, const evd::sim::SceneConfig& s) {
    std::ofstream out(dir + "/run.cfg");
    const auto q = s.T_E_D.quaternion();
    char buf[256];
    out << "[dataset]\n"
           "events = events.csv\n"
           "imu = imu.csv\n"
           "poses = poses.txt\n"
           "velocity = velocity.csv\n"
           "depth_index = depth/index.csv\n"
           "depth_dir = depth\n"
           "ground_truth = ground_truth.txt\n"
           "event_truth = event_truth.csv\n\n";
    out << "[event_camera]\n";
    std::snprintf(buf, sizeof(buf),
                  "fx = %.6f\nfy = %.6f\ncx = %.6f\ncy = %.6f\nwidth = %d\n"
                  "height = %d\n\n",
                  s.event_K.fx, s.event_K.fy, s.event_K.cx, s.event_K.cy,
                  s.event_K.width, s.event_K.height);
    out << buf;
    out << "[depth_camera]\n";
    std::snprintf(buf, sizeof(buf),
                  "fx = %.6f\nfy = %.6f\ncx = %.6f\ncy = %.6f\nwidth = %d\n"
                  "height = %d\n",
                  s.depth_K.fx, s.depth_K.fy, s.depth_K.cx, s.depth_K.cy,
                  s.depth_K.width, s.depth_K.height);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "extrinsic = %.9f %.9f %.9f %.9f %.6f %.6f %.6f\n\n", q.w(),
                  q.x(), q.y(), q.z(), s.T_E_D.translation.x(),
                  s.T_E_D.translation.y(), s.T_E_D.translation.z());
    out << buf;
    out << "[pipeline]\n"
           "window = 0.025\n"
           "compensation = rotation+translation\n"
           "estimator = fusion\n"
           "velocity_source = file\n"
           "kernel = auto\n"
           "output_dir = out\n";
}

std::map<std::string, std::string> load_metrics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

int cmd_simulate(const std::string& scene_path, const std::string& out_dir) {
    evd::sim::SceneConfig scene;
    try {
        const auto kv = evd::cfg::KeyValues::load(scene_path);
        scene = evd::pipeline::scene_from_config(kv);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        const evd::sim::Dataset ds = evd::sim::generate(scene);
        evd::sim::write_dataset(ds, out_dir);
        write_run_config(out_dir, scene);
        std::cout << "dataset: " << out_dir << "\n"
                  << "events: " << ds.events.events.size() << "\n"
                  << "depth frames: " << ds.depth_frames.size() << "\n";
        for (const auto& w : ds.warnings) std::cout << "warning: " << w << "\n";
    } catch (const std::exception& e) {
        std::cerr << "simulation failed: " << e.what() << "\n";
        return kPipelineError;
    }
    return kOk;
}

int cmd_run(const std::string& run_path) {
    evd::pipeline::RunConfig cfg;
    try {
        const auto kv = evd::cfg::KeyValues::load(run_path);
        cfg = evd::pipeline::RunConfig::from_config(
            kv, fs::path(run_path).parent_path().string());
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        const auto report = evd::pipeline::run(cfg);
        std::cout << evd::pipeline::format_metrics(report);
        std::cout << evd::pipeline::format_timing(report);
        std::cout << "output: " << cfg.output_dir << "\n";
    } catch (const evd::pipeline::DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kDatasetError;
    } catch (const evd::cfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "pipeline failure: " << e.what() << "\n";
        return kPipelineError;
    }
    return kOk;
}

int cmd_metrics(const std::string& run_dir) {
    try {
        std::ifstream in(run_dir + "/metrics.txt");
        if (!in) throw std::runtime_error("no metrics.txt in " + run_dir);
        std::cout << in.rdbuf();
        std::ifstream timing(run_dir + "/timing.txt");
        if (timing) std::cout << timing.rdbuf();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDatasetError;
    }
    return kOk;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
    try {
        const auto a = load_metrics_file(dir_a + "/metrics.txt");
        const auto b = load_metrics_file(dir_b + "/metrics.txt");
        std::printf("%-28s %18s %18s\n", "metric", dir_a.c_str(), dir_b.c_str());
        for (const auto& [key, va] : a) {
            const auto it = b.find(key);
            if (it == b.end()) continue;
            std::printf("%-28s %18s %18s\n", key.c_str(), va.c_str(),
                        it->second.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDatasetError;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Event-camera perception pipeline: ego-motion compensation, "
        "fast-moving object detection, and ballistic trajectory estimation"};
    app.require_subcommand(1);

    std::string scene_path, sim_out = "dataset";
    auto* simulate = app.add_subcommand(
        "simulate", "Generate a synthetic dataset from a scene config");
    simulate->add_option("scene", scene_path, "Scene config file")->required();
    simulate->add_option("-o,--out", sim_out, "Output dataset directory");

    std::string run_path;
    auto* run = app.add_subcommand("run", "Run the pipeline on a dataset");
    run->add_option("config", run_path, "Run config file")->required();

    std::string metrics_dir;
    auto* metrics =
        app.add_subcommand("metrics", "Print the metrics of a finished run");
    metrics->add_option("run_dir", metrics_dir, "Run output directory")
        ->required();

    std::string cmp_a, cmp_b;
    auto* compare = app.add_subcommand("compare", "Compare two run reports");
    compare->add_option("run_dir_a", cmp_a)->required();
    compare->add_option("run_dir_b", cmp_b)->required();

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) return cmd_simulate(scene_path, sim_out);
    if (run->parsed()) return cmd_run(run_path);
    if (metrics->parsed()) return cmd_metrics(metrics_dir);
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b);
    return kOk;
}

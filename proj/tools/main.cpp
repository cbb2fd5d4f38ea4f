// rgbd_odom: command-line front end for the odometry pipeline.
//
//   rgbd_odom odom  <manifest> [--config f] [--out f] [--timings] [parameter flags]
//   rgbd_odom eval  <estimates> <groundtruth> [--multiplier 9] [--out-dir d]
//   rgbd_odom synth <config.json> <outdir>
//   rgbd_odom bench <manifest> [--config f] [--repeat n] [parameter flags]
//
// Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgbd/error.hpp"
#include "rgbd/evaluation.hpp"
#include "rgbd/io.hpp"
#include "rgbd/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace rgbd;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct ParamFlags {
    std::string config;
    std::optional<double> ratio;
    std::optional<double> inlier;
    std::optional<int> ransac_iters;
    std::optional<int> perturbations;
    std::optional<double> multiplier;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_features;
    bool serial = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON configuration file");
        app->add_option("--ratio", ratio, "descriptor ratio-test threshold, in (0,1)");
        app->add_option("--inlier", inlier, "RANSAC inlier distance (m)");
        app->add_option("--ransac-iters", ransac_iters, "RANSAC iterations");
        app->add_option("--perturbations", perturbations, "covariance perturbation trials");
        app->add_option("--multiplier", multiplier, "covariance multiplier");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--max-features", max_features, "feature cap per frame");
        app->add_flag("--serial", serial, "use the single-threaded reference kernels");
    }

    // defaults < config file < flags
    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config.empty()) {
            std::ifstream in(config);
            if (!in) throw Error(ErrorCode::MissingFile, "cannot open config '" + config + "'");
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw Error(ErrorCode::InvalidConfig, config + ": " + e.what());
            }
            apply_config_json(j, cfg);
        }
        if (ratio) cfg.match.lambda_ratio = *ratio;
        if (inlier) cfg.ransac.lambda_inlier = *inlier;
        if (ransac_iters) cfg.ransac.max_iterations = *ransac_iters;
        if (perturbations) cfg.perturbations = *perturbations;
        if (multiplier) cfg.multiplier = *multiplier;
        if (seed) cfg.seed = *seed;
        if (max_features) cfg.detector.max_features = *max_features;
        if (serial) cfg.set_exec(Exec::serial);
        cfg.validate();
        return cfg;
    }
};

SequenceResult run_dataset(const Dataset& d, const PipelineConfig& cfg) {
    const FeatureSource source = [&](std::size_t i) {
        try {
            return read_frame_features(d, i, cfg);
        } catch (const Error& e) {
            throw Error(ErrorCode::DatasetError, e.what());
        }
    };
    return run_sequence(d.entries.size(), source, d.intrinsics, cfg);
}

int cmd_odom(const std::string& manifest, const ParamFlags& flags, const std::string& out_path, bool timings) {
    const PipelineConfig cfg = flags.resolve();
    const Dataset d = load_dataset(manifest);
    if (d.entries.size() < 2) throw Error(ErrorCode::DatasetError, "dataset needs at least 2 frames");
    const SequenceResult r = run_dataset(d, cfg);
    json header = config_to_json(cfg);
    header["dataset"] = manifest;
    header["intrinsics"] = intrinsics_to_json(d.intrinsics);
    if (out_path.empty()) {
        write_estimates(std::cout, r, header, timings);
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error(ErrorCode::IoError, "cannot write '" + out_path + "'");
        write_estimates(out, r, header, timings);
    }
    for (const GapRecord& g : r.gaps) std::cerr << "gap at frame " << g.frame << ": " << g.reason << '\n';
    return 0;
}

void write_csv_row(std::ostream& out, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << format_number(v[i]);
    out << '\n';
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, double multiplier, const std::string& out_dir) {
    if (!(multiplier > 0.0)) throw Error(ErrorCode::InvalidConfig, "multiplier must be positive");
    const auto estimates = read_estimates(est_path);
    const Trajectory gt = read_tum(gt_path);
    if (estimates.empty()) throw Error(ErrorCode::DatasetError, "no estimates in '" + est_path + "'");

    const TwistErrors te = twist_errors(estimates, gt);
    const CoverageReport cov = coverage(te.errors, te.covariances, multiplier);

    // Integrate from the ground-truth pose at the first estimate's start.
    const double period = gt.size() > 1 ? gt.poses[1].timestamp - gt.poses[0].timestamp : 0.0;
    const std::size_t j0 = associate(gt, estimates.front().t_a, 0.5 * period + 1e-9);
    if (j0 == static_cast<std::size_t>(-1)) throw Error(ErrorCode::TimestampMismatch, "first estimate has no ground truth");
    const Trajectory traj = integrate_trajectory(estimates, gt.poses[j0].pose, estimates.front().t_a);
    const ComparisonResult cmp = compare(traj, gt);

    json report = coverage_to_json(cov);
    report["config"] = {{"estimates", est_path}, {"groundtruth", gt_path}, {"multiplier", multiplier}};
    report["failed"] = std::count_if(estimates.begin(), estimates.end(), [](const auto& e) { return !e.ok(); });
    report["final_position_error"] = cmp.position_error.empty() ? 0.0 : cmp.position_error.back().norm();

    if (out_dir.empty()) {
        std::cout << report.dump(2) << '\n';
        return 0;
    }
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    {
        std::ofstream out(dir / "coverage.json");
        out << report.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "twist_errors.csv");
        out << "# multiplier " << format_number(multiplier) << '\n';
        out << "frame_a,e_tx,e_ty,e_tz,e_wx,e_wy,e_wz,s_tx,s_ty,s_tz,s_wx,s_wy,s_wz,nees\n";
        for (std::size_t i = 0; i < te.errors.size(); ++i) {
            std::vector<double> row{static_cast<double>(te.frames[i])};
            for (int a = 0; a < 6; ++a) row.push_back(te.errors[i][a]);
            for (int a = 0; a < 6; ++a) row.push_back(std::sqrt(std::max(0.0, te.covariances[i](a, a))));
            row.push_back(nees(te.errors[i], te.covariances[i]));
            write_csv_row(out, row);
        }
    }
    {
        std::ofstream out(dir / "pose_errors.csv");
        out << "timestamp,e_x,e_y,e_z,e_rx,e_ry,e_rz\n";
        for (std::size_t i = 0; i < cmp.timestamps.size(); ++i) {
            write_csv_row(out, {cmp.timestamps[i], cmp.position_error[i].x(), cmp.position_error[i].y(),
                                cmp.position_error[i].z(), cmp.orientation_error[i].x(),
                                cmp.orientation_error[i].y(), cmp.orientation_error[i].z()});
        }
    }
    write_tum(traj, dir / "trajectory.txt");
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + config_path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, config_path + ": " + e.what());
    }
    const SynthConfig cfg = synth_config_from_json(j);
    const CameraIntrinsics k = j.contains("intrinsics")
                                   ? intrinsics_from_json(j["intrinsics"], fs::path(config_path).parent_path())
                                   : CameraIntrinsics::standard();
    const SynthScene scene = synth_scene(cfg, k);
    write_synth_dataset(scene, cfg, out_dir);
    std::cout << "wrote " << cfg.frames << " frames to " << out_dir << '\n';
    return 0;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

int cmd_bench(const std::string& manifest, const ParamFlags& flags, int repeat) {
    const PipelineConfig cfg = flags.resolve();
    const Dataset d = load_dataset(manifest);
    if (d.entries.size() < 2) throw Error(ErrorCode::DatasetError, "dataset needs at least 2 frames");
    std::vector<StageTimings> samples;
    for (int r = 0; r < std::max(1, repeat); ++r) {
        for (std::size_t i = 0; i + 1 < d.entries.size(); ++i) {
            OdometryEstimate e;
            if (d.feature_mode()) {
                const FrameFeatures a = read_frame_features(d, i, cfg);
                const FrameFeatures b = read_frame_features(d, i + 1, cfg);
                e = process_feature_pair(a.features, b.features, a.timestamp, b.timestamp, d.intrinsics, cfg);
            } else {
                e = process_frame_pair(read_frame(d, i), read_frame(d, i + 1), d.intrinsics, cfg);
            }
            samples.push_back(e.timings);
        }
    }
    auto stage = [&](double StageTimings::*field) {
        std::vector<double> v;
        for (const auto& s : samples) v.push_back(s.*field);
        return json{{"p50", percentile(v, 0.5)}, {"p90", percentile(v, 0.9)}, {"p99", percentile(v, 0.99)},
                    {"max", percentile(v, 1.0)}};
    };
    json report{{"pairs", samples.size()},
                {"threads", max_threads()},
                {"detect", stage(&StageTimings::detect_ms)},
                {"describe", stage(&StageTimings::describe_ms)},
                {"match", stage(&StageTimings::match_ms)},
                {"reconstruct", stage(&StageTimings::reconstruct_ms)},
                {"ransac", stage(&StageTimings::ransac_ms)},
                {"covariance", stage(&StageTimings::covariance_ms)},
                {"total", stage(&StageTimings::total_ms)}};
    std::cout << report.dump(2) << '\n';
    return 0;
}

bool is_usage_error(ErrorCode c) { return c == ErrorCode::InvalidConfig; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frame-to-frame RGBD odometry with per-estimate covariance"};
    app.require_subcommand(1);

    ParamFlags odom_flags;
    std::string odom_manifest;
    std::string odom_out;
    bool odom_timings = false;
    auto* odom = app.add_subcommand("odom", "estimate frame-to-frame motion for a dataset");
    odom->add_option("dataset", odom_manifest, "dataset manifest")->required();
    odom->add_option("--out", odom_out, "output JSON-lines file (default stdout)");
    odom->add_flag("--timings", odom_timings, "include per-stage wall times (output is then not reproducible)");
    odom_flags.attach(odom);

    std::string eval_est;
    std::string eval_gt;
    std::string eval_dir;
    double eval_mult = 9.0;
    auto* eval = app.add_subcommand("eval", "compare estimates with ground truth");
    eval->add_option("estimates", eval_est, "estimate stream from odom")->required();
    eval->add_option("groundtruth", eval_gt, "ground-truth trajectory (TUM format)")->required();
    eval->add_option("--multiplier", eval_mult, "covariance multiplier")->capture_default_str();
    eval->add_option("--out-dir", eval_dir, "directory for coverage.json and error CSVs");

    std::string synth_cfg;
    std::string synth_dir;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    synth->add_option("config", synth_cfg, "synthetic scene JSON")->required();
    synth->add_option("outdir", synth_dir, "output directory")->required();

    ParamFlags bench_flags;
    std::string bench_manifest;
    int bench_repeat = 1;
    auto* bench = app.add_subcommand("bench", "per-stage timing percentiles over a dataset");
    bench->add_option("dataset", bench_manifest, "dataset manifest")->required();
    bench->add_option("--repeat", bench_repeat, "passes over the dataset")->capture_default_str();
    bench_flags.attach(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (odom->parsed()) return cmd_odom(odom_manifest, odom_flags, odom_out, odom_timings);
        if (eval->parsed()) return cmd_eval(eval_est, eval_gt, eval_mult, eval_dir);
        if (synth->parsed()) return cmd_synth(synth_cfg, synth_dir);
        if (bench->parsed()) return cmd_bench(bench_manifest, bench_flags, bench_repeat);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_usage_error(e.code()) ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

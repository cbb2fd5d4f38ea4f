#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbd/camera.hpp"
#include "rgbd/evaluation.hpp"
#include "rgbd/pipeline.hpp"

namespace rgbd {

namespace fs = std::filesystem;

// Rasters. PGM (P5, 8 or 16 bit) and PNG (8-bit gray/RGB, 16-bit gray).
GrayImage read_gray(const fs::path& path);
Image<std::uint16_t> read_gray16(const fs::path& path);
/// 16-bit millimetre raster -> meters; 0 becomes invalid (0.0f).
DepthImage read_depth_mm(const fs::path& path);
void write_pgm(const GrayImage& img, const fs::path& path);
void write_pgm16(const Image<std::uint16_t>& img, const fs::path& path);
void write_png16(const Image<std::uint16_t>& img, const fs::path& path);
Image<std::uint16_t> depth_to_mm(const DepthImage& depth);

// Intrinsics JSON.
CameraIntrinsics load_intrinsics(const fs::path& path);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j, const fs::path& base = {});
nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
/// Text table: "shift <width> <height>" then width*height rows "dx dy".
PixelShift load_shift_table(const fs::path& path);

// Pipeline configuration JSON; unknown keys are rejected.
void apply_config_json(const nlohmann::json& j, PipelineConfig& cfg);
nlohmann::json config_to_json(const PipelineConfig& cfg);

struct DatasetEntry {
    double timestamp = 0.0;
    fs::path intensity;  // empty in feature mode
    fs::path depth;
    fs::path features;   // empty in raster mode
};

struct Dataset {
    fs::path root;
    fs::path intrinsics_path;
    CameraIntrinsics intrinsics;
    std::vector<DatasetEntry> entries;
    std::optional<fs::path> groundtruth;

    bool feature_mode() const { return !entries.empty() && !entries.front().features.empty(); }
};

/// Manifest: "intrinsics <path>", optional "groundtruth <path>", then
/// "timestamp intensity depth" or "timestamp features" lines; '#' comments.
/// Throws ManifestError, MissingFile.
Dataset load_dataset(const fs::path& manifest);
void write_manifest(const Dataset& d, const fs::path& manifest);

/// Throws BadRasterFormat / ParseError / MissingFile naming the file.
RgbdFrame read_frame(const Dataset& d, std::size_t i);
FrameFeatures read_frame_features(const Dataset& d, std::size_t i, const PipelineConfig& cfg);

// Estimate stream: first line {"config": ...}, then one object per estimate
// or {"gap": {...}} per skipped frame.
nlohmann::json estimate_to_json(const OdometryEstimate& e, bool with_timings);
OdometryEstimate estimate_from_json(const nlohmann::json& j);
void write_estimates(std::ostream& out, const SequenceResult& r, const nlohmann::json& header,
                     bool with_timings);
std::vector<OdometryEstimate> read_estimates(const fs::path& path);

// TUM trajectory "timestamp tx ty tz qx qy qz qw".
Trajectory read_tum(const fs::path& path);
void write_tum(const Trajectory& t, const fs::path& path);

nlohmann::json coverage_to_json(const CoverageReport& r);

SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Writes intrinsics.json, groundtruth.txt, per-frame files and manifest.txt.
void write_synth_dataset(const SynthScene& scene, const SynthConfig& cfg, const fs::path& dir);

/// Shortest round-trip formatting used for every text output.
std::string format_number(double v);

}  // namespace rgbd

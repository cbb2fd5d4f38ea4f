#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rgbd/alignment.hpp"
#include "rgbd/covariance.hpp"
#include "rgbd/features.hpp"
#include "rgbd/matching.hpp"

namespace rgbd {

struct PipelineConfig {
    DetectorConfig detector;
    MatchConfig match;
    RansacConfig ransac;
    int perturbations = 100;
    double multiplier = 9.0;
    std::optional<int> border_margin;  // overrides the intrinsics value
    std::uint64_t seed = 0x5eed;
    Exec exec = Exec::parallel;

    /// Throws Error(InvalidConfig).
    void validate() const;
    /// Applies `exec` to every sub-config.
    void set_exec(Exec e);
};

enum class FailureReason { none, too_few_features, too_few_matches, no_consensus, unstable_geometry };

std::string_view to_string(FailureReason r);

struct StageTimings {
    double detect_ms = 0.0;
    double describe_ms = 0.0;
    double match_ms = 0.0;
    double reconstruct_ms = 0.0;
    double ransac_ms = 0.0;
    double covariance_ms = 0.0;
    double total_ms = 0.0;

    double stage_sum() const {
        return detect_ms + describe_ms + match_ms + reconstruct_ms + ransac_ms + covariance_ms;
    }
};

struct OdometryEstimate {
    long frame_a = 0;
    long frame_b = 0;
    double t_a = 0.0;
    double t_b = 0.0;
    FailureReason failure = FailureReason::none;
    std::optional<PoseTwist> twist;  // pose of camera b in camera a's frame
    Mat6 sigma_hat = Mat6::Zero();
    Mat6 sigma_scaled = Mat6::Zero();
    std::size_t features_a = 0;
    std::size_t features_b = 0;
    std::size_t matches = 0;
    std::size_t inliers = 0;
    double inlier_threshold = 0.0;
    StageTimings timings;

    bool ok() const { return failure == FailureReason::none; }
};

/// Detect, describe, match, reconstruct, RANSAC, covariance. Never throws on
/// data-dependent failure; the estimate carries the reason instead.
OdometryEstimate process_frame_pair(const RgbdFrame& a, const RgbdFrame& b, const CameraIntrinsics& k,
                                    const PipelineConfig& cfg = {});

/// Same as process_frame_pair for precomputed features (depth carried per keypoint).
OdometryEstimate process_feature_pair(const FeatureSet& a, const FeatureSet& b, double t_a, double t_b,
                                      const CameraIntrinsics& k, const PipelineConfig& cfg = {});

/// Back-projects the matched keypoints of both sets with their noise sigmas.
/// Pairs with a depth out of range on either side are skipped.
CorrespondenceSet reconstruct_matches(const FeatureSet& a, const FeatureSet& b,
                                      const std::vector<Match>& matches, const CameraIntrinsics& k);

/// Either an RGBD frame or a feature set, as delivered by a frame source.
struct FrameFeatures {
    long index = 0;
    double timestamp = 0.0;
    FeatureSet features;
    double detect_ms = 0.0;    // zero for precomputed features
    double describe_ms = 0.0;
};

struct GapRecord {
    long frame = 0;
    std::string reason;
};

struct SequenceResult {
    std::vector<OdometryEstimate> estimates;
    std::vector<GapRecord> gaps;
};

/// Yields frame i's features or throws Error(DatasetError) for unreadable frames.
using FeatureSource = std::function<FrameFeatures(std::size_t)>;

/// One estimate per consecutive pair of readable frames. Unreadable frames
/// become gap records and the chain continues with the next readable one.
SequenceResult run_sequence(std::size_t frame_count, const FeatureSource& source,
                            const CameraIntrinsics& k, const PipelineConfig& cfg = {});

/// Feature extraction for one RGBD frame with per-stage timing.
FeatureSet extract_features(const RgbdFrame& frame, const CameraIntrinsics& k, const PipelineConfig& cfg,
                            double* detect_ms = nullptr, double* describe_ms = nullptr);

}  // namespace rgbd

#include "rgbd/pipeline.hpp"

#include <chrono>
#include <optional>
#include <sstream>

#include "rgbd/error.hpp"
#include "rgbd/random.hpp"

namespace rgbd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

CameraIntrinsics effective_intrinsics(const CameraIntrinsics& k, const PipelineConfig& cfg) {
    CameraIntrinsics out = k;
    if (cfg.border_margin) out.border_margin = *cfg.border_margin;
    return out;
}

/// Per-pair seeds depend only on the configured seed and the first frame index,
/// so a pair gives the same answer in a sequence or on its own.
std::pair<std::uint64_t, std::uint64_t> pair_seeds(std::uint64_t seed, long frame_a) {
    Rng rng(seed, static_cast<std::uint64_t>(frame_a));
    const std::uint64_t ransac = rng.next();
    return {ransac, rng.next()};
}

void run_geometry(const FeatureSet& a, const FeatureSet& b, const CameraIntrinsics& k, const PipelineConfig& cfg,
                  OdometryEstimate& est) {
    est.features_a = a.size();
    est.features_b = b.size();
    if (a.size() < 3 || b.size() < 3) {
        est.failure = FailureReason::too_few_features;
        return;
    }

    auto t0 = Clock::now();
    const std::vector<Match> matches = symmetric_ratio_match(a, b, cfg.match);
    est.timings.match_ms = elapsed_ms(t0);
    est.matches = matches.size();
    if (matches.size() < 3) {
        est.failure = FailureReason::too_few_matches;
        return;
    }

    t0 = Clock::now();
    const CorrespondenceSet corr = reconstruct_matches(a, b, matches, k);
    est.timings.reconstruct_ms = elapsed_ms(t0);
    if (corr.size() < 3) {
        est.failure = FailureReason::too_few_matches;
        return;
    }

    const auto [ransac_seed, cov_seed] = pair_seeds(cfg.seed, est.frame_a);
    RansacConfig rc = cfg.ransac;
    rc.seed = ransac_seed;
    t0 = Clock::now();
    AlignmentResult aligned;
    try {
        aligned = ransac_align(corr, rc);
    } catch (const Error& e) {
        est.timings.ransac_ms = elapsed_ms(t0);
        if (e.code() != ErrorCode::NoConsensus && e.code() != ErrorCode::InsufficientCorrespondences) throw;
        est.failure = FailureReason::no_consensus;
        return;
    }
    est.timings.ransac_ms = elapsed_ms(t0);
    est.inliers = aligned.inliers.size();
    est.inlier_threshold = aligned.threshold;

    CovarianceConfig cc;
    cc.perturbations = cfg.perturbations;
    cc.multiplier = cfg.multiplier;
    cc.seed = cov_seed;
    cc.exec = cfg.exec;
    t0 = Clock::now();
    try {
        const CovarianceResult cov = estimate_covariance(corr.subset(aligned.inliers), cc);
        est.twist = twist_of(aligned.transform);
        est.sigma_hat = cov.covariance;
        est.sigma_scaled = cov.scaled;
    } catch (const Error& e) {
        est.timings.covariance_ms = elapsed_ms(t0);
        if (e.code() != ErrorCode::UnstableGeometry && e.code() != ErrorCode::DegenerateConfiguration &&
            e.code() != ErrorCode::AngleNearPi) {
            throw;
        }
        est.twist.reset();
        est.failure = FailureReason::unstable_geometry;
        return;
    }
    est.timings.covariance_ms = elapsed_ms(t0);
}

}  // namespace

void PipelineConfig::validate() const {
    std::ostringstream msg;
    if (detector.threshold < 1 || detector.threshold > 255) msg << "detector threshold must be in [1, 255]; ";
    if (detector.arc_length < 1 || detector.arc_length > 16) msg << "arc length must be in [1, 16]; ";
    if (!(detector.nms_radius >= 0.0)) msg << "nms radius must be >= 0; ";
    if (detector.max_features < 1) msg << "max_features must be >= 1; ";
    if (perturbations < 2) msg << "perturbations must be >= 2; ";
    if (!(multiplier > 0.0)) msg << "multiplier must be positive; ";
    if (border_margin && *border_margin < 0) msg << "border margin must be >= 0; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidConfig, msg.str());
    match.validate();
    ransac.validate();
}

void PipelineConfig::set_exec(Exec e) {
    exec = e;
    detector.exec = e;
    match.exec = e;
    ransac.exec = e;
}

std::string_view to_string(FailureReason r) {
    switch (r) {
        case FailureReason::none: return "ok";
        case FailureReason::too_few_features: return "TooFewFeatures";
        case FailureReason::too_few_matches: return "TooFewMatches";
        case FailureReason::no_consensus: return "NoConsensus";
        case FailureReason::unstable_geometry: return "UnstableGeometry";
    }
    return "unknown";
}

CorrespondenceSet reconstruct_matches(const FeatureSet& a, const FeatureSet& b, const std::vector<Match>& matches,
                                      const CameraIntrinsics& k) {
    CorrespondenceSet corr;
    corr.points_a.reserve(matches.size());
    corr.points_b.reserve(matches.size());
    corr.sigmas_a.reserve(matches.size());
    corr.sigmas_b.reserve(matches.size());
    for (std::size_t m = 0; m < matches.size(); ++m) {
        const Keypoint& ka = a.keypoint(matches[m].index_a);
        const Keypoint& kb = b.keypoint(matches[m].index_b);
        try {
            const Vec3 pa = back_project(ka.x, ka.y, ka.depth, k);
            const Vec3 pb = back_project(kb.x, kb.y, kb.depth, k);
            corr.sigmas_a.push_back(noise_sigma(ka.x, ka.y, ka.depth, k));
            corr.sigmas_b.push_back(noise_sigma(kb.x, kb.y, kb.depth, k));
            corr.points_a.push_back(pa);
            corr.points_b.push_back(pb);
            corr.match_index.push_back(m);
        } catch (const Error&) {
        }
    }
    return corr;
}

FeatureSet extract_features(const RgbdFrame& frame, const CameraIntrinsics& k, const PipelineConfig& cfg,
                            double* detect_ms, double* describe_ms) {
    const CameraIntrinsics kk = effective_intrinsics(k, cfg);
    auto t0 = Clock::now();
    const std::vector<Keypoint> kps = detect(frame, kk, cfg.detector);
    if (detect_ms) *detect_ms = elapsed_ms(t0);
    t0 = Clock::now();
    FeatureSet set = describe(frame, kps, cfg.detector);
    if (describe_ms) *describe_ms = elapsed_ms(t0);
    return set;
}

OdometryEstimate process_frame_pair(const RgbdFrame& a, const RgbdFrame& b, const CameraIntrinsics& k,
                                    const PipelineConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    OdometryEstimate est;
    est.frame_a = a.index;
    est.frame_b = b.index;
    est.t_a = a.timestamp;
    est.t_b = b.timestamp;

    double det_a = 0.0, det_b = 0.0, desc_a = 0.0, desc_b = 0.0;
    const FeatureSet fa = extract_features(a, k, cfg, &det_a, &desc_a);
    const FeatureSet fb = extract_features(b, k, cfg, &det_b, &desc_b);
    est.timings.detect_ms = det_a + det_b;
    est.timings.describe_ms = desc_a + desc_b;

    run_geometry(fa, fb, k, cfg, est);
    est.timings.total_ms = elapsed_ms(start);
    return est;
}

OdometryEstimate process_feature_pair(const FeatureSet& a, const FeatureSet& b, double t_a, double t_b,
                                      const CameraIntrinsics& k, const PipelineConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    OdometryEstimate est;
    est.frame_a = a.frame_index();
    est.frame_b = b.frame_index();
    est.t_a = t_a;
    est.t_b = t_b;
    run_geometry(a, b, k, cfg, est);
    est.timings.total_ms = elapsed_ms(start);
    return est;
}

SequenceResult run_sequence(std::size_t frame_count, const FeatureSource& source, const CameraIntrinsics& k,
                            const PipelineConfig& cfg) {
    cfg.validate();
    if (frame_count < 2) throw Error(ErrorCode::DatasetError, "a sequence needs at least 2 frames");
    SequenceResult out;
    std::optional<FrameFeatures> previous;
    for (std::size_t i = 0; i < frame_count; ++i) {
        FrameFeatures current;
        try {
            current = source(i);
        } catch (const Error& e) {
            out.gaps.push_back({static_cast<long>(i), e.what()});
            continue;
        }
        if (previous) {
            OdometryEstimate est = process_feature_pair(previous->features, current.features, previous->timestamp,
                                                        current.timestamp, k, cfg);
            // Each frame is extracted once; its cost is charged to the pair that introduces it.
            double extract_detect = current.detect_ms;
            double extract_describe = current.describe_ms;
            if (out.estimates.empty()) {
                extract_detect += previous->detect_ms;
                extract_describe += previous->describe_ms;
            }
            est.timings.detect_ms = extract_detect;
            est.timings.describe_ms = extract_describe;
            est.timings.total_ms += extract_detect + extract_describe;
            out.estimates.push_back(std::move(est));
        }
        previous = std::move(current);
    }
    return out;
}

}  // namespace rgbd

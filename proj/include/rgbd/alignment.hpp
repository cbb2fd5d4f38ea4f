#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rgbd/geometry.hpp"
#include "rgbd/kernels.hpp"

namespace rgbd {

/// Corresponding 3D points: points_a[i] <-> points_b[i].
struct CorrespondenceSet {
    std::vector<Vec3> points_a;
    std::vector<Vec3> points_b;
    std::vector<Vec3> sigmas_a;
    std::vector<Vec3> sigmas_b;
    std::vector<std::size_t> match_index;

    std::size_t size() const { return points_a.size(); }
    bool has_sigmas() const {
        return sigmas_a.size() == points_a.size() && sigmas_b.size() == points_b.size();
    }
    CorrespondenceSet subset(std::span<const std::size_t> indices) const;
};

inline constexpr double kThresholdFloor = 1e-4;  // meters

struct RansacConfig {
    double lambda_inlier = 0.05;  // meters
    int max_iterations = 200;
    bool refine = true;
    int max_refine_rounds = 3;
    double min_triangle_area = 1e-6;  // m^2
    std::size_t min_inliers = 5;
    std::uint64_t seed = 0x5eed;
    /// Return the best-triplet model instead of the least-squares refit.
    bool use_triplet_model = false;
    bool trace = false;
    Exec exec = Exec::parallel;

    void validate() const;
};

struct HypothesisTrace {
    int iteration = 0;
    std::array<std::size_t, 3> triplet{};
    bool degenerate = false;
    std::size_t inliers = 0;
    double rms = 0.0;
};

struct AlignmentResult {
    RigidTransform transform;          // maps frame-b points into frame a
    RigidTransform triplet_transform;  // raw best-hypothesis model
    std::vector<std::size_t> inliers;
    std::vector<double> residuals;     // for each inlier, under `transform`
    int iterations = 0;
    int degenerate_samples = 0;
    std::size_t consensus_inliers = 0;  // best hypothesis at lambda_inlier
    double consensus_rms = 0.0;
    double threshold = 0.0;             // refined lambda
    int refine_rounds = 0;
    std::vector<HypothesisTrace> trace;
};

/// Least-squares rigid R, t minimising sum ||p_i - (R q_i + t)||^2.
/// Throws InsufficientCorrespondences (< 3 points) or DegenerateConfiguration.
RigidTransform umeyama_align(std::span<const Vec3> p, std::span<const Vec3> q);

struct InlierSet {
    std::vector<std::size_t> indices;
    std::vector<double> residuals;
};

/// Pairs with ||a - T b|| strictly below lambda.
InlierSet count_inliers(const CorrespondenceSet& corr, const RigidTransform& t, double lambda);

/// min(3 sigma, lambda_current) with sigma = sqrt(sum r^2 / (n - 1)), floored at
/// kThresholdFloor (but never above lambda_current). Throws TooFewInliers (n < 2).
double refine_threshold(std::span<const double> residuals, double lambda_current);

/// Throws InsufficientCorrespondences or NoConsensus.
AlignmentResult ransac_align(const CorrespondenceSet& corr, const RansacConfig& cfg = {});

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace rgbd

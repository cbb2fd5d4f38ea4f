#pragma once

#include <cstdint>

#include "rgbd/alignment.hpp"
#include "rgbd/random.hpp"

namespace rgbd {

struct CovarianceResult {
    Vec6 mean = Vec6::Zero();
    Mat6 covariance = Mat6::Zero();  // unbiased sample covariance of the twists
    Mat6 scaled = Mat6::Zero();      // multiplier * covariance
    double multiplier = 9.0;
    int samples = 0;
    int degenerate = 0;
};

struct CovarianceConfig {
    int perturbations = 100;
    double multiplier = 9.0;
    /// Fraction of degenerate trials above which UnstableGeometry is raised.
    double max_degenerate_fraction = 0.1;
    std::uint64_t seed = 0xc0ffee;
    Exec exec = Exec::parallel;

    void validate() const;
};

/// Copy of `corr` with every coordinate offset by N(0, sigma_axis).
/// Throws MissingSigmas.
CorrespondenceSet perturb_cloud_pair(const CorrespondenceSet& corr, Rng& rng);

/// Perturbation estimate of the twist covariance over the given inlier set.
/// Trial n draws from Rng(seed, n), so the result does not depend on threading.
/// Throws MissingSigmas, DegenerateConfiguration, UnstableGeometry.
CovarianceResult estimate_covariance(const CorrespondenceSet& inliers, const CovarianceConfig& cfg = {});

/// Unbiased mean and covariance of a sample of twists.
void sample_moments(std::span<const Vec6> xs, Vec6& mean, Mat6& cov);

}  // namespace rgbd

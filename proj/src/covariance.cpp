#include "rgbd/covariance.hpp"

#include <sstream>

#include "kernels_detail.hpp"

namespace rgbd {

void CovarianceConfig::validate() const {
    std::ostringstream msg;
    if (perturbations < 2) msg << "perturbations must be >= 2; ";
    if (!(multiplier > 0.0)) msg << "covariance multiplier must be positive; ";
    if (!(max_degenerate_fraction >= 0.0 && max_degenerate_fraction <= 1.0)) msg << "degenerate fraction outside [0,1]; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidConfig, msg.str());
}

CorrespondenceSet perturb_cloud_pair(const CorrespondenceSet& corr, Rng& rng) {
    if (!corr.has_sigmas()) throw Error(ErrorCode::MissingSigmas, "every point needs a sigma triplet");
    CorrespondenceSet out = corr;
    detail::perturb_points(corr.points_a, corr.points_b, corr.sigmas_a, corr.sigmas_b, rng, out.points_a,
                           out.points_b);
    return out;
}

void sample_moments(std::span<const Vec6> xs, Vec6& mean, Mat6& cov) {
    mean.setZero();
    cov.setZero();
    if (xs.empty()) return;
    for (const Vec6& x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    for (const Vec6& x : xs) {
        const Vec6 d = x - mean;
        for (int r = 0; r < 6; ++r) {
            for (int c = r; c < 6; ++c) cov(r, c) += d(r) * d(c);
        }
    }
    cov /= static_cast<double>(xs.size() - 1);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < r; ++c) cov(r, c) = cov(c, r);
    }
}

CovarianceResult estimate_covariance(const CorrespondenceSet& inliers, const CovarianceConfig& cfg) {
    cfg.validate();
    if (!inliers.has_sigmas()) throw Error(ErrorCode::MissingSigmas, "every point needs a sigma triplet");
    // The unperturbed geometry must itself be alignable.
    (void)umeyama_align(inliers.points_a, inliers.points_b);

    PerturbationBatch batch;
    batch.points_a = inliers.points_a;
    batch.points_b = inliers.points_b;
    batch.sigmas_a = inliers.sigmas_a;
    batch.sigmas_b = inliers.sigmas_b;
    batch.seed = cfg.seed;
    batch.trials = static_cast<std::size_t>(cfg.perturbations);
    const auto outcomes =
        cfg.exec == Exec::parallel ? parallel::perturbation_trials(batch) : serial::perturbation_trials(batch);

    std::vector<Vec6> xs;
    xs.reserve(outcomes.size());
    int degenerate = 0;
    for (const TrialOutcome& o : outcomes) {
        if (o.ok) {
            xs.push_back(o.xi);
        } else {
            ++degenerate;
        }
    }
    if (degenerate > cfg.max_degenerate_fraction * cfg.perturbations || xs.size() < 2) {
        std::ostringstream msg;
        msg << degenerate << " of " << cfg.perturbations << " perturbed alignments were degenerate";
        throw Error(ErrorCode::UnstableGeometry, msg.str());
    }

    CovarianceResult r;
    sample_moments(xs, r.mean, r.covariance);
    r.multiplier = cfg.multiplier;
    r.scaled = cfg.multiplier * r.covariance;
    r.samples = static_cast<int>(xs.size());
    r.degenerate = degenerate;
    return r;
}

}  // namespace rgbd

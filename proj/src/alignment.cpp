#include "rgbd/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "rgbd/error.hpp"
#include "rgbd/random.hpp"

namespace rgbd {

CorrespondenceSet CorrespondenceSet::subset(std::span<const std::size_t> indices) const {
    CorrespondenceSet out;
    const bool sig = has_sigmas();
    const bool idx = match_index.size() == points_a.size();
    for (std::size_t i : indices) {
        out.points_a.push_back(points_a[i]);
        out.points_b.push_back(points_b[i]);
        if (sig) {
            out.sigmas_a.push_back(sigmas_a[i]);
            out.sigmas_b.push_back(sigmas_b[i]);
        }
        if (idx) out.match_index.push_back(match_index[i]);
    }
    return out;
}

void RansacConfig::validate() const {
    std::ostringstream msg;
    if (!(lambda_inlier > 0.0)) msg << "lambda_inlier must be positive; ";
    if (max_iterations < 1) msg << "max_iterations must be >= 1; ";
    if (max_refine_rounds < 0) msg << "max_refine_rounds must be >= 0; ";
    if (min_triangle_area < 0.0) msg << "min_triangle_area must be >= 0; ";
    if (min_inliers < 3) msg << "min_inliers must be >= 3; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidConfig, msg.str());
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

RigidTransform umeyama_align(std::span<const Vec3> p, std::span<const Vec3> q) {
    if (p.size() != q.size() || p.size() < 3) {
        throw Error(ErrorCode::InsufficientCorrespondences, "need >= 3 paired points");
    }
    const double n = static_cast<double>(p.size());
    Vec3 mp = Vec3::Zero();
    Vec3 mq = Vec3::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) {
        mp += p[i];
        mq += q[i];
    }
    mp /= n;
    mq /= n;

    Mat3 h = Mat3::Zero();  // sum (q - mq)(p - mp)^T
    for (std::size_t i = 0; i < p.size(); ++i) h.noalias() += (q[i] - mq) * (p[i] - mp).transpose();

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 s = svd.singularValues();
    if (!(s(0) > 0.0) || s(1) <= 1e-12 * s(0)) {
        throw Error(ErrorCode::DegenerateConfiguration, "cross-covariance has rank < 2 (collinear points)");
    }
    const Mat3& u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    RigidTransform t;
    t.rotation = v * d * u.transpose();
    t.translation = mp - t.rotation * mq;
    return t;
}

InlierSet count_inliers(const CorrespondenceSet& corr, const RigidTransform& t, double lambda) {
    InlierSet out;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const double r = (corr.points_a[i] - t.apply(corr.points_b[i])).norm();
        if (r < lambda) {
            out.indices.push_back(i);
            out.residuals.push_back(r);
        }
    }
    return out;
}

double refine_threshold(std::span<const double> residuals, double lambda_current) {
    if (residuals.size() < 2) throw Error(ErrorCode::TooFewInliers, "need >= 2 inlier residuals");
    double sum_sq = 0.0;
    for (double r : residuals) sum_sq += r * r;
    const double sigma = std::sqrt(sum_sq / static_cast<double>(residuals.size() - 1));
    return std::min(lambda_current, std::max(3.0 * sigma, kThresholdFloor));
}

namespace {

RigidTransform fit(const CorrespondenceSet& corr, const std::vector<std::size_t>& idx) {
    std::vector<Vec3> a;
    std::vector<Vec3> b;
    a.reserve(idx.size());
    b.reserve(idx.size());
    for (std::size_t i : idx) {
        a.push_back(corr.points_a[i]);
        b.push_back(corr.points_b[i]);
    }
    return umeyama_align(a, b);
}

}  // namespace

AlignmentResult ransac_align(const CorrespondenceSet& corr, const RansacConfig& cfg) {
    cfg.validate();
    const std::size_t n = corr.size();
    if (n < 3 || corr.points_b.size() != n) {
        throw Error(ErrorCode::InsufficientCorrespondences, "need >= 3 correspondences, got " + std::to_string(n));
    }

    // Sample every triplet up front so the draw sequence is independent of
    // how the hypotheses are scored.
    Rng rng(cfg.seed);
    const auto iterations = static_cast<std::size_t>(cfg.max_iterations);
    std::vector<std::array<std::size_t, 3>> triplets(iterations);
    for (auto& t : triplets) {
        t[0] = rng.index(n);
        do t[1] = rng.index(n); while (t[1] == t[0]);
        do t[2] = rng.index(n); while (t[2] == t[0] || t[2] == t[1]);
    }

    std::vector<RigidTransform> models(iterations);
    std::vector<char> usable(iterations, 0);
    for (std::size_t it = 0; it < iterations; ++it) {
        const auto& t = triplets[it];
        const std::array<Vec3, 3> pa{corr.points_a[t[0]], corr.points_a[t[1]], corr.points_a[t[2]]};
        const std::array<Vec3, 3> pb{corr.points_b[t[0]], corr.points_b[t[1]], corr.points_b[t[2]]};
        if (triangle_area(pa[0], pa[1], pa[2]) < cfg.min_triangle_area ||
            triangle_area(pb[0], pb[1], pb[2]) < cfg.min_triangle_area) {
            continue;
        }
        try {
            models[it] = umeyama_align(pa, pb);
            usable[it] = 1;
        } catch (const Error&) {
        }
    }

    const auto scores =
        cfg.exec == Exec::parallel
            ? parallel::score_hypotheses(models, corr.points_a, corr.points_b, cfg.lambda_inlier)
            : serial::score_hypotheses(models, corr.points_a, corr.points_b, cfg.lambda_inlier);

    AlignmentResult result;
    result.iterations = cfg.max_iterations;
    std::size_t best = iterations;
    for (std::size_t it = 0; it < iterations; ++it) {
        if (cfg.trace) {
            HypothesisTrace tr;
            tr.iteration = static_cast<int>(it);
            tr.triplet = triplets[it];
            tr.degenerate = !usable[it];
            tr.inliers = usable[it] ? scores[it].inliers : 0;
            tr.rms = usable[it] ? scores[it].rms : 0.0;
            result.trace.push_back(tr);
        }
        if (!usable[it]) {
            ++result.degenerate_samples;
            continue;
        }
        if (best == iterations || scores[it].inliers > scores[best].inliers ||
            (scores[it].inliers == scores[best].inliers && scores[it].rms < scores[best].rms)) {
            best = it;
        }
    }
    if (best == iterations || scores[best].inliers < cfg.min_inliers) {
        std::ostringstream msg;
        msg << "best hypothesis has " << (best == iterations ? 0 : scores[best].inliers) << " inliers (< "
            << cfg.min_inliers << ")";
        throw Error(ErrorCode::NoConsensus, msg.str());
    }

    result.triplet_transform = models[best];
    result.consensus_inliers = scores[best].inliers;
    result.consensus_rms = scores[best].rms;
    double lambda = cfg.lambda_inlier;

    InlierSet inliers = count_inliers(corr, models[best], lambda);
    RigidTransform model = models[best];
    if (!cfg.use_triplet_model) {
        model = fit(corr, inliers.indices);
        inliers = count_inliers(corr, model, lambda);
    }

    if (cfg.refine && !cfg.use_triplet_model) {
        for (int round = 0; round < cfg.max_refine_rounds; ++round) {
            if (inliers.indices.size() < 3) break;
            const double refined = refine_threshold(inliers.residuals, lambda);
            const InlierSet candidate = count_inliers(corr, model, refined);
            if (candidate.indices.size() < cfg.min_inliers) break;
            RigidTransform refit;
            try {
                refit = fit(corr, candidate.indices);
            } catch (const Error&) {
                break;
            }
            InlierSet next = count_inliers(corr, refit, refined);
            if (next.indices.size() < cfg.min_inliers) break;
            ++result.refine_rounds;
            lambda = refined;
            model = refit;
            const bool stable = next.indices == inliers.indices;
            inliers = std::move(next);
            if (stable) break;
        }
    }

    if (inliers.indices.size() < cfg.min_inliers) {
        throw Error(ErrorCode::NoConsensus, "final inlier set smaller than min_inliers");
    }
    result.transform = model;
    result.inliers = std::move(inliers.indices);
    result.residuals = std::move(inliers.residuals);
    result.threshold = lambda;
    return result;
}

}  // namespace rgbd

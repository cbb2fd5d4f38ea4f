#pragma once
// Fixtures shared by the unit tests and the acceptance runner.

#include <vector>

#include "rgbd/alignment.hpp"
#include "rgbd/camera.hpp"
#include "rgbd/random.hpp"
#include "support.hpp"

namespace fixtures {

using namespace rgbd;

struct Planted {
    CorrespondenceSet corr;
    RigidTransform truth;  // maps b into a
    std::size_t planted_inliers = 0;
};

/// 70 pairs with 5 mm Gaussian noise on both sides, then 30 gross outliers
/// drawn uniformly from a 5 m box.
inline Planted planted_70_30(std::uint64_t seed) {
    Rng rng(seed, 70);
    Planted f;
    f.truth.rotation = testing::random_rotation(rng, 0.3);
    for (int c = 0; c < 3; ++c) f.truth.translation[c] = rng.uniform(-0.3, 0.3);
    f.planted_inliers = 70;
    for (int i = 0; i < 100; ++i) {
        const Vec3 q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3));
        Vec3 p = f.truth.apply(q);
        Vec3 qn = q;
        if (i < 70) {
            for (int c = 0; c < 3; ++c) {
                p[c] += rng.normal(0.0, 0.005);
                qn[c] += rng.normal(0.0, 0.005);
            }
        } else {
            p = Vec3(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), rng.uniform(0, 5));
        }
        f.corr.points_a.push_back(p);
        f.corr.points_b.push_back(qn);
    }
    return f;
}

/// Fixed 20-point scene around 2 m depth seen from two poses.
struct CovarianceScene {
    CameraIntrinsics k = CameraIntrinsics::standard();
    std::vector<Vec3> in_a;  // true points, camera a
    std::vector<Vec3> in_b;  // same points, camera b
    RigidTransform truth;    // a <- b
};

inline CovarianceScene covariance_scene() {
    CovarianceScene s;
    Rng rng(2020, 0);
    s.truth.rotation = rot_y(0.035) * rot_x(-0.02);
    s.truth.translation = Vec3(0.05, -0.01, 0.03);
    const RigidTransform b_from_a = invert(s.truth);
    while (s.in_a.size() < 20) {
        const double x = rng.uniform(60, 580);
        const double y = rng.uniform(60, 420);
        const double z = rng.uniform(1.7, 2.3);
        const Vec3 pa = back_project(x, y, z, s.k);
        const Vec3 pb = b_from_a.apply(pa);
        const Vec2 px = project(pb, s.k);
        if (!s.k.contains(px.x(), px.y())) continue;
        s.in_a.push_back(pa);
        s.in_b.push_back(pb);
    }
    return s;
}

/// One measurement of both clouds: per-axis noise at the true point's sigma;
/// the reported sigmas are evaluated at the measured point, as the pipeline does.
inline CorrespondenceSet measure(const CovarianceScene& s, Rng& rng) {
    CorrespondenceSet c;
    auto observe = [&](const Vec3& p, std::vector<Vec3>& pts, std::vector<Vec3>& sig) {
        const Vec2 px = project(p, s.k);
        const Vec3 sigma = noise_sigma(px.x(), px.y(), p.z(), s.k);
        Vec3 m = p;
        for (int a = 0; a < 3; ++a) m[a] += sigma[a] * rng.normal();
        const Vec2 mpx = project(m, s.k);
        pts.push_back(m);
        sig.push_back(noise_sigma(mpx.x(), mpx.y(), m.z(), s.k));
    };
    for (std::size_t i = 0; i < s.in_a.size(); ++i) {
        observe(s.in_a[i], c.points_a, c.sigmas_a);
        observe(s.in_b[i], c.points_b, c.sigmas_b);
        c.match_index.push_back(i);
    }
    return c;
}

}  // namespace fixtures

#include <doctest.h>

#include <numbers>

#include "fixtures.hpp"
#include "rgbd/alignment.hpp"
#include "rgbd/error.hpp"
#include "support.hpp"

using namespace rgbd;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected rgbd::Error");
    return ErrorCode::IoError;
}

CorrespondenceSet make_corr(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    CorrespondenceSet c;
    c.points_a = a;
    c.points_b = b;
    return c;
}

}  // namespace

TEST_CASE("umeyama examples") {
    Rng rng(1);
    const auto p = testing::random_points(rng, 10, Vec3(-1, -1, 1), Vec3(1, 1, 3));
    const RigidTransform same = umeyama_align(p, p);
    CHECK(rotation_distance(same.rotation, Mat3::Identity()) < 1e-12);
    CHECK(same.translation.norm() < 1e-12);

    std::vector<Vec3> q = p;
    for (auto& v : q) v.x() -= 1.0;
    const RigidTransform shift = umeyama_align(p, q);
    CHECK((shift.translation - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK(rotation_distance(shift.rotation, Mat3::Identity()) < 1e-12);
}

TEST_CASE("property: umeyama recovers 1000 random transforms from noiseless 10-point clouds") {
    Rng rng(2);
    double worst_r = 0.0;
    double worst_t = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const RigidTransform truth = testing::random_transform(rng, 1.0, 1.0);
        const auto q = testing::random_points(rng, 10, Vec3(-1, -1, -1), Vec3(1, 1, 1));
        std::vector<Vec3> p;
        for (const auto& v : q) p.push_back(truth.apply(v));
        const RigidTransform est = umeyama_align(p, q);
        worst_r = std::max(worst_r, rotation_distance(est.rotation, truth.rotation));
        worst_t = std::max(worst_t, (est.translation - truth.translation).norm());
        CHECK(est.rotation.determinant() > 0.0);
    }
    CHECK(worst_r < 1e-9);
    CHECK(worst_t < 1e-9);
}

TEST_CASE("umeyama rejects too few and degenerate inputs") {
    const std::vector<Vec3> two{Vec3(0, 0, 1), Vec3(1, 0, 1)};
    CHECK(code_of([&] { umeyama_align(two, two); }) == ErrorCode::InsufficientCorrespondences);
    const std::vector<Vec3> line{Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(2, 0, 1), Vec3(3, 0, 1)};
    CHECK(code_of([&] { umeyama_align(line, line); }) == ErrorCode::DegenerateConfiguration);
    const std::vector<Vec3> same(5, Vec3(1, 2, 3));
    CHECK(code_of([&] { umeyama_align(same, same); }) == ErrorCode::DegenerateConfiguration);
}

TEST_CASE("umeyama handles a reflection-prone planar configuration") {
    // Coplanar points: the SVD sign correction must still give a proper rotation.
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const RigidTransform truth = testing::random_transform(rng, 3.0, 1.0);
        std::vector<Vec3> q;
        for (int j = 0; j < 8; ++j) q.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 2.0);
        std::vector<Vec3> p;
        for (const auto& v : q) p.push_back(truth.apply(v));
        const RigidTransform est = umeyama_align(p, q);
        CHECK(est.rotation.determinant() == doctest::Approx(1.0));
        CHECK(rotation_distance(est.rotation, truth.rotation) < 1e-9);
    }
}

TEST_CASE("count_inliers examples") {
    Rng rng(4);
    const auto p = testing::random_points(rng, 20, Vec3(-1, -1, 1), Vec3(1, 1, 3));
    const InlierSet all = count_inliers(make_corr(p, p), RigidTransform::identity(), 1e-6);
    CHECK(all.indices.size() == 20);
    for (double r : all.residuals) CHECK(r == 0.0);

    // Exactly lambda away is not an inlier.
    const CorrespondenceSet edge = make_corr({Vec3(0.5, 0, 1)}, {Vec3(0, 0, 1)});
    CHECK(count_inliers(edge, RigidTransform::identity(), 0.5).indices.empty());
    CHECK(count_inliers(edge, RigidTransform::identity(), 0.5000001).indices.size() == 1);

    // 70 exact pairs + 30 offset by 1 m.
    const RigidTransform truth = testing::random_transform(rng, 0.5, 0.5);
    const auto q = testing::random_points(rng, 100, Vec3(-1, -1, 1), Vec3(1, 1, 3));
    std::vector<Vec3> a;
    for (std::size_t i = 0; i < q.size(); ++i) a.push_back(truth.apply(q[i]) + (i < 70 ? Vec3::Zero() : Vec3(1, 0, 0)));
    const InlierSet planted = count_inliers(make_corr(a, q), truth, 0.05);
    REQUIRE(planted.indices.size() == 70);
    for (std::size_t i = 0; i < 70; ++i) CHECK(planted.indices[i] == i);
}

TEST_CASE("refine_threshold examples") {
    CHECK(refine_threshold(std::vector<double>{0, 0, 0, 0}, 0.05) == kThresholdFloor);
    // sqrt((0.01^2 + 0) / 1) = 0.01 -> 3 sigma = 0.03
    CHECK(refine_threshold(std::vector<double>{0.01, 0.0}, 0.05) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(refine_threshold(std::vector<double>{0.03, 0.0}, 0.05) == 0.05);
    CHECK(code_of([] { refine_threshold(std::vector<double>{0.01}, 0.05); }) == ErrorCode::TooFewInliers);
    // Floor never exceeds the current threshold.
    CHECK(refine_threshold(std::vector<double>{0, 0}, 5e-5) == 5e-5);
}

TEST_CASE("property: refine_threshold is min(3 sigma, lambda) and never grows") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> r(2 + rng.index(50));
        for (auto& v : r) v = std::abs(rng.normal(0.0, rng.uniform(0.0, 0.05)));
        const double lambda = rng.uniform(1e-3, 0.1);
        const double out = refine_threshold(r, lambda);
        CHECK(out <= lambda);
        double ss = 0;
        for (double v : r) ss += v * v;
        const double expect = std::min(lambda, std::max(3 * std::sqrt(ss / double(r.size() - 1)), kThresholdFloor));
        CHECK(out == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("ransac: noiseless outlier-free pairs") {
    Rng rng(6);
    const RigidTransform truth = testing::random_transform(rng, 0.5, 0.5);
    const auto q = testing::random_points(rng, 50, Vec3(-1, -1, 1), Vec3(1, 1, 3));
    std::vector<Vec3> p;
    for (const auto& v : q) p.push_back(truth.apply(v));
    const AlignmentResult r = ransac_align(make_corr(p, q));
    CHECK(r.inliers.size() == 50);
    CHECK(rotation_distance(r.transform.rotation, truth.rotation) < 1e-9);
    CHECK(testing::translation_error(r.transform, truth) < 1e-9);
    CHECK(r.threshold >= kThresholdFloor);
}

TEST_CASE("ransac: planted 70/30 fixture") {
    int pass = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto f = fixtures::planted_70_30(seed);
        RansacConfig cfg;
        cfg.seed = seed;
        const AlignmentResult r = ransac_align(f.corr, cfg);
        std::size_t planted = 0;
        for (auto i : r.inliers) planted += i < f.planted_inliers;
        const bool ok = testing::translation_error(r.transform, f.truth) < 0.02 &&
                        rotation_distance(r.transform.rotation, f.truth.rotation) < std::numbers::pi / 180 &&
                        planted >= 63;
        pass += ok;
    }
    CHECK(pass >= 48);  // >= 95% of 50
}

TEST_CASE("ransac errors and options") {
    const std::vector<Vec3> two{Vec3(0, 0, 1), Vec3(1, 0, 1)};
    CHECK(code_of([&] { ransac_align(make_corr(two, two)); }) == ErrorCode::InsufficientCorrespondences);

    // Pure noise: no hypothesis collects min_inliers.
    Rng rng(7);
    const auto a = testing::random_points(rng, 30, Vec3(-5, -5, 0), Vec3(5, 5, 10));
    const auto b = testing::random_points(rng, 30, Vec3(-5, -5, 0), Vec3(5, 5, 10));
    RansacConfig strict;
    strict.lambda_inlier = 0.001;
    CHECK(code_of([&] { ransac_align(make_corr(a, b), strict); }) == ErrorCode::NoConsensus);

    RansacConfig bad;
    bad.max_iterations = 0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);

    const auto f = fixtures::planted_70_30(3);
    RansacConfig traced;
    traced.trace = true;
    traced.use_triplet_model = true;
    const AlignmentResult r = ransac_align(f.corr, traced);
    CHECK(r.trace.size() == 200);
    CHECK(r.refine_rounds == 0);
    CHECK(r.transform.rotation == r.triplet_transform.rotation);
}

TEST_CASE("property: ransac is deterministic and identical across execution modes") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto f = fixtures::planted_70_30(seed);
        RansacConfig s;
        s.seed = seed;
        s.exec = Exec::serial;
        RansacConfig p = s;
        p.exec = Exec::parallel;
        const AlignmentResult rs = ransac_align(f.corr, s);
        const AlignmentResult rp = ransac_align(f.corr, p);
        const AlignmentResult rp2 = ransac_align(f.corr, p);
        CHECK(rs.inliers == rp.inliers);
        CHECK(rs.transform.rotation == rp.transform.rotation);
        CHECK(rs.transform.translation == rp.transform.translation);
        CHECK(rp.transform.translation == rp2.transform.translation);
    }
}

TEST_CASE("triangle_area") {
    CHECK(triangle_area(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)) == doctest::Approx(0.5));
    CHECK(triangle_area(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)) == 0.0);
}

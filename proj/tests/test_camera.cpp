#include <doctest.h>

#include <cmath>
#include <limits>

#include "rgbd/camera.hpp"
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

}  // namespace

TEST_CASE("back_project examples") {
    const auto k = CameraIntrinsics::standard();
    CHECK(back_project(320, 240, 2.0, k) == Vec3(0, 0, 2.0));
    // (639 - 320) * 2 / 586
    CHECK(back_project(639, 240, 2.0, k).x() == doctest::Approx(1.08874).epsilon(1e-5));
    CHECK(code_of([&] { back_project(10, 10, 0.0, k); }) == ErrorCode::InvalidDepth);
    CHECK(code_of([&] { back_project(10, 10, std::nan(""), k); }) == ErrorCode::InvalidDepth);
    CHECK(code_of([&] { back_project(10, 10, 7.0, k); }) == ErrorCode::InvalidDepth);
    CHECK(code_of([&] { back_project(640, 10, 2.0, k); }) == ErrorCode::OutOfBounds);
    CHECK(code_of([&] { back_project(-0.5, 10, 2.0, k); }) == ErrorCode::OutOfBounds);
}

TEST_CASE("standard sensor field of view at the image boundary") {
    // Reported boundary ratios: X/Z = 0.548 +- 0.028, Y/Z = 0.411 +- 0.021.
    const auto k = CameraIntrinsics::standard();
    const Vec3 left = back_project(0, 240, 1.0, k);
    const Vec3 right = back_project(639, 240, 1.0, k);
    const Vec3 top = back_project(320, 0, 1.0, k);
    const Vec3 bottom = back_project(320, 479, 1.0, k);
    for (double r : {-left.x(), right.x()}) CHECK(std::abs(r - 0.548) <= 0.028);
    for (double r : {-top.y(), bottom.y()}) CHECK(std::abs(r - 0.411) <= 0.021);
}

TEST_CASE("project examples and round trip") {
    const auto k = CameraIntrinsics::standard();
    CHECK(project(Vec3(0, 0, 2.0), k) == Vec2(320, 240));
    CHECK(project(Vec3(1.08874, 0, 2.0), k).x() == doctest::Approx(639.0).epsilon(1e-5));
    CHECK(code_of([&] { project(Vec3(0, 0, 0.0), k); }) == ErrorCode::BehindCamera);
    CHECK(code_of([&] { project(Vec3(0, 0, -1.0), k); }) == ErrorCode::BehindCamera);

    Rng rng(9);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(0, 639.99);
        const double y = rng.uniform(0, 479.99);
        const double z = rng.uniform(0.5, 5.5);
        const Vec3 p = back_project(x, y, z, k);
        worst = std::max(worst, (project(p, k) - Vec2(x, y)).norm());
        worst = std::max(worst, (back_project(project(p, k).x(), project(p, k).y(), p.z(), k) - p).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("pixel shift table is applied by back_project and undone by project") {
    auto k = CameraIntrinsics::standard();
    std::vector<Vec2> table(static_cast<std::size_t>(k.width * k.height), Vec2(0.5, -0.25));
    k.shift = PixelShift(k.width, k.height, table);
    const Vec3 p = back_project(320, 240, 2.0, k);
    CHECK(p.x() == doctest::Approx(0.5 * 2.0 / 586));
    CHECK(p.y() == doctest::Approx(-0.25 * 2.0 / 586));
    const Vec2 px = project(p, k);
    CHECK((px - Vec2(320, 240)).norm() < 1e-9);
}

TEST_CASE("noise_sigma examples") {
    const auto k = CameraIntrinsics::standard();
    CHECK(k.noise.kappa() == doctest::Approx(1.425e-3));
    const Vec3 s1 = noise_sigma(320, 240, 1.0, k);
    CHECK(s1.x() == 0.0);
    CHECK(s1.y() == 0.0);
    CHECK(s1.z() == doctest::Approx(1.425e-3).epsilon(1e-12));
    CHECK(noise_sigma(320, 240, 2.0, k).z() == doctest::Approx(5.70e-3).epsilon(1e-12));
    // Periphery: sigma_X is about half sigma_Z.
    const Vec3 edge = noise_sigma(0, 240, 2.0, k);
    CHECK(edge.x() / edge.z() == doctest::Approx(0.5).epsilon(0.1));
    CHECK(noise_sigma(639, 479, 3.0, k).minCoeff() >= 0.0);
}

TEST_CASE("property: noise sigmas are non-negative and quadratic in depth") {
    const auto k = CameraIntrinsics::standard();
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double x = rng.uniform(0, 640);
        const double y = rng.uniform(0, 480);
        const double z = rng.uniform(0.3, 3.0);
        const Vec3 s = noise_sigma(x, y, z, k);
        CHECK(s.minCoeff() >= 0.0);
        const Vec3 s2 = noise_sigma(x, y, 2 * z, k);
        CHECK((s2 - 4 * s).norm() <= 1e-12 * s2.norm() + 1e-18);
    }
}

TEST_CASE("make_frame mask and reconstruct_cloud") {
    const auto k = CameraIntrinsics::standard();
    GrayImage g(k.width, k.height, 100);
    DepthImage d(k.width, k.height, 2.0f);
    d(5, 5) = std::numeric_limits<float>::quiet_NaN();
    d(6, 5) = 0.0f;
    d(7, 5) = 9.0f;
    const RgbdFrame f = make_frame(g, d, k, 1.5, 3);
    CHECK(f.timestamp == 1.5);
    CHECK(f.index == 3);
    CHECK_FALSE(f.valid_at(5, 5));
    CHECK_FALSE(f.valid_at(6, 5));
    CHECK_FALSE(f.valid_at(7, 5));
    CHECK(f.valid_at(8, 5));

    CHECK(reconstruct_cloud(f, k, {}).points.empty());

    const PointCloud c = reconstruct_cloud(f, k, {Vec2(320, 240)});
    REQUIRE(c.points.size() == 1);
    CHECK(c.points[0] == Vec3(0, 0, 2.0));
    CHECK(c.sigmas[0].x() == 0.0);
    CHECK(c.sigmas[0].z() == doctest::Approx(5.7e-3).epsilon(1e-9));

    const PointCloud bad = reconstruct_cloud(f, k, {Vec2(100, 100), Vec2(5, 5), Vec2(200, 200)});
    CHECK(bad.points.size() == 2);
    REQUIRE(bad.rejected.size() == 1);
    CHECK(bad.rejected[0] == 1);
    CHECK(bad.source == std::vector<std::size_t>{0, 2});

    CHECK(code_of([&] { make_frame(GrayImage(10, 10), DepthImage(10, 10), k); }) == ErrorCode::InvalidIntrinsics);
}

TEST_CASE("intrinsics validation") {
    auto k = CameraIntrinsics::standard();
    CHECK_NOTHROW(k.validate());
    k.fx = 0;
    CHECK(code_of([&] { k.validate(); }) == ErrorCode::InvalidIntrinsics);
    k = CameraIntrinsics::standard();
    k.z_min = 5;
    k.z_max = 1;
    CHECK(code_of([&] { k.validate(); }) == ErrorCode::InvalidIntrinsics);
    CHECK(NoiseModel::from_kappa(2e-3).kappa() == doctest::Approx(2e-3));
}

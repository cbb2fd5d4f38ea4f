#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rgbd/error.hpp"
#include "rgbd/geometry.hpp"
#include "support.hpp"

using namespace rgbd;
using testing::random_transform;

namespace {

bool near(const RigidTransform& a, const RigidTransform& b, double tol) {
    return (a.rotation - b.rotation).cwiseAbs().maxCoeff() <= tol &&
           (a.translation - b.translation).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

TEST_CASE("compose: identity, inverse, commuting translations") {
    CHECK(near(compose(RigidTransform::identity(), RigidTransform::identity()), RigidTransform::identity(), 0.0));

    Rng rng(1);
    const RigidTransform t = random_transform(rng, 2.0, 3.0);
    CHECK(near(compose(t, invert(t)), RigidTransform::identity(), 1e-12));
    CHECK(near(compose(invert(t), t), RigidTransform::identity(), 1e-12));

    const auto c = compose(RigidTransform::from_translation(1, 0, 0), RigidTransform::from_translation(0, 2, 0));
    CHECK(near(c, RigidTransform::from_translation(1, 2, 0), 0.0));
}

TEST_CASE("compose applies the right operand first") {
    const RigidTransform a = RigidTransform::from_rotation(rot_z(std::numbers::pi / 2));
    const RigidTransform b = RigidTransform::from_translation(1, 0, 0);
    // a(b(0)) = rot_z(90)(1,0,0) = (0,1,0)
    const Vec3 p = compose(a, b).apply(Vec3::Zero());
    CHECK(p.isApprox(Vec3(0, 1, 0), 1e-15));
}

TEST_CASE("invert examples") {
    CHECK(near(invert(RigidTransform::identity()), RigidTransform::identity(), 0.0));
    CHECK(near(invert(RigidTransform::from_translation(1, 2, 3)), RigidTransform::from_translation(-1, -2, -3), 0.0));
    const double th = 0.7;
    CHECK(near(invert(RigidTransform::from_rotation(rot_z(th))), RigidTransform::from_rotation(rot_z(-th)), 1e-15));
}

TEST_CASE("twist examples") {
    CHECK(twist_of(RigidTransform::identity()).vector().isZero(0.0));
    const PoseTwist xi = twist_of(RigidTransform::from_rotation(rot_z(0.1)));
    CHECK(xi.translation.isZero(0.0));
    CHECK(xi.rotation.isApprox(Vec3(0, 0, 0.1), 1e-14));
    // Translation component is the transform's translation, not the SE(3) log's.
    const RigidTransform t{rot_x(0.3), Vec3(0.4, -0.2, 1.0)};
    CHECK(twist_of(t).translation == t.translation);
}

TEST_CASE("property: transform_of(twist_of(T)) round trip over 1000 transforms at 0.5 rad") {
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        RigidTransform t;
        t.rotation = rotation_about(testing::random_unit(rng), 0.5);
        t.translation = testing::random_unit(rng) * rng.uniform(0.0, 2.0);
        const RigidTransform back = transform_of(twist_of(t));
        worst = std::max(worst, rotation_distance(back.rotation, t.rotation));
        worst = std::max(worst, (back.translation - t.translation).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("property: so3 log/exp round trip across the angle range") {
    Rng rng(5);
    for (double angle : {0.0, 1e-12, 1e-8, 1e-4, 0.3, 1.5, 2.5, 3.0, 3.1, 3.14, 3.1415}) {
        for (int i = 0; i < 50; ++i) {
            const Vec3 w = testing::random_unit(rng) * angle;
            const Mat3 r = so3_exp(w);
            CHECK(orthonormality_error(r) < 1e-14);
            CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-14));
            const Vec3 back = so3_log(r);
            CHECK(back.norm() == doctest::Approx(angle).epsilon(1e-9));
            CHECK(rotation_distance(so3_exp(back), r) < 1e-9);
        }
    }
}

TEST_CASE("so3_log near pi recovers the axis up to sign") {
    const Vec3 axis = Vec3(1, 2, -0.5).normalized();
    const double angle = std::numbers::pi - 1e-9;
    const Vec3 w = so3_log(rotation_about(axis, angle));
    CHECK(w.norm() == doctest::Approx(angle).epsilon(1e-9));
    CHECK(std::abs(std::abs(w.normalized().dot(axis)) - 1.0) < 1e-7);
}

TEST_CASE("twist_of rejects rotations at pi") {
    const RigidTransform t = RigidTransform::from_rotation(rot_y(std::numbers::pi));
    CHECK_THROWS_AS(twist_of(t), Error);
    try {
        twist_of(t);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AngleNearPi);
    }
    CHECK_NOTHROW(twist_of(RigidTransform::from_rotation(rot_y(kMaxTwistAngle - 1e-6))));
}

TEST_CASE("property: compose is associative and keeps rotations orthonormal") {
    Rng rng(77);
    RigidTransform chain = RigidTransform::identity();
    for (int i = 0; i < 200; ++i) {
        const auto a = random_transform(rng, 3.0, 2.0);
        const auto b = random_transform(rng, 3.0, 2.0);
        const auto c = random_transform(rng, 3.0, 2.0);
        CHECK(near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12));
        chain = compose(chain, a);
    }
    CHECK(orthonormality_error(chain.rotation) < 1e-12);
}

TEST_CASE("property: invert(compose(a, b)) == compose(invert(b), invert(a))") {
    Rng rng(78);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_transform(rng, 3.0, 2.0);
        const auto b = random_transform(rng, 3.0, 2.0);
        CHECK(near(invert(compose(a, b)), compose(invert(b), invert(a)), 1e-12));
    }
}

TEST_CASE("rotation helpers") {
    CHECK(rotation_distance(rot_x(0.2), rot_x(0.5)) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rot_z(0.4).isApprox(rotation_about(Vec3::UnitZ(), 0.4), 1e-15));
    const Vec3 rpy = roll_pitch_yaw(rot_z(0.3) * rot_y(-0.2) * rot_x(0.1));
    CHECK(rpy.isApprox(Vec3(0.1, -0.2, 0.3), 1e-12));
    CHECK(skew(Vec3(1, 2, 3)) * Vec3(4, 5, 6) == Vec3(1, 2, 3).cross(Vec3(4, 5, 6)));
    const auto m = RigidTransform{rot_x(0.1), Vec3(1, 2, 3)}.matrix();
    CHECK(m(3, 3) == 1.0);
    CHECK(m(0, 3) == 1.0);
}

#include "rgbd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "rgbd/error.hpp"

namespace rgbd {

namespace {

constexpr double kSmallAngle = 1e-10;

Vec3 vee(const Mat3& m) {
    return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

}  // namespace

RigidTransform RigidTransform::from_translation(double x, double y, double z) {
    return {Mat3::Identity(), Vec3(x, y, z)};
}

Eigen::Matrix4d RigidTransform::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Vec6 PoseTwist::vector() const {
    Vec6 v;
    v << translation, rotation;
    return v;
}

PoseTwist PoseTwist::from_vector(const Vec6& v) {
    return {v.head<3>(), v.tail<3>()};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
    const Mat3 rt = t.rotation.transpose();
    return {rt, -(rt * t.translation)};
}

Mat3 skew(const Vec3& w) {
    Mat3 k;
    k << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return k;
}

Mat3 so3_exp(const Vec3& w) {
    const double theta = w.norm();
    const Mat3 k = skew(w);
    if (theta < kSmallAngle) return Mat3::Identity() + k + 0.5 * k * k;
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& r) {
    const Vec3 v = vee(r);  // 2 sin(theta) * axis
    const double s = 0.5 * v.norm();
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(s, c);

    if (theta < kSmallAngle) return 0.5 * (1.0 + theta * theta / 6.0) * v;

    if (c > -0.7) return (theta / (2.0 * s)) * v;

    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
    const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
    Eigen::Index col = 0;
    b.diagonal().maxCoeff(&col);
    Vec3 axis = b.col(col) / std::sqrt(b(col, col) * (1.0 - c));
    axis.normalize();
    if (axis.dot(v) < 0.0) axis = -axis;
    return theta * axis;
}

PoseTwist twist_of(const RigidTransform& t) {
    const Vec3 w = so3_log(t.rotation);
    if (w.norm() > kMaxTwistAngle) {
        std::ostringstream msg;
        msg << "rotation angle " << w.norm() << " rad is too close to pi";
        throw Error(ErrorCode::AngleNearPi, msg.str());
    }
    return {t.translation, w};
}

RigidTransform transform_of(const PoseTwist& xi) {
    return {so3_exp(xi.rotation), xi.translation};
}

Mat3 rotation_about(const Vec3& axis, double angle) {
    return so3_exp(axis.normalized() * angle);
}

Mat3 rot_x(double angle) { return rotation_about(Vec3::UnitX(), angle); }
Mat3 rot_y(double angle) { return rotation_about(Vec3::UnitY(), angle); }
Mat3 rot_z(double angle) { return rotation_about(Vec3::UnitZ(), angle); }

double rotation_distance(const Mat3& a, const Mat3& b) {
    return so3_log(a.transpose() * b).norm();
}

Vec3 roll_pitch_yaw(const Mat3& r) {
    const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    return {roll, pitch, yaw};
}

double orthonormality_error(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).norm();
}

}  // namespace rgbd

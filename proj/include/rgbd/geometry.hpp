#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace rgbd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Rigid motion p -> R p + t.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }
    static RigidTransform from_translation(double x, double y, double z);
    static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Eigen::Matrix4d matrix() const;
};

/// Six-vector pose parametrization [t; w] where t is the transform's
/// translation and w = log(R) the axis-angle rotation vector.
struct PoseTwist {
    Vec3 translation = Vec3::Zero();
    Vec3 rotation = Vec3::Zero();

    Vec6 vector() const;
    static PoseTwist from_vector(const Vec6& v);
};

/// Rotations whose angle exceeds this are rejected by twist_of.
inline constexpr double kMaxTwistAngle = 3.14159265358979323846 - 1e-6;

/// Result applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Throws Error(AngleNearPi) when the rotation angle exceeds kMaxTwistAngle.
PoseTwist twist_of(const RigidTransform& t);
RigidTransform transform_of(const PoseTwist& xi);

Mat3 skew(const Vec3& w);
Mat3 so3_exp(const Vec3& w);
/// Canonical-branch logarithm, ||w|| <= pi. No range check.
Vec3 so3_log(const Mat3& r);

Mat3 rotation_about(const Vec3& axis, double angle);
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Angle of R_a^T R_b in radians.
double rotation_distance(const Mat3& a, const Mat3& b);

/// Display-only Euler angles (roll, pitch, yaw) for the intrinsic Z-Y-X
/// convention R = Rz(yaw) Ry(pitch) Rx(roll).
Vec3 roll_pitch_yaw(const Mat3& r);

/// Orthonormality defect ||R^T R - I||_F.
double orthonormality_error(const Mat3& r);

}  // namespace rgbd

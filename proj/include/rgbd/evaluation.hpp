#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rgbd/camera.hpp"
#include "rgbd/features.hpp"
#include "rgbd/geometry.hpp"
#include "rgbd/pipeline.hpp"

namespace rgbd {

struct StampedPose {
    double timestamp = 0.0;
    RigidTransform pose;  // camera -> world
};

struct Trajectory {
    std::vector<StampedPose> poses;
    std::vector<bool> gap;  // gap[i]: pose i was propagated over a failed estimate

    std::size_t size() const { return poses.size(); }
};

enum class TrajectoryShape { stationary, line, orbit };

struct SynthConfig {
    std::size_t landmarks = 400;
    Vec3 box_min{-1.6, -1.2, 1.2};  // landmark volume in the first camera frame
    Vec3 box_max{1.6, 1.2, 2.8};
    TrajectoryShape shape = TrajectoryShape::line;
    std::size_t frames = 10;
    double frame_rate = 30.0;
    double speed = 0.01;          // m per frame (line), or orbit arc per frame
    Vec3 direction{1.0, 0.0, 0.0};
    double angular_rate = 0.0;    // rad per frame about the camera y axis (line)
    bool noise = true;
    double outlier_rate = 0.0;    // fraction of landmarks given a descriptor twin
    double descriptor_flip = 0.02;  // per-bit flip probability for each observation
    bool render = false;          // rasterize frames instead of feature files
    double texture_cell = 0.03;   // rendered texture cell size (m)
    double wall_depth = 2.0;      // rendered back-wall distance (m)
    std::uint64_t seed = 1;

    void validate() const;
};

struct Landmark {
    Vec3 position;  // world
    std::array<std::uint64_t, 4> descriptor{};
};

struct SynthScene {
    CameraIntrinsics intrinsics;
    std::vector<Landmark> landmarks;
    Trajectory truth;
    std::vector<FeatureSet> features;  // feature-file mode
    std::vector<RgbdFrame> frames;     // render mode
};

/// Ground-truth poses for the configured shape; pose 0 is the identity.
Trajectory synth_trajectory(const SynthConfig& cfg);

/// Landmarks, truth, and per-frame observations (or rendered frames).
SynthScene synth_scene(const SynthConfig& cfg, const CameraIntrinsics& k = CameraIntrinsics::standard());

/// Observation of the scene landmarks from one camera pose. `rng` drives
/// depth/coordinate noise and descriptor bit flips; pass nullptr for a clean view.
FeatureSet observe_landmarks(const std::vector<Landmark>& landmarks, const RigidTransform& pose,
                             const CameraIntrinsics& k, bool noise, double flip, Rng* rng);

/// Ray-cast a textured box room (back wall at `wall_depth` plus floor and
/// side walls) from the given pose.
RgbdFrame render_frame(const RigidTransform& pose, const CameraIntrinsics& k, const SynthConfig& cfg,
                       Rng* depth_noise, double timestamp = 0.0, long index = 0);

/// pose_{i+1} = pose_i * exp(xi_i); failed estimates repeat the previous pose.
Trajectory integrate_trajectory(const std::vector<OdometryEstimate>& estimates, const RigidTransform& initial,
                                double initial_timestamp);

/// Relative motion between consecutive poses as twists.
std::vector<PoseTwist> relative_twists(const Trajectory& t);

struct ComparisonResult {
    std::vector<double> timestamps;        // per associated pose
    std::vector<Vec3> position_error;      // est - gt (m)
    std::vector<Vec3> orientation_error;   // log(R_gt^T R_est) (rad)
    std::vector<Vec6> twist_error;         // per consecutive associated pair
    std::size_t unassociated = 0;
};

/// Nearest-timestamp association within half the ground-truth frame period.
/// Throws TimestampMismatch when more than 10% of poses fail to associate.
ComparisonResult compare(const Trajectory& est, const Trajectory& gt);

/// Index of the gt pose nearest to `t`, or npos if farther than tolerance.
std::size_t associate(const Trajectory& gt, double t, double tolerance);

struct TwistErrors {
    std::vector<Vec6> errors;
    std::vector<Mat6> covariances;  // sigma_hat for each error
    std::vector<long> frames;       // frame_a of each error
};

/// Estimated twist minus ground-truth twist for every successful estimate.
TwistErrors twist_errors(const std::vector<OdometryEstimate>& estimates, const Trajectory& gt);

struct CoverageReport {
    std::size_t samples = 0;
    std::size_t singular = 0;
    double multiplier = 9.0;
    // [k-1][axis] for k = 1, 2, 3; axis order tx ty tz wx wy wz
    std::array<std::array<double, 6>, 3> per_axis{};
    std::array<std::array<double, 6>, 3> per_axis_scaled{};
    std::array<double, 3> joint{};         // Mahalanobis distance < k
    std::array<double, 3> joint_scaled{};
    double nees_mean = 0.0;
    double nees_mean_scaled = 0.0;
    double nees_p50 = 0.0;
    double nees_p90 = 0.0;
    double nees_p99 = 0.0;
    std::vector<long> spikes;  // indices whose translation trace > 10x the median
};

CoverageReport coverage(const std::vector<Vec6>& errors, const std::vector<Mat6>& covariances,
                        double multiplier = 9.0);

/// e^T (S + 1e-12 I)^-1 e, or NaN when S is not positive definite.
double nees(const Vec6& e, const Mat6& s);

}  // namespace rgbd

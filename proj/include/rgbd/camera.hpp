#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "rgbd/geometry.hpp"
#include "rgbd/image.hpp"

namespace rgbd {

/// Depth-noise law sigma_Z = kappa * Z^2 with kappa = |slope| * sigma_d'.
struct NoiseModel {
    double sigma_disparity = 0.5;       // pixels
    double disparity_slope = -2.85e-3;  // 1/m

    double kappa() const;
    /// Builds a model with the given kappa at the default slope.
    static NoiseModel from_kappa(double kappa);
};

/// Per-pixel (dx, dy) shift added to pixel coordinates before back-projection.
/// Either identically zero or a dense lookup table sampled at the nearest pixel.
class PixelShift {
public:
    PixelShift() = default;
    PixelShift(int width, int height, std::vector<Vec2> table);

    bool is_zero() const { return table_ == nullptr; }
    Vec2 at(double x, double y) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::shared_ptr<const std::vector<Vec2>> table_;
};

struct CameraIntrinsics {
    double fx = 586.0;
    double fy = 586.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;
    PixelShift shift;
    double z_min = 0.3;
    double z_max = 6.0;
    int border_margin = 16;
    NoiseModel noise;

    /// Factory-typical structured-light sensor without lens distortion.
    static CameraIntrinsics standard() { return {}; }

    /// Throws Error(InvalidIntrinsics).
    void validate() const;
    bool depth_in_range(double z) const { return z >= z_min && z <= z_max; }
    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x < static_cast<double>(width) && y < static_cast<double>(height);
    }
};

struct RgbdFrame {
    GrayImage intensity;
    DepthImage depth;
    MaskImage valid;
    double timestamp = 0.0;
    long index = 0;

    bool valid_at(int x, int y) const { return valid.contains(x, y) && valid(x, y) != 0; }
};

/// Builds the frame's validity mask from depth range and finiteness.
/// Throws Error(InvalidIntrinsics) when raster sizes disagree with k.
RgbdFrame make_frame(GrayImage intensity, DepthImage depth, const CameraIntrinsics& k,
                     double timestamp = 0.0, long index = 0);

/// X = (x + dx - cx) Z / fx,  Y = (y + dy - cy) Z / fy.
/// Throws InvalidDepth / OutOfBounds.
Vec3 back_project(double x, double y, double z, const CameraIntrinsics& k);

/// Forward pinhole model x = fx X/Z + cx - dx. Throws BehindCamera.
Vec2 project(const Vec3& p, const CameraIntrinsics& k);

/// Per-axis standard deviations (magnitudes) of a back-projected point.
Vec3 noise_sigma(double x, double y, double z, const CameraIntrinsics& k, const NoiseModel& n);
inline Vec3 noise_sigma(double x, double y, double z, const CameraIntrinsics& k) {
    return noise_sigma(x, y, z, k, k.noise);
}

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> sigmas;
    std::vector<std::size_t> source;    // index into the requested pixel list
    std::vector<std::size_t> rejected;  // requested indices dropped for invalid depth
};

/// Back-projects each requested pixel using the depth stored at its nearest
/// pixel. Order is preserved; invalid pixels land in `rejected`.
PointCloud reconstruct_cloud(const RgbdFrame& frame, const CameraIntrinsics& k,
                             const std::vector<Vec2>& pixels);

}  // namespace rgbd

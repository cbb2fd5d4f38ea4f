#include "rgbd/camera.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rgbd/error.hpp"

namespace rgbd {

double NoiseModel::kappa() const {
    return std::abs(disparity_slope) * sigma_disparity;
}

NoiseModel NoiseModel::from_kappa(double kappa) {
    NoiseModel n;
    n.sigma_disparity = kappa / std::abs(n.disparity_slope);
    return n;
}

PixelShift::PixelShift(int width, int height, std::vector<Vec2> table)
    : width_(width), height_(height) {
    if (width <= 0 || height <= 0 ||
        table.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::InvalidIntrinsics, "shift table size does not match its dimensions");
    }
    table_ = std::make_shared<const std::vector<Vec2>>(std::move(table));
}

Vec2 PixelShift::at(double x, double y) const {
    if (!table_) return Vec2::Zero();
    const int ix = std::clamp(static_cast<int>(std::lround(x)), 0, width_ - 1);
    const int iy = std::clamp(static_cast<int>(std::lround(y)), 0, height_ - 1);
    return (*table_)[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)];
}

void CameraIntrinsics::validate() const {
    std::ostringstream msg;
    if (!(fx > 0.0 && fy > 0.0)) msg << "focal lengths must be positive; ";
    if (width <= 0 || height <= 0) msg << "image size must be positive; ";
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) msg << "principal point outside image; ";
    if (!(z_min > 0.0 && z_max > z_min)) msg << "depth range must satisfy 0 < z_min < z_max; ";
    if (border_margin < 0 || 2 * border_margin >= std::min(width, height)) msg << "border margin out of range; ";
    if (!(noise.sigma_disparity >= 0.0) || !std::isfinite(noise.disparity_slope)) msg << "invalid noise model; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidIntrinsics, msg.str());
}

RgbdFrame make_frame(GrayImage intensity, DepthImage depth, const CameraIntrinsics& k, double timestamp,
                     long index) {
    if (intensity.width() != k.width || intensity.height() != k.height || depth.width() != k.width ||
        depth.height() != k.height) {
        throw Error(ErrorCode::InvalidIntrinsics, "frame dimensions do not match intrinsics");
    }
    RgbdFrame f;
    f.valid = MaskImage(k.width, k.height, 0);
    auto d = depth.pixels();
    auto m = f.valid.pixels();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double z = d[i];
        m[i] = (std::isfinite(z) && k.depth_in_range(z)) ? 1 : 0;
    }
    f.intensity = std::move(intensity);
    f.depth = std::move(depth);
    f.timestamp = timestamp;
    f.index = index;
    return f;
}

Vec3 back_project(double x, double y, double z, const CameraIntrinsics& k) {
    if (!std::isfinite(z) || !k.depth_in_range(z)) {
        std::ostringstream msg;
        msg << "depth " << z << " m outside [" << k.z_min << ", " << k.z_max << "]";
        throw Error(ErrorCode::InvalidDepth, msg.str());
    }
    if (!k.contains(x, y)) {
        std::ostringstream msg;
        msg << "pixel (" << x << ", " << y << ") outside " << k.width << "x" << k.height;
        throw Error(ErrorCode::OutOfBounds, msg.str());
    }
    const Vec2 d = k.shift.at(x, y);
    return {(x + d.x() - k.cx) * z / k.fx, (y + d.y() - k.cy) * z / k.fy, z};
}

Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
    if (!(p.z() > 0.0)) throw Error(ErrorCode::BehindCamera, "point has non-positive depth");
    const double u = k.fx * p.x() / p.z() + k.cx;
    const double v = k.fy * p.y() / p.z() + k.cy;
    if (k.shift.is_zero()) return {u, v};
    // The shift is indexed by the distorted pixel; two fixed-point steps are
    // plenty for tables that vary slowly across neighbouring pixels.
    Vec2 px(u, v);
    for (int i = 0; i < 2; ++i) px = Vec2(u, v) - k.shift.at(px.x(), px.y());
    return px;
}

Vec3 noise_sigma(double x, double y, double z, const CameraIntrinsics& k, const NoiseModel& n) {
    // Validates the same preconditions as back-projection.
    (void)back_project(x, y, z, k);
    const Vec2 d = k.shift.at(x, y);
    const double sz = n.kappa() * z * z;
    return {std::abs(x + d.x() - k.cx) / k.fx * sz, std::abs(y + d.y() - k.cy) / k.fy * sz, sz};
}

PointCloud reconstruct_cloud(const RgbdFrame& frame, const CameraIntrinsics& k, const std::vector<Vec2>& pixels) {
    PointCloud cloud;
    cloud.points.reserve(pixels.size());
    cloud.sigmas.reserve(pixels.size());
    cloud.source.reserve(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double x = pixels[i].x();
        const double y = pixels[i].y();
        const int ix = static_cast<int>(std::lround(x));
        const int iy = static_cast<int>(std::lround(y));
        if (!frame.depth.contains(ix, iy) || !frame.valid_at(ix, iy)) {
            cloud.rejected.push_back(i);
            continue;
        }
        const double z = frame.depth(ix, iy);
        try {
            cloud.points.push_back(back_project(x, y, z, k));
            cloud.sigmas.push_back(noise_sigma(x, y, z, k));
            cloud.source.push_back(i);
        } catch (const Error&) {
            cloud.rejected.push_back(i);
        }
    }
    return cloud;
}

}  // namespace rgbd

#pragma once
// Generators and small oracles shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "rgbd/camera.hpp"
#include "rgbd/geometry.hpp"
#include "rgbd/random.hpp"

namespace testing {

using namespace rgbd;

inline Vec3 random_unit(Rng& rng) {
    Vec3 v;
    do {
        v = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
}

/// Rotation with angle uniform in [0, max_angle] about a uniform axis.
inline Mat3 random_rotation(Rng& rng, double max_angle) {
    return rotation_about(random_unit(rng), rng.uniform(0.0, max_angle));
}

inline RigidTransform random_transform(Rng& rng, double max_angle, double max_translation) {
    RigidTransform t;
    t.rotation = random_rotation(rng, max_angle);
    t.translation = random_unit(rng) * rng.uniform(0.0, max_translation);
    return t;
}

inline std::vector<Vec3> random_points(Rng& rng, std::size_t n, const Vec3& lo, const Vec3& hi) {
    std::vector<Vec3> out(n);
    for (auto& p : out)
        for (int c = 0; c < 3; ++c) p[c] = rng.uniform(lo[c], hi[c]);
    return out;
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
    return (a.translation - b.translation).norm();
}

/// Frame with random 8-bit intensity and constant depth.
inline RgbdFrame noise_frame(Rng& rng, const CameraIntrinsics& k, double depth) {
    GrayImage g(k.width, k.height);
    for (auto& v : g.pixels()) v = static_cast<std::uint8_t>(rng.index(256));
    DepthImage d(k.width, k.height, static_cast<float>(depth));
    return make_frame(std::move(g), std::move(d), k);
}

/// Independent segment-test oracle: does any run of `arc` contiguous circle
/// pixels lie all above center + t or all below center - t?
inline bool naive_is_corner(const GrayImage& img, int x, int y, int t, int arc) {
    static const int cx[16] = {0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1};
    static const int cy[16] = {-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3};
    const int c = img(x, y);
    for (int sign : {1, -1}) {
        for (int start = 0; start < 16; ++start) {
            bool all = true;
            for (int k = 0; k < arc && all; ++k) {
                const int i = (start + k) % 16;
                const int v = img(x + cx[i], y + cy[i]);
                all = sign > 0 ? v > c + t : v < c - t;
            }
            if (all) return true;
        }
    }
    return false;
}

}  // namespace testing

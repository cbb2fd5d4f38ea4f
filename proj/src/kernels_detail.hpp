#pragma once

// Per-row / per-item bodies shared by the serial and OpenMP kernels.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rgbd/alignment.hpp"
#include "rgbd/error.hpp"
#include "rgbd/kernels.hpp"
#include "rgbd/random.hpp"

namespace rgbd::detail {

inline constexpr std::array<std::array<int, 2>, 16> kCircle{{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

/// True when the 16-bit ring holds a circular run of at least `arc` set bits.
inline bool has_arc(std::uint32_t ring, int arc) {
    std::uint32_t run = ring | (ring << 16);
    const std::uint32_t doubled = run;
    for (int i = 1; i < arc && run != 0; ++i) run &= doubled >> i;
    return run != 0;
}

inline void segment_test_row(const GrayImage& img, const MaskImage& mask, int threshold, int arc_length,
                             int border, int y, std::span<float> out) {
    const int w = img.width();
    const int lo = std::max(border, 3);
    const int hi = w - lo;
    const int compass_needed = arc_length / 4;
    std::array<std::ptrdiff_t, 16> offset{};
    for (std::size_t k = 0; k < 16; ++k) offset[k] = static_cast<std::ptrdiff_t>(kCircle[k][1]) * w + kCircle[k][0];
    const std::uint8_t* row = img.row(y).data();
    const std::uint8_t* valid = mask.row(y).data();
    for (int x = lo; x < hi; ++x) {
        if (valid[x] == 0) continue;
        const std::uint8_t* p = row + x;
        const int c = *p;
        const int bright_level = c + threshold;
        const int dark_level = c - threshold;

        if (compass_needed > 0) {
            int bright = 0;
            int dark = 0;
            for (std::size_t k = 0; k < 16; k += 4) {
                const int v = p[offset[k]];
                bright += v > bright_level;
                dark += v < dark_level;
            }
            if (bright < compass_needed && dark < compass_needed) continue;
        }

        std::uint32_t bright_ring = 0;
        std::uint32_t dark_ring = 0;
        int bright_sum = 0;
        int dark_sum = 0;
        for (std::size_t k = 0; k < 16; ++k) {
            const int v = p[offset[k]];
            if (v > bright_level) {
                bright_ring |= 1u << k;
                bright_sum += v - bright_level;
            } else if (v < dark_level) {
                dark_ring |= 1u << k;
                dark_sum += dark_level - v;
            }
        }
        const bool bright_corner = has_arc(bright_ring, arc_length);
        const bool dark_corner = has_arc(dark_ring, arc_length);
        if (!bright_corner && !dark_corner) continue;
        const int score = std::max(bright_corner ? bright_sum : 0, dark_corner ? dark_sum : 0);
        out[static_cast<std::size_t>(x)] = static_cast<float>(score);
    }
}

inline void box_rows_horizontal(const GrayImage& img, int y, std::span<std::uint16_t> out) {
    const int w = img.width();
    auto row = img.row(y);
    for (int x = 0; x < w; ++x) {
        std::uint16_t s = 0;
        for (int d = -2; d <= 2; ++d) s += row[static_cast<std::size_t>(std::clamp(x + d, 0, w - 1))];
        out[static_cast<std::size_t>(x)] = s;
    }
}

inline void box_rows_vertical(const Image<std::uint16_t>& horiz, int y, std::span<std::uint16_t> out) {
    const int w = horiz.width();
    const int h = horiz.height();
    for (int x = 0; x < w; ++x) {
        std::uint16_t s = 0;
        for (int d = -2; d <= 2; ++d) s += horiz(x, std::clamp(y + d, 0, h - 1));
        out[static_cast<std::size_t>(x)] = s;
    }
}

inline void hamming_row(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t words,
                        std::size_t i, std::size_t cols, std::uint32_t* out) {
    const std::uint64_t* qa = a.data() + i * words;
    for (std::size_t j = 0; j < cols; ++j) {
        const std::uint64_t* qb = b.data() + j * words;
        std::uint32_t d = 0;
        for (std::size_t w = 0; w < words; ++w) d += static_cast<std::uint32_t>(std::popcount(qa[w] ^ qb[w]));
        out[j] = d;
    }
}

inline void euclidean_row(std::span<const float> a, std::span<const float> b, std::size_t dims, std::size_t i,
                          std::size_t cols, double* out) {
    const float* qa = a.data() + i * dims;
    for (std::size_t j = 0; j < cols; ++j) {
        const float* qb = b.data() + j * dims;
        double s = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
            const double diff = static_cast<double>(qa[d]) - static_cast<double>(qb[d]);
            s += diff * diff;
        }
        out[j] = std::sqrt(s);
    }
}

inline HypothesisScore score_model(const RigidTransform& m, std::span<const Vec3> pa, std::span<const Vec3> pb,
                                   double threshold) {
    HypothesisScore s;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double r = (pa[i] - m.apply(pb[i])).norm();
        if (r < threshold) {
            ++s.inliers;
            sum_sq += r * r;
        }
    }
    s.rms = s.inliers > 0 ? std::sqrt(sum_sq / static_cast<double>(s.inliers)) : 0.0;
    return s;
}

/// Draw order per point i: a.x a.y a.z b.x b.y b.z.
inline void perturb_points(std::span<const Vec3> pa, std::span<const Vec3> pb, std::span<const Vec3> sa,
                           std::span<const Vec3> sb, Rng& rng, std::vector<Vec3>& out_a,
                           std::vector<Vec3>& out_b) {
    out_a.resize(pa.size());
    out_b.resize(pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (int c = 0; c < 3; ++c) out_a[i][c] = pa[i][c] + sa[i][c] * rng.normal();
        for (int c = 0; c < 3; ++c) out_b[i][c] = pb[i][c] + sb[i][c] * rng.normal();
    }
}

inline TrialOutcome run_trial(const PerturbationBatch& batch, std::size_t n, std::vector<Vec3>& buf_a,
                              std::vector<Vec3>& buf_b) {
    Rng rng(batch.seed, n);
    perturb_points(batch.points_a, batch.points_b, batch.sigmas_a, batch.sigmas_b, rng, buf_a, buf_b);
    TrialOutcome out;
    try {
        out.xi = twist_of(umeyama_align(buf_a, buf_b)).vector();
        out.ok = true;
    } catch (const Error&) {
        out.ok = false;
    }
    return out;
}

}  // namespace rgbd::detail

#include "rgbd/random.hpp"

#include <array>
#include <cmath>

namespace rgbd {

namespace {

std::seed_seq make_seq(std::uint64_t seed, std::uint64_t stream) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

// Ziggurat tables for the standard normal: 128 layers of equal area
// (Doornik's double-precision variant of Marsaglia and Tsang).
constexpr int kLayers = 128;
constexpr double kTailStart = 3.442619855899;
constexpr double kLayerArea = 9.91256303526217e-3;

struct Ziggurat {
    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers> ratio{};

    Ziggurat() {
        double f = std::exp(-0.5 * kTailStart * kTailStart);
        x[0] = kLayerArea / f;
        x[1] = kTailStart;
        x[kLayers] = 0.0;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

const Ziggurat& ziggurat() {
    static const Ziggurat z;
    return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    auto seq = make_seq(seed, stream);
    engine_.seed(seq);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::index(std::uint64_t n) {
    // Rejection on the largest multiple of n keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
}

double Rng::normal() {
    const Ziggurat& z = ziggurat();
    for (;;) {
        const std::uint64_t bits = engine_();
        // Top 53 bits give u in [-1, 1); the low 7 bits pick the layer.
        const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
        const auto i = static_cast<std::size_t>(bits & (kLayers - 1));
        if (std::abs(u) < z.ratio[i]) return u * z.x[i];
        if (i == 0) {
            // Tail beyond kTailStart, by Marsaglia's exponential rejection.
            double t = 0.0;
            double y = 0.0;
            do {
                t = std::log(1.0 - uniform()) / kTailStart;
                y = std::log(1.0 - uniform());
            } while (-2.0 * y < t * t);
            return u < 0.0 ? t - kTailStart : kTailStart - t;
        }
        const double v = u * z.x[i];
        const double f0 = std::exp(-0.5 * (z.x[i] * z.x[i] - v * v));
        const double f1 = std::exp(-0.5 * (z.x[i + 1] * z.x[i + 1] - v * v));
        if (f1 + uniform() * (f0 - f1) < 1.0) return v;
    }
}

}  // namespace rgbd

#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// rgbd::serial and an OpenMP version in rgbd::parallel; both produce
// bit-identical output and the tests hold them to that. The parallel
// versions degrade to the serial loop when built without OpenMP.

#include <cstdint>
#include <span>
#include <vector>

#include "rgbd/geometry.hpp"
#include "rgbd/image.hpp"

namespace rgbd {

enum class Exec { serial, parallel };

/// Row-major |A| x |B| distance table.
template <typename T>
struct DistanceMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> values;

    T operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// A candidate rigid model scored against a correspondence set.
struct HypothesisScore {
    std::size_t inliers = 0;
    double rms = 0.0;
};

/// Inputs for one perturbation trial batch.
struct PerturbationBatch {
    std::span<const Vec3> points_a;
    std::span<const Vec3> points_b;
    std::span<const Vec3> sigmas_a;
    std::span<const Vec3> sigmas_b;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
};

/// Per-trial outcome; `ok == false` marks a degenerate alignment.
struct TrialOutcome {
    Vec6 xi = Vec6::Zero();
    bool ok = false;
};

namespace serial {

/// Segment-test corner response on a 16-pixel Bresenham circle of radius 3.
/// Pixels outside [border, size - border) or with mask == 0 score 0.
Image<float> segment_test_scores(const GrayImage& img, const MaskImage& mask, int threshold,
                                 int arc_length, int border);
/// Unnormalised 5x5 box sum (edge-clamped).
Image<std::uint16_t> box_sum5(const GrayImage& img);
DistanceMatrix<std::uint32_t> hamming_distances(std::span<const std::uint64_t> a,
                                                std::span<const std::uint64_t> b, std::size_t words);
DistanceMatrix<double> euclidean_distances(std::span<const float> a, std::span<const float> b,
                                           std::size_t dims);
std::vector<HypothesisScore> score_hypotheses(std::span<const RigidTransform> models,
                                              std::span<const Vec3> points_a,
                                              std::span<const Vec3> points_b, double threshold);
std::vector<TrialOutcome> perturbation_trials(const PerturbationBatch& batch);

}  // namespace serial

namespace parallel {

Image<float> segment_test_scores(const GrayImage& img, const MaskImage& mask, int threshold,
                                 int arc_length, int border);
Image<std::uint16_t> box_sum5(const GrayImage& img);
DistanceMatrix<std::uint32_t> hamming_distances(std::span<const std::uint64_t> a,
                                                std::span<const std::uint64_t> b, std::size_t words);
DistanceMatrix<double> euclidean_distances(std::span<const float> a, std::span<const float> b,
                                           std::size_t dims);
std::vector<HypothesisScore> score_hypotheses(std::span<const RigidTransform> models,
                                              std::span<const Vec3> points_a,
                                              std::span<const Vec3> points_b, double threshold);
std::vector<TrialOutcome> perturbation_trials(const PerturbationBatch& batch);

}  // namespace parallel

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace rgbd

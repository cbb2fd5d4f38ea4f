#include "kernels_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rgbd {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {

Image<float> segment_test_scores(const GrayImage& img, const MaskImage& mask, int threshold, int arc_length,
                                 int border) {
    Image<float> scores(img.width(), img.height(), 0.0f);
    const int lo = std::max(border, 3);
    const int hi = img.height() - lo;
#pragma omp parallel for schedule(static)
    for (int y = lo; y < hi; ++y) {
        detail::segment_test_row(img, mask, threshold, arc_length, border, y, scores.row(y));
    }
    return scores;
}

Image<std::uint16_t> box_sum5(const GrayImage& img) {
    Image<std::uint16_t> horiz(img.width(), img.height());
    Image<std::uint16_t> out(img.width(), img.height());
    const int h = img.height();
#pragma omp parallel
    {
#pragma omp for schedule(static)
        for (int y = 0; y < h; ++y) detail::box_rows_horizontal(img, y, horiz.row(y));
#pragma omp for schedule(static)
        for (int y = 0; y < h; ++y) detail::box_rows_vertical(horiz, y, out.row(y));
    }
    return out;
}

DistanceMatrix<std::uint32_t> hamming_distances(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                                std::size_t words) {
    DistanceMatrix<std::uint32_t> m;
    m.rows = a.size() / words;
    m.cols = b.size() / words;
    m.values.resize(m.rows * m.cols);
    const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        detail::hamming_row(a, b, words, r, m.cols, m.values.data() + r * m.cols);
    }
    return m;
}

DistanceMatrix<double> euclidean_distances(std::span<const float> a, std::span<const float> b, std::size_t dims) {
    DistanceMatrix<double> m;
    m.rows = a.size() / dims;
    m.cols = b.size() / dims;
    m.values.resize(m.rows * m.cols);
    const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        detail::euclidean_row(a, b, dims, r, m.cols, m.values.data() + r * m.cols);
    }
    return m;
}

std::vector<HypothesisScore> score_hypotheses(std::span<const RigidTransform> models, std::span<const Vec3> points_a,
                                              std::span<const Vec3> points_b, double threshold) {
    std::vector<HypothesisScore> out(models.size());
    const auto count = static_cast<std::ptrdiff_t>(models.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < count; ++m) {
        const auto i = static_cast<std::size_t>(m);
        out[i] = detail::score_model(models[i], points_a, points_b, threshold);
    }
    return out;
}

std::vector<TrialOutcome> perturbation_trials(const PerturbationBatch& batch) {
    std::vector<TrialOutcome> out(batch.trials);
    const auto trials = static_cast<std::ptrdiff_t>(batch.trials);
#pragma omp parallel
    {
        std::vector<Vec3> buf_a;
        std::vector<Vec3> buf_b;
#pragma omp for schedule(static)
        for (std::ptrdiff_t n = 0; n < trials; ++n) {
            const auto i = static_cast<std::size_t>(n);
            out[i] = detail::run_trial(batch, i, buf_a, buf_b);
        }
    }
    return out;
}

}  // namespace parallel
}  // namespace rgbd

#include "kernels_detail.hpp"

namespace rgbd::serial {

Image<float> segment_test_scores(const GrayImage& img, const MaskImage& mask, int threshold, int arc_length,
                                 int border) {
    Image<float> scores(img.width(), img.height(), 0.0f);
    const int lo = std::max(border, 3);
    for (int y = lo; y < img.height() - lo; ++y) {
        detail::segment_test_row(img, mask, threshold, arc_length, border, y, scores.row(y));
    }
    return scores;
}

Image<std::uint16_t> box_sum5(const GrayImage& img) {
    Image<std::uint16_t> horiz(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) detail::box_rows_horizontal(img, y, horiz.row(y));
    Image<std::uint16_t> out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) detail::box_rows_vertical(horiz, y, out.row(y));
    return out;
}

DistanceMatrix<std::uint32_t> hamming_distances(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                                std::size_t words) {
    DistanceMatrix<std::uint32_t> m;
    m.rows = a.size() / words;
    m.cols = b.size() / words;
    m.values.resize(m.rows * m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) detail::hamming_row(a, b, words, i, m.cols, m.values.data() + i * m.cols);
    return m;
}

DistanceMatrix<double> euclidean_distances(std::span<const float> a, std::span<const float> b, std::size_t dims) {
    DistanceMatrix<double> m;
    m.rows = a.size() / dims;
    m.cols = b.size() / dims;
    m.values.resize(m.rows * m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) detail::euclidean_row(a, b, dims, i, m.cols, m.values.data() + i * m.cols);
    return m;
}

std::vector<HypothesisScore> score_hypotheses(std::span<const RigidTransform> models, std::span<const Vec3> points_a,
                                              std::span<const Vec3> points_b, double threshold) {
    std::vector<HypothesisScore> out(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) out[m] = detail::score_model(models[m], points_a, points_b, threshold);
    return out;
}

std::vector<TrialOutcome> perturbation_trials(const PerturbationBatch& batch) {
    std::vector<TrialOutcome> out(batch.trials);
    std::vector<Vec3> buf_a;
    std::vector<Vec3> buf_b;
    for (std::size_t n = 0; n < batch.trials; ++n) out[n] = detail::run_trial(batch, n, buf_a, buf_b);
    return out;
}

}  // namespace rgbd::serial

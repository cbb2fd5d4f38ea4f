#include "rgbd/matching.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <utility>

#include "rgbd/error.hpp"

namespace rgbd {

namespace {

void check_compatible(const FeatureSet& f, const FeatureSet& g) {
    if (f.kind() != g.kind() || f.length() != g.length()) {
        throw Error(ErrorCode::KindMismatch, "feature sets have different descriptor kinds or lengths");
    }
}

/// Calls fn with the full f-by-g distance table: integer Hamming counts for
/// binary descriptors, Euclidean distances for real ones.
template <class Fn>
auto with_distance_table(const FeatureSet& f, const FeatureSet& g, Exec exec, Fn&& fn) {
    check_compatible(f, g);
    if (f.kind() == DescriptorKind::real) {
        const auto dims = static_cast<std::size_t>(f.length());
        return fn(exec == Exec::parallel ? parallel::euclidean_distances(f.real_data(), g.real_data(), dims)
                                         : serial::euclidean_distances(f.real_data(), g.real_data(), dims));
    }
    return fn(exec == Exec::parallel ? parallel::hamming_distances(f.binary_data(), g.binary_data(), f.words())
                                     : serial::hamming_distances(f.binary_data(), g.binary_data(), f.words()));
}

struct Best2 {
    std::size_t best = npos;
    double d1 = std::numeric_limits<double>::infinity();
    std::size_t second = npos;
    double d2 = std::numeric_limits<double>::infinity();

    void offer(std::size_t j, double d) {
        if (d < d1) {
            second = best;
            d2 = d1;
            best = j;
            d1 = d;
        } else if (d < d2) {
            second = j;
            d2 = d;
        }
    }
};

template <class T>
std::vector<Best2> row_neighbors(const DistanceMatrix<T>& m) {
    std::vector<Best2> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const T* row = m.values.data() + i * m.cols;
        Best2& b = out[i];
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (row[j] < b.d2) b.offer(j, static_cast<double>(row[j]));
        }
    }
    return out;
}

template <class T>
std::vector<Best2> column_neighbors(const DistanceMatrix<T>& m) {
    std::vector<Best2> out(m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const T* row = m.values.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (row[j] < out[j].d2) out[j].offer(i, static_cast<double>(row[j]));
        }
    }
    return out;
}

}  // namespace

void MatchConfig::validate() const {
    if (!(lambda_ratio > 0.0 && lambda_ratio < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "lambda_ratio must lie in (0, 1), got " + std::to_string(lambda_ratio));
    }
}

double descriptor_distance(const DescriptorView& a, const DescriptorView& b) {
    if (a.kind != b.kind) throw Error(ErrorCode::KindMismatch, "descriptor kinds differ");
    if (a.kind == DescriptorKind::binary) {
        if (a.bits.size() != b.bits.size()) throw Error(ErrorCode::KindMismatch, "descriptor lengths differ");
        int d = 0;
        for (std::size_t w = 0; w < a.bits.size(); ++w) d += std::popcount(a.bits[w] ^ b.bits[w]);
        return d;
    }
    if (a.values.size() != b.values.size()) throw Error(ErrorCode::KindMismatch, "descriptor lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double diff = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
        s += diff * diff;
    }
    return std::sqrt(s);
}

Neighbors knn2(const DescriptorView& query, const FeatureSet& set) {
    if (set.size() < 2) throw Error(ErrorCode::TooFewCandidates, "need at least 2 candidates");
    if (query.kind != set.kind()) throw Error(ErrorCode::KindMismatch, "query kind differs from set kind");
    Best2 b;
    for (std::size_t j = 0; j < set.size(); ++j) b.offer(j, descriptor_distance(query, set.descriptor(j)));
    return {b.best, b.d1, b.second, b.d2};
}

bool passes_ratio(double d1, double d2, double lambda) {
    if (!(d2 > 0.0)) return false;
    return d1 / d2 <= lambda;
}

std::vector<std::size_t> ratio_match(const FeatureSet& f, const FeatureSet& g, const MatchConfig& cfg) {
    if (g.size() < 2) throw Error(ErrorCode::TooFewCandidates, "need at least 2 candidates");
    const auto rows = with_distance_table(f, g, cfg.exec, [](const auto& t) { return row_neighbors(t); });
    std::vector<std::size_t> out(f.size(), npos);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (passes_ratio(rows[i].d1, rows[i].d2, cfg.lambda_ratio)) out[i] = rows[i].best;
    }
    return out;
}

std::vector<Match> symmetric_ratio_match(const FeatureSet& f, const FeatureSet& g, const MatchConfig& cfg) {
    if (f.size() < 2 || g.size() < 2) throw Error(ErrorCode::TooFewCandidates, "need at least 2 candidates per side");
    const auto [forward, backward] = with_distance_table(f, g, cfg.exec, [](const auto& t) {
        return std::pair{row_neighbors(t), column_neighbors(t)};
    });
    std::vector<Match> out;
    for (std::size_t i = 0; i < forward.size(); ++i) {
        const Best2& fw = forward[i];
        if (!passes_ratio(fw.d1, fw.d2, cfg.lambda_ratio)) continue;
        const Best2& bw = backward[fw.best];
        if (bw.best != i || !passes_ratio(bw.d1, bw.d2, cfg.lambda_ratio)) continue;
        out.push_back({i, fw.best, fw.d1, fw.d2, bw.d2});
    }
    return out;
}

}  // namespace rgbd

#pragma once

#include <cstddef>
#include <vector>

#include "rgbd/features.hpp"

namespace rgbd {

struct MatchConfig {
    double lambda_ratio = 0.8;
    Exec exec = Exec::parallel;

    /// Throws Error(InvalidConfig) unless 0 < lambda_ratio < 1.
    void validate() const;
};

/// A mutual correspondence F[index_a] <-> G[index_b]. d1 is their distance;
/// d2 and d2_reverse are the second-best distances seen from each side.
struct Match {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d2_reverse = 0.0;
};

struct Neighbors {
    std::size_t best = 0;
    double d1 = 0.0;
    std::size_t second = 0;
    double d2 = 0.0;
};

/// Hamming distance for binary kind, Euclidean for real kind.
double descriptor_distance(const DescriptorView& a, const DescriptorView& b);

/// Two nearest neighbours of `query` in `set`; ties resolve to the lower index.
/// Throws TooFewCandidates (|set| < 2) or KindMismatch.
Neighbors knn2(const DescriptorView& query, const FeatureSet& set);

/// Lowe's ratio test, closed form: accept iff d2 > 0 and d1 / d2 <= lambda.
bool passes_ratio(double d1, double d2, double lambda);

/// Directional matches F -> G; entry i is G's index for F[i] or npos.
inline constexpr std::size_t npos = static_cast<std::size_t>(-1);
std::vector<std::size_t> ratio_match(const FeatureSet& f, const FeatureSet& g, const MatchConfig& cfg);

/// Pairs accepted by the ratio test in both directions, ordered by index_a.
std::vector<Match> symmetric_ratio_match(const FeatureSet& f, const FeatureSet& g,
                                         const MatchConfig& cfg);

}  // namespace rgbd

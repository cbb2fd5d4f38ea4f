#include <doctest.h>

#include <algorithm>
#include <set>

#include "rgbd/error.hpp"
#include "rgbd/matching.hpp"
#include "support.hpp"

using namespace rgbd;

namespace {

FeatureSet random_binary(Rng& rng, std::size_t n) {
    FeatureSet s(DescriptorKind::binary, 256);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<std::uint64_t, 4> bits{rng.next(), rng.next(), rng.next(), rng.next()};
        s.add_binary({double(i), 0.0, 1.0, 2.0}, bits);
    }
    return s;
}

// Noisy copy: each bit flips with probability p, order shuffled-free.
FeatureSet flipped_copy(Rng& rng, const FeatureSet& s, double p) {
    FeatureSet out(DescriptorKind::binary, 256);
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::array<std::uint64_t, 4> bits{};
        std::copy(s.descriptor(i).bits.begin(), s.descriptor(i).bits.end(), bits.begin());
        for (int b = 0; b < 256; ++b)
            if (rng.uniform() < p) bits[b / 64] ^= std::uint64_t{1} << (b % 64);
        out.add_binary(s.keypoint(i), bits);
    }
    return out;
}

// Exhaustive linear-scan oracle for the two nearest neighbours.
std::pair<std::pair<std::size_t, double>, std::pair<std::size_t, double>> brute2(const DescriptorView& q,
                                                                                 const FeatureSet& set) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < set.size(); ++j) all.emplace_back(descriptor_distance(q, set.descriptor(j)), j);
    std::stable_sort(all.begin(), all.end());
    return {{all[0].second, all[0].first}, {all[1].second, all[1].first}};
}

std::vector<std::size_t> brute_directional(const FeatureSet& f, const FeatureSet& g, double lambda) {
    std::vector<std::size_t> out(f.size(), npos);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto [b1, b2] = brute2(f.descriptor(i), g);
        if (b2.second > 0 && b1.second / b2.second <= lambda) out[i] = b1.first;
    }
    return out;
}

}  // namespace

TEST_CASE("ratio test examples") {
    CHECK(passes_ratio(1.0, 2.0, 0.8));
    CHECK_FALSE(passes_ratio(0.9, 1.0, 0.8));
    CHECK_FALSE(passes_ratio(0.0, 0.0, 0.8));
    CHECK(passes_ratio(0.0, 1.0, 0.8));
    // With 0.8 the runner-up must be at least 25% farther than the best.
    CHECK(passes_ratio(100.0, 125.0, 0.8));
    CHECK_FALSE(passes_ratio(100.0, 124.9, 0.8));
}

TEST_CASE("match config validation") {
    MatchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    for (double bad : {0.0, 1.0, 1.5, -0.1}) {
        cfg.lambda_ratio = bad;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
}

TEST_CASE("knn2 examples") {
    Rng rng(1);
    FeatureSet set(DescriptorKind::binary, 256);
    const std::array<std::uint64_t, 4> q{0, 0, 0, 0};
    set.add_binary({}, std::array<std::uint64_t, 4>{0xFFFF, 0, 0, 0});  // 16
    set.add_binary({}, q);                                              // 0
    set.add_binary({}, std::array<std::uint64_t, 4>{0x3FF, 0, 0, 0});   // 10
    FeatureSet query(DescriptorKind::binary, 256);
    query.add_binary({}, q);
    const Neighbors n = knn2(query.descriptor(0), set);
    CHECK(n.best == 1);
    CHECK(n.d1 == 0.0);
    CHECK(n.second == 2);
    CHECK(n.d2 == 10.0);

    FeatureSet two(DescriptorKind::binary, 256);
    two.add_binary({}, std::array<std::uint64_t, 4>{0xF, 0, 0, 0});
    two.add_binary({}, std::array<std::uint64_t, 4>{0x1, 0, 0, 0});
    const Neighbors m = knn2(query.descriptor(0), two);
    CHECK(m.best == 1);
    CHECK(m.second == 0);
    CHECK(m.d1 <= m.d2);

    FeatureSet one(DescriptorKind::binary, 256);
    one.add_binary({}, q);
    CHECK_THROWS_AS(knn2(query.descriptor(0), one), Error);
    FeatureSet real(DescriptorKind::real, 4);
    CHECK_THROWS_AS(knn2(query.descriptor(0), real), Error);
    (void)rng;
}

TEST_CASE("property: knn2 equals the exhaustive scan on random 200-element sets") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureSet set = random_binary(rng, 200);
        const FeatureSet queries = random_binary(rng, 20);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const Neighbors n = knn2(queries.descriptor(i), set);
            const auto [b1, b2] = brute2(queries.descriptor(i), set);
            CHECK(n.best == b1.first);
            CHECK(n.d1 == b1.second);
            CHECK(n.second == b2.first);
            CHECK(n.d2 == b2.second);
        }
    }
    // Real-valued descriptors.
    FeatureSet rs(DescriptorKind::real, 8);
    FeatureSet rq(DescriptorKind::real, 8);
    for (int i = 0; i < 200; ++i) {
        std::array<float, 8> v{};
        for (auto& x : v) x = static_cast<float>(rng.normal());
        rs.add_real({}, v);
        if (i < 10) {
            for (auto& x : v) x = static_cast<float>(rng.normal());
            rq.add_real({}, v);
        }
    }
    for (std::size_t i = 0; i < rq.size(); ++i) {
        const Neighbors n = knn2(rq.descriptor(i), rs);
        const auto [b1, b2] = brute2(rq.descriptor(i), rs);
        CHECK(n.best == b1.first);
        CHECK(n.d1 == doctest::Approx(b1.second));
        CHECK(n.second == b2.first);
    }
}

TEST_CASE("symmetric matching: identical well-separated sets give the identity pairing") {
    Rng rng(3);
    const FeatureSet f = random_binary(rng, 100);
    const auto m = symmetric_ratio_match(f, f, {});
    REQUIRE(m.size() == 100);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(m[i].index_a == i);
        CHECK(m[i].index_b == i);
        CHECK(m[i].d1 == 0.0);
    }
}

TEST_CASE("symmetric matching rejects non-mutual pairs") {
    // f0 -> g0 is f0's best, but g0's best is f1.
    FeatureSet f(DescriptorKind::binary, 256);
    FeatureSet g(DescriptorKind::binary, 256);
    using W = std::array<std::uint64_t, 4>;
    f.add_binary({}, W{0x0, 0, 0, 0});                     // f0
    f.add_binary({}, W{0xF, 0, 0, 0});                     // f1 (4 from g0)
    f.add_binary({}, W{~0ull, ~0ull, ~0ull, ~0ull});        // f2 far from everything
    g.add_binary({}, W{0xFF, 0, 0, 0});                    // g0: 8 from f0, 4 from f1
    g.add_binary({}, W{0xFFFFFFFFFFull, ~0ull, 0, 0});      // g1 far
    g.add_binary({}, W{0, 0, ~0ull, ~0ull});                // g2 far
    const auto directional = ratio_match(f, g, {});
    CHECK(directional[0] == 0);
    const auto m = symmetric_ratio_match(f, g, {});
    for (const Match& x : m) CHECK_FALSE((x.index_a == 0 && x.index_b == 0));
}

TEST_CASE("property: symmetric matches equal the intersection of exhaustive directional matches") {
    Rng rng(4);
    for (int trial = 0; trial < 15; ++trial) {
        const FeatureSet f = random_binary(rng, 150);
        FeatureSet g = flipped_copy(rng, f, 0.1 + 0.02 * trial);
        // Add distractors so that some rows are ambiguous.
        const FeatureSet extra = random_binary(rng, 50);
        for (std::size_t i = 0; i < extra.size(); ++i) g.add_binary(extra.keypoint(i), extra.descriptor(i).bits);

        const double lambda = 0.8;
        const auto fg = brute_directional(f, g, lambda);
        const auto gf = brute_directional(g, f, lambda);
        std::set<std::pair<std::size_t, std::size_t>> expected;
        for (std::size_t i = 0; i < fg.size(); ++i)
            if (fg[i] != npos && gf[fg[i]] == i) expected.emplace(i, fg[i]);

        std::set<std::pair<std::size_t, std::size_t>> got;
        for (const Match& m : symmetric_ratio_match(f, g, {lambda, Exec::parallel})) got.emplace(m.index_a, m.index_b);
        CHECK(got == expected);
        std::set<std::pair<std::size_t, std::size_t>> got_serial;
        for (const Match& m : symmetric_ratio_match(f, g, {lambda, Exec::serial})) got_serial.emplace(m.index_a, m.index_b);
        CHECK(got_serial == expected);
        CHECK(ratio_match(f, g, {lambda, Exec::serial}) == fg);
    }
}

TEST_CASE("matching errors") {
    Rng rng(5);
    const FeatureSet a = random_binary(rng, 10);
    const FeatureSet one = random_binary(rng, 1);
    CHECK_THROWS_AS(symmetric_ratio_match(a, one, {}), Error);
    FeatureSet real(DescriptorKind::real, 4);
    std::array<float, 4> v{1, 2, 3, 4};
    real.add_real({}, v);
    real.add_real({}, v);
    try {
        symmetric_ratio_match(a, real, {});
        FAIL("expected KindMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KindMismatch);
    }
}

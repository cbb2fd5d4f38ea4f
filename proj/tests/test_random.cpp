#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "rgbd/random.hpp"

using rgbd::Rng;

TEST_CASE("streams are reproducible and distinct") {
    Rng a(7, 3);
    Rng b(7, 3);
    Rng c(7, 4);
    Rng d(8, 3);
    bool differs_c = false;
    bool differs_d = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        CHECK(va == b.next());
        differs_c |= va != c.next();
        differs_d |= va != d.next();
    }
    CHECK(differs_c);
    CHECK(differs_d);
}

TEST_CASE("uniform and index ranges") {
    Rng rng(1);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const double u = rng.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        ++counts[rng.index(7)];
    }
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
    CHECK(rng.index(1) == 0);
}

TEST_CASE("normal: moments and tail mass of a standard Gaussian") {
    Rng rng(2);
    const int n = 1000000;
    double m1 = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    int beyond1 = 0;
    int beyond3 = 0;
    int beyond_tail = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        m1 += z;
        m2 += z * z;
        m3 += z * z * z;
        m4 += z * z * z * z;
        beyond1 += std::abs(z) > 1.0;
        beyond3 += std::abs(z) > 3.0;
        beyond_tail += std::abs(z) > 3.5;  // exercises the tail sampler
    }
    CHECK(std::abs(m1 / n) < 5e-3);
    CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(m3 / n) < 0.02);
    CHECK(m4 / n == doctest::Approx(3.0).epsilon(0.03));
    // P(|z| > 1) = 0.3173, P(|z| > 3) = 0.0027, P(|z| > 3.5) = 4.65e-4
    CHECK(beyond1 / double(n) == doctest::Approx(0.3173).epsilon(0.01));
    CHECK(beyond3 / double(n) == doctest::Approx(0.0027).epsilon(0.06));
    CHECK(beyond_tail / double(n) == doctest::Approx(4.65e-4).epsilon(0.1));
}

TEST_CASE("normal: histogram matches the Gaussian density") {
    Rng rng(3);
    const int n = 400000;
    std::vector<int> bins(16, 0);  // width 0.5 over [-4, 4)
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        if (z >= -4.0 && z < 4.0) ++bins[static_cast<std::size_t>((z + 4.0) / 0.5)];
    }
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    for (std::size_t b = 0; b < bins.size(); ++b) {
        const double lo = -4.0 + 0.5 * static_cast<double>(b);
        const double expected = n * (cdf(lo + 0.5) - cdf(lo));
        if (expected < 100) continue;
        CHECK(std::abs(bins[b] - expected) < 5.0 * std::sqrt(expected));
    }
}

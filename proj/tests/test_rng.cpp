#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "hsi/rng.hpp"

using namespace hsi;

TEST_SUITE_BEGIN("rng");

TEST_CASE("same seed gives the same stream, different seeds differ") {
    Rng a(42), b(42), c(43);
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
        if (va != c.next_u64()) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("uniform_int is inclusive and in range") {
    Rng rng(7);
    std::set<int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const int64_t v = rng.uniform_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);  // both endpoints reachable
    CHECK(rng.uniform_int(5, 5) == 5);
}

TEST_CASE("next_double lies in [0, 1)") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("normal draws have the right moments") {
    Rng rng(1234);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("normal(mean, sigma) shifts and scales") {
    Rng rng(5);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) sum += rng.normal(3.0, 0.5);
    CHECK(std::abs(sum / 20000 - 3.0) < 0.02);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(9);
    a.shuffle(v);
    Rng b(9);
    b.shuffle(w);
    CHECK(v == w);

    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);

    std::vector<int> u(50);
    std::iota(u.begin(), u.end(), 0);
    Rng c(10);
    c.shuffle(u);
    CHECK(u != v);
}

TEST_CASE("derive_seed depends on every path element and its order") {
    const uint64_t root = 99;
    CHECK(derive_seed(root, {1, 2}) == derive_seed(root, {1, 2}));
    CHECK(derive_seed(root, {1, 2}) != derive_seed(root, {2, 1}));
    CHECK(derive_seed(root, {1}) != derive_seed(root, {2}));
    CHECK(derive_seed(root, {1}) != derive_seed(root + 1, {1}));
    CHECK(derive_seed(root, {}) == root);
}

TEST_SUITE_END();

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "rng.hpp"

using namespace scfm;

TEST_CASE("raw stream matches the reference generator") {
    for (uint64_t seed : {0ULL, 1ULL, 42ULL, 0xDEADBEEFULL}) {
        Rng rng(seed);
        oracle::Xoshiro256pp ref(seed);
        for (int i = 0; i < 1000; ++i) CHECK(rng.next_u64() == ref.next());
    }
}

TEST_CASE("splitmix64 matches the reference step") {
    uint64_t a = 12345, b = 12345;
    for (int i = 0; i < 100; ++i) CHECK(splitmix64(a) == oracle::splitmix64_next(b));
}

TEST_CASE("name hash matches the reference FNV-1a") {
    for (const char* s : {"", "data", "noise", "projections", "a long substream name"})
        CHECK(fnv1a64(s) == oracle::fnv1a64_ref(s));
}

TEST_CASE("substreams are seeded from the hashed name") {
    uint64_t master = 99;
    Rng sub = Rng::substream(master, "triples");
    Rng direct(master ^ oracle::fnv1a64_ref("triples"));
    for (int i = 0; i < 100; ++i) CHECK(sub.next_u64() == direct.next_u64());
}

TEST_CASE("distinct names give distinct streams, same name replays") {
    Rng a = Rng::substream(7, "data");
    Rng b = Rng::substream(7, "noise");
    Rng a2 = Rng::substream(7, "data");
    int diff = 0;
    for (int i = 0; i < 64; ++i) {
        uint64_t va = a.next_u64();
        if (va != b.next_u64()) ++diff;
        CHECK(va == a2.next_u64());
    }
    CHECK(diff > 60);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
    Rng rng(3);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("ranged uniform respects its bounds") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        double u = rng.uniform(2.5, 4.5);
        CHECK(u >= 2.5);
        CHECK(u < 4.5);
    }
}

TEST_CASE("uniform_int is unbiased over a small modulus") {
    Rng rng(5);
    int counts[7] = {0};
    const int draws = 70000;
    for (int i = 0; i < draws; ++i) ++counts[rng.uniform_int(7)];
    for (int c : counts) CHECK(std::abs(c - draws / 7) < 500);
}

TEST_CASE("gaussian moments match a standard normal") {
    Rng rng(6);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gaussians vector equals sequential draws") {
    Rng a(8), b(8);
    auto v = a.gaussians(64);
    for (double x : v) CHECK(x == b.gaussian());
}

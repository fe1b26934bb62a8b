#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace scfm {

// splitmix64 step: advances `state` and returns the next output word.
uint64_t splitmix64(uint64_t& state);

// FNV-1a 64-bit hash, used to derive named substream seeds.
uint64_t fnv1a64(std::string_view s);

// xoshiro256++ generator. Every sampled quantity in a run comes from a
// named substream so that experiments replay exactly from one master seed.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed);

    // Substream for `name`, derived via splitmix64 of the name hash mixed
    // with the master seed. Streams with distinct names are independent.
    static Rng substream(uint64_t master_seed, std::string_view name);

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Box-Muller (pair-cached, deterministic).
    double gaussian();

    std::vector<double> gaussians(size_t count);

private:
    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace scfm

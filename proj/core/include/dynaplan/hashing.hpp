#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dynaplan {

// Seeded FNV-1a over bytes. The seed is folded into the offset basis so the
// same key hashes differently under different model seeds.
constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

constexpr uint64_t fnv1a64(std::string_view data, uint64_t seed = 0) {
    uint64_t h = kFnvOffset ^ (seed * kFnvPrime);
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d2b742d9c2fae3ULL;
    return x ^ (x >> 31);
}

// Seed for run `run_index` of task `task_id` under a stage-level seed.
inline uint64_t derive_seed(uint64_t base, std::string_view task_id, uint64_t run_index = 0) {
    return mix64(base ^ mix64(fnv1a64(task_id) + run_index));
}

// Thin wrapper over mt19937_64 that avoids std distributions: their output is
// implementation-defined, and artifacts here must be bit-stable across
// standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, n) via rejection sampling.
    uint64_t below(uint64_t n) {
        if (n == 0) { return 0; }
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = gen_();
        while (v >= limit) { v = gen_(); }
        return v % n;
    }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Samples an index from unnormalized non-negative weights.
    size_t weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) { total += w; }
        if (total <= 0.0) { return 0; }
        double r = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) { return i; }
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 gen_;
};

// Hex rendering used for content hashes in manifests.
std::string to_hex(uint64_t v);

}  // namespace dynaplan

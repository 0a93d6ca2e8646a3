#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace clmx {

// mt19937_64 with hand-rolled output mappings, so that streams of samples
// are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // geometric with support {1, 2, ...} and the given mean (>= 1)
    int geometric(double mean) {
        if (mean <= 1.0) return 1;
        double p = 1.0 / mean;
        double u = uniform();
        // inverse CDF; u in [0,1) keeps the log argument positive
        int k = 1 + static_cast<int>(std::log1p(-u) / std::log1p(-p));
        return k < 1 ? 1 : k;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace clmx

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace surge {

// Seeded RNG with explicit draw formulas. std::uniform_*_distribution and
// std::shuffle are implementation-defined, so all randomness that must be
// reproducible bit-for-bit goes through this wrapper.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint32_t next_u32() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return gen_() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at our n.
    uint32_t below(uint32_t n) { return n ? gen_() % n : 0; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = below(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 gen_;
};

}  // namespace surge

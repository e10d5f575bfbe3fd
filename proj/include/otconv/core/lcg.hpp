#pragma once

#include <cstdint>

namespace otconv {

// 64-bit linear congruential generator used by every seeded preset.
//
//   state_{k+1} = state_k * 6364136223846793005 + 1442695040888963407  (mod 2^64)
//   uniform()   = (state_{k+1} >> 11) * 2^-53
//
// The initial state is the seed itself. Reimplementations in other languages
// reproduce the initial data of any preset bit-exactly from this definition.
class Lcg64 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * kMultiplier + kIncrement;
        return state_;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace otconv

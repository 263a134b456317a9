#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sibe {

// Counter-based deterministic generator. Every draw is a hash of
// (key, counter), so a stream is reproducible from its seed alone and
// child streams forked by label are independent of how many draws the
// parent has made.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Child stream whose key depends only on this stream's key and the
    // label. Forking is order-insensitive: fork("a") then fork("b")
    // yields the same pair as fork("b") then fork("a").
    Rng fork(std::string_view label) const;
    Rng fork(std::string_view label, std::uint64_t index) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller. Two uniforms per draw, no cached
    // spare, so the draw count per call is fixed.
    double normal();
    double normal(double mu, double sigma);

    std::vector<double> normal_vector(std::size_t n);

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace sibe

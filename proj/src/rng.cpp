#include "sibe/rng.hpp"

#include <cmath>
#include <numbers>

#include "sibe/errors.hpp"

namespace sibe {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(splitmix64(splitmix64(seed) ^ 0xA02BDBF7BB3C0A7ULL)) {}

Rng Rng::fork(std::string_view label) const {
    std::uint64_t child = splitmix64(key_ ^ splitmix64(fnv1a(label)));
    return Rng(child, 0);
}

Rng Rng::fork(std::string_view label, std::uint64_t index) const {
    std::uint64_t child = splitmix64(key_ ^ splitmix64(fnv1a(label) + kGolden * (index + 1)));
    return Rng(child, 0);
}

std::uint64_t Rng::next_u64() {
    return splitmix64(key_ ^ splitmix64(counter_++));
}

double Rng::uniform() {
    // 53-bit mantissa in [0, 1).
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ValueError("uniform_int: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mu, double sigma) {
    return mu + sigma * normal();
}

std::vector<double> Rng::normal_vector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal();
    return out;
}

}  // namespace sibe

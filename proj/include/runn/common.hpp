#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace runn {

/// Variational form the solver is working in.
enum class Formulation { strong, weak, ultraweak };

inline const char* to_string(Formulation f) {
    switch (f) {
        case Formulation::strong: return "strong";
        case Formulation::weak: return "weak";
        case Formulation::ultraweak: return "ultraweak";
    }
    return "unknown";
}

/// Closed 1D interval.
struct Interval {
    double a = -1.0;
    double b = 1.0;

    double length() const { return b - a; }
    double midpoint() const { return 0.5 * (a + b); }
    bool contains(double x) const { return x >= a && x <= b; }
};

// Error taxonomy. ConfigError: bad user-supplied settings. ContractError:
// a caller broke an API precondition. NumericError: non-finite data or a
// failed solve at runtime. SequencingError: an operation ran before the
// artifact it consumes exists.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SequencingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace rng {

/// splitmix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-stream seed from (seed, salt...). Same inputs, same
/// output, on every platform.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t s0, std::uint64_t s1 = 0x51ed270b418f30ULL,
                            std::uint64_t s2 = 0x9f74a2c315ULL) {
    std::uint64_t h = mix(seed);
    h = mix(h ^ (s0 + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ (s1 + 0xbf58476d1ce4e5b9ULL));
    h = mix(h ^ (s2 + 0x94d049bb133111ebULL));
    return h;
}

/// Seeded random stream with hand-rolled double conversion so draws are
/// bit-identical across standard libraries.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Box-Muller; one normal per call, spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double mag = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rng

}  // namespace runn

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ltl {

using HubId = std::string;

inline constexpr double kHoursPerYear = 8760.0;
inline constexpr double kPoundsPerTon = 2000.0;

// Domain errors map to exit status 1, I/O and configuration errors to 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept = 0;
};

class DomainError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `stream`, item `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

/// Seeded random source. The draw functions are written out instead of using
/// <random> distributions so that sequences do not depend on the standard
/// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [low, high).
    double uniform(double low, double high) { return low + (high - low) * uniform01(); }

    /// Uniform integer on [low, high). Requires low < high.
    std::int64_t uniform_int(std::int64_t low, std::int64_t high) {
        const auto span = static_cast<std::uint64_t>(high - low);
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return low + static_cast<std::int64_t>(x % span);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace ltl

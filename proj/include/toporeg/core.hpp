#pragma once

// Shared vocabulary: error types, diagnostics, angle helpers and seeding.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace toporeg {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration.
struct ValidationError : Error {
    using Error::Error;
};

/// Malformed text input. Message carries the offending position.
struct ParseError : Error {
    using Error::Error;
};

/// Versioned on-disk formats: version, checksum or truncation problems.
struct FormatError : Error {
    using Error::Error;
};

/// Non-finite loss during training.
struct TrainingError : Error {
    using Error::Error;
};

/// Non-fatal events reported alongside a result (clamping, degenerate
/// directions, coarse quadrature grids, zero-variance features).
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
    bool empty() const noexcept { return warnings.empty(); }
    void merge(const Diagnostics& other) {
        warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
    }
};

inline double deg_to_rad(double deg) noexcept { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Maps any angle into [0, 2*pi).
inline double wrap_two_pi(double a) noexcept {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

/// SplitMix64 finalizer. Used to derive independent per-sample and
/// per-epoch seeds from one master seed, so results do not depend on
/// evaluation order.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master ^ mix_seed(stream)) ^ index);
}

}  // namespace toporeg

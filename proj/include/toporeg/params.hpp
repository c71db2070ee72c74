#pragma once

// Loop-shape parameters and the intervals they are drawn from.
//
// Angles are radians internally. Text and file boundaries use degrees.

#include <array>
#include <cmath>
#include <string>

#include "toporeg/core.hpp"

namespace toporeg {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const noexcept { return hi - lo; }
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
    bool pinned() const noexcept { return lo == hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr double kDefaultCMin = -0.05;
inline constexpr double kDefaultCMax = 0.05;

/// Point of the (alpha, c) strip. alpha in [0, pi), c in [c_min, c_max].
struct MoebiusCoords {
    double alpha = 0.0;
    double c = 0.0;
};

/// theta = (x_c, y_c, F, sigma, eps, alpha, c). sigma is the FWHM.
struct LoopParams {
    double x_c = 0.0;    // arcsec
    double y_c = 0.0;    // arcsec
    double flux = 1.0;   // total counts
    double sigma = 1.0;  // FWHM, arcsec
    double eps = 0.0;    // eccentricity
    double alpha = 0.0;  // radians, [0, pi)
    double c = 0.0;      // curvature

    static constexpr std::size_t kSize = 7;
    static constexpr std::array<const char*, kSize> kNames = {"x_c", "y_c", "F", "sigma",
                                                              "eps", "alpha", "c"};

    std::array<double, kSize> to_array() const noexcept {
        return {x_c, y_c, flux, sigma, eps, alpha, c};
    }
    static LoopParams from_array(const std::array<double, kSize>& a) noexcept {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
    }

    MoebiusCoords strip() const noexcept { return {alpha, c}; }

    friend bool operator==(const LoopParams&, const LoopParams&) = default;
};

/// Per-parameter intervals of the parameter space. alpha is always [0, pi).
struct LoopIntervals {
    Interval x_c{-50.0, 50.0};
    Interval y_c{-50.0, 50.0};
    Interval flux{500.0, 5000.0};
    Interval sigma{4.0, 20.0};
    Interval eps{0.0, 5.0};
    Interval alpha{0.0, kPi};
    Interval c{kDefaultCMin, kDefaultCMax};

    std::array<Interval, LoopParams::kSize> to_array() const {
        return {x_c, y_c, flux, sigma, eps, alpha, c};
    }

    friend bool operator==(const LoopIntervals&, const LoopIntervals&) = default;
};

/// Throws ValidationError if theta violates the parameter-space invariants.
inline void validate(const LoopParams& p) {
    for (double v : p.to_array()) {
        if (!std::isfinite(v)) throw ValidationError("loop parameters must be finite");
    }
    if (p.flux <= 0.0) throw ValidationError("flux must be positive");
    if (p.sigma <= 0.0) throw ValidationError("sigma (FWHM) must be positive");
    if (p.eps < 0.0) throw ValidationError("eccentricity must be non-negative");
    if (p.alpha < 0.0 || p.alpha >= kPi)
        throw ValidationError("alpha must lie in [0, pi) radians");
    if (p.eps == 0.0 && (p.alpha != 0.0 || p.c != 0.0))
        throw ValidationError("a circular shape (eps = 0) must have alpha = 0 and c = 0");
}

}  // namespace toporeg

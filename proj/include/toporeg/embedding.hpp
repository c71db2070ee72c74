#pragma once

// Analytic embeddings of parameter spaces with non-Euclidean topology into
// Euclidean space, and inverses that stay total on off-manifold points.
//
//   circle:  theta in [0, 2pi)          -> (cos theta, sin theta)
//   strip:   (alpha, c)                 -> Moebius strip in R^3
//   loop:    (x_c, y_c, F, sigma, eps,  -> R^8, strip coordinates scaled by eps
//             alpha, c)
//
// The strip identifies (0, c) with (pi, -c), which is exactly the pair of
// loop shapes that coincide.

#include <array>
#include <cmath>
#include <concepts>
#include <span>

#include "toporeg/core.hpp"
#include "toporeg/params.hpp"

namespace toporeg {

struct EmbeddedPoint3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    std::array<double, 3> to_array() const noexcept { return {x, y, z}; }
    friend bool operator==(const EmbeddedPoint3&, const EmbeddedPoint3&) = default;
};

struct EmbeddedPoint8 {
    std::array<double, 5> s{};  // x_c, y_c, F, sigma, eps
    std::array<double, 3> t{};  // eps * gamma(alpha, c)

    std::array<double, 8> to_array() const noexcept {
        return {s[0], s[1], s[2], s[3], s[4], t[0], t[1], t[2]};
    }
    static EmbeddedPoint8 from_span(std::span<const double> v) {
        EmbeddedPoint8 p;
        for (int i = 0; i < 5; ++i) p.s[i] = v[i];
        for (int i = 0; i < 3; ++i) p.t[i] = v[5 + i];
        return p;
    }
    friend bool operator==(const EmbeddedPoint8&, const EmbeddedPoint8&) = default;
};

struct CircleParam {
    double theta = 0.0;  // radians, [0, 2pi)
};

/// Below this eccentricity the strip coordinates of a loop embedding are
/// treated as undefined and the shape is read as circular.
inline constexpr double kEpsTol = 1e-3;

inline std::array<double, 2> circle_embed(CircleParam t) noexcept {
    return {std::cos(t.theta), std::sin(t.theta)};
}

inline CircleParam circle_inv(double x, double y, Diagnostics* diag = nullptr) {
    if (x == 0.0 && y == 0.0) {
        if (diag) diag->warn("circle_inv: zero vector has no direction; returning theta = 0");
        return {0.0};
    }
    return {wrap_two_pi(std::atan2(y, x))};
}

inline EmbeddedPoint3 gamma(MoebiusCoords m) noexcept {
    const double radius = 1.0 + m.c * std::sin(m.alpha);
    return {radius * std::cos(2.0 * m.alpha), radius * std::sin(2.0 * m.alpha),
            m.c * std::cos(m.alpha)};
}

/// Inverse of gamma, extended to all of R^3.
///
/// alpha comes from the polar angle of (x, y), halved into [0, pi). c is the
/// projection of (r - 1, z) onto the strip's ruling direction
/// (sin alpha, cos alpha); on the strip this equals z / cos(alpha) but it has
/// no pole at alpha = pi/2.
inline MoebiusCoords gamma_inv(const EmbeddedPoint3& p, Diagnostics* diag = nullptr) {
    if (p.x == 0.0 && p.y == 0.0) {
        if (diag) diag->warn("gamma_inv: (x, y) = (0, 0) has no direction; returning alpha = 0");
        return {0.0, p.z};
    }
    double alpha = 0.5 * wrap_two_pi(std::atan2(p.y, p.x));
    if (alpha >= kPi) alpha = 0.0;
    const double r = std::hypot(p.x, p.y);
    const double c = p.z * std::cos(alpha) + (r - 1.0) * std::sin(alpha);
    return {alpha, c};
}

/// Distance between two strip points measured through the embedding, so
/// identified pairs are at distance zero.
inline double moebius_distance(MoebiusCoords a, MoebiusCoords b) noexcept {
    const auto ga = gamma(a);
    const auto gb = gamma(b);
    return std::sqrt((ga.x - gb.x) * (ga.x - gb.x) + (ga.y - gb.y) * (ga.y - gb.y) +
                     (ga.z - gb.z) * (ga.z - gb.z));
}

inline EmbeddedPoint8 gamma_g(const LoopParams& p) noexcept {
    const auto g = gamma(p.strip());
    return {{p.x_c, p.y_c, p.flux, p.sigma, p.eps}, {p.eps * g.x, p.eps * g.y, p.eps * g.z}};
}

/// Lower bounds applied by gamma_g_inv to predicted flux, FWHM and
/// eccentricity. The defaults only enforce positivity.
struct PositivityFloor {
    double flux = 1e-6;
    double sigma = 1e-6;
    double eps = 0.0;
};

/// Inverse of gamma_g. Total on R^8: eps below kEpsTol selects the circular
/// branch, and negative flux, FWHM or eccentricity are raised to the floor.
inline LoopParams gamma_g_inv(const EmbeddedPoint8& p, const PositivityFloor& floor = {},
                              Diagnostics* diag = nullptr) {
    LoopParams out;
    out.x_c = p.s[0];
    out.y_c = p.s[1];
    out.flux = p.s[2];
    out.sigma = p.s[3];
    out.eps = p.s[4];
    auto raise = [&](double& v, double lo, const char* name) {
        if (v < lo) {
            if (diag) diag->warn(std::string("gamma_g_inv: clamped ") + name + " to its minimum");
            v = lo;
        }
    };
    raise(out.flux, floor.flux, "F");
    raise(out.sigma, floor.sigma, "sigma");

    if (p.s[4] < kEpsTol) {
        raise(out.eps, floor.eps, "eps");
        out.alpha = 0.0;
        out.c = 0.0;
        return out;
    }
    const double inv = 1.0 / p.s[4];
    const auto m = gamma_inv({p.t[0] * inv, p.t[1] * inv, p.t[2] * inv}, diag);
    out.alpha = m.alpha;
    out.c = m.c;
    return out;
}

// A small embedding interface so other parameter spaces can be added next to
// the circle and the loop family.
template <class E>
concept Embedding = requires(const typename E::Param& p, std::span<const double> v,
                             Diagnostics* d) {
    { E::kDim } -> std::convertible_to<std::size_t>;
    { E::embed(p) } -> std::convertible_to<std::array<double, E::kDim>>;
    { E::invert(v, d) } -> std::convertible_to<typename E::Param>;
};

struct CircleEmbedding {
    using Param = CircleParam;
    static constexpr std::size_t kDim = 2;
    static std::array<double, 2> embed(const Param& p) noexcept { return circle_embed(p); }
    static Param invert(std::span<const double> v, Diagnostics* d) {
        return circle_inv(v[0], v[1], d);
    }
};

struct StripEmbedding {
    using Param = MoebiusCoords;
    static constexpr std::size_t kDim = 3;
    static std::array<double, 3> embed(const Param& p) noexcept { return gamma(p).to_array(); }
    static Param invert(std::span<const double> v, Diagnostics* d) {
        return gamma_inv({v[0], v[1], v[2]}, d);
    }
};

struct LoopEmbedding {
    using Param = LoopParams;
    static constexpr std::size_t kDim = 8;
    static std::array<double, 8> embed(const Param& p) noexcept { return gamma_g(p).to_array(); }
    static Param invert(std::span<const double> v, Diagnostics* d) {
        return gamma_g_inv(EmbeddedPoint8::from_span(v), {}, d);
    }
};

static_assert(Embedding<CircleEmbedding>);
static_assert(Embedding<StripEmbedding>);
static_assert(Embedding<LoopEmbedding>);

}  // namespace toporeg

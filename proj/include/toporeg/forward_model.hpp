#pragma once

// Loop-shape source model and its Fourier-domain visibilities.
//
// A loop is a weighted sum of circular Gaussians whose centers sit on the
// parabola y = c x^2 (loop frame), rotated by alpha and translated to
// (x_c, y_c). Visibilities use the astronomical sign convention
//
//   V(u, v) = \int phi(x, y) exp(+2 pi i (x u + y v)) dx dy.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "toporeg/core.hpp"
#include "toporeg/params.hpp"

namespace toporeg {

inline const double kFwhmToStd = 1.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));

struct UV {
    double u = 0.0;  // arcsec^-1
    double v = 0.0;

    friend bool operator==(const UV&, const UV&) = default;
};

struct FrequencySet {
    std::vector<UV> uv;

    std::size_t size() const noexcept { return uv.size(); }
    friend bool operator==(const FrequencySet&, const FrequencySet&) = default;
};

struct FrequencyConfig {
    int radii = 10;
    int per_radius = 3;
    double r_min = 1.0 / 180.0;
    double r_max = 1.0 / 7.0;
    double step_deg = 40.0;    // position-angle increment between radii
    double spread_deg = 60.0;  // angle between points of one radius
};

/// Ten geometrically spaced radii, three position angles each.
inline FrequencySet default_frequencies(const FrequencyConfig& cfg = {}) {
    if (cfg.radii < 1 || cfg.per_radius < 1)
        throw ValidationError("frequency config needs at least one radius and one angle");
    if (!(cfg.r_min > 0.0) || !(cfg.r_max >= cfg.r_min))
        throw ValidationError("frequency config needs 0 < r_min <= r_max");
    FrequencySet out;
    out.uv.reserve(static_cast<std::size_t>(cfg.radii * cfg.per_radius));
    for (int k = 0; k < cfg.radii; ++k) {
        const double t = cfg.radii == 1 ? 0.0 : static_cast<double>(k) / (cfg.radii - 1);
        const double r = cfg.r_min * std::pow(cfg.r_max / cfg.r_min, t);
        for (int m = 0; m < cfg.per_radius; ++m) {
            const double phi = deg_to_rad(k * cfg.step_deg + m * cfg.spread_deg);
            out.uv.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }
    return out;
}

inline void save_frequencies(const FrequencySet& f, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "u,v\n" << std::setprecision(17);
    for (const auto& p : f.uv) os << p.u << ',' << p.v << '\n';
    if (!os) throw Error("write failed: " + path.string());
}

inline FrequencySet parse_frequencies(std::istream& is, const std::string& origin = "<stream>") {
    FrequencySet out;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header_seen) {
            std::string h;
            for (char ch : line)
                if (ch != ' ' && ch != '\t') h += ch;
            if (h != "u,v")
                throw ParseError(origin + ":" + std::to_string(lineno) + ": expected header 'u,v'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 2)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 2 columns, got " +
                             std::to_string(cells.size()));
        double vals[2];
        for (int i = 0; i < 2; ++i) {
            std::size_t used = 0;
            try {
                vals[i] = std::stod(cells[i], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cells[i].find_first_not_of(" \t", used) != std::string::npos ||
                !std::isfinite(vals[i]))
                throw ParseError(origin + ":" + std::to_string(lineno) + ": column " +
                                 std::to_string(i + 1) + " is not a finite number");
        }
        out.uv.push_back({vals[0], vals[1]});
    }
    if (!header_seen) throw ParseError(origin + ": empty frequency file");
    if (out.uv.empty()) throw ParseError(origin + ": no frequency rows");
    return out;
}

inline FrequencySet load_frequencies(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    return parse_frequencies(is, path.string());
}

// ---------------------------------------------------------------------------
// Loop construction

enum class ExponentMode {
    fwhm,      // sigma is the FWHM; component std = sigma / (2 sqrt(2 ln 2))
    verbatim,  // exp(-r^2 / (2 sigma)) with prefactor F / (2 pi sigma^2)
};

struct LoopBuildConfig {
    int components = 11;      // odd
    double span_factor = 0.5;  // half-span L = span_factor * eps * sigma
    ExponentMode exponent_mode = ExponentMode::fwhm;
};

struct GaussianComponent {
    double x = 0.0;
    double y = 0.0;
    double weight = 1.0;
    double std = 1.0;
};

struct LoopGeometry {
    std::vector<GaussianComponent> components;
    LoopParams params;
    // Integral of the image is flux * mass_scale. Equals 1 except in
    // verbatim mode, where the printed normalization does not conserve flux.
    double mass_scale = 1.0;
};

namespace detail {

// Arc length of y = c t^2 from 0 to x.
inline double parabola_arc(double c, double x) noexcept {
    if (c == 0.0) return x;
    const double q = 2.0 * c * x;
    return 0.5 * x * std::sqrt(1.0 + q * q) + std::asinh(q) / (4.0 * c);
}

// Abscissa whose arc length from the vertex is d (signed).
inline double parabola_abscissa(double c, double d) noexcept {
    if (c == 0.0 || d == 0.0) return d;
    double x = d;
    for (int it = 0; it < 60; ++it) {
        const double q = 2.0 * c * x;
        const double step = (parabola_arc(c, x) - d) / std::sqrt(1.0 + q * q);
        x -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

inline void validate_shape(const LoopParams& p) {
    for (double v : p.to_array())
        if (!std::isfinite(v)) throw ValidationError("loop parameters must be finite");
    if (p.flux <= 0.0) throw ValidationError("flux must be positive");
    if (p.sigma <= 0.0) throw ValidationError("sigma (FWHM) must be positive");
    if (p.eps < 0.0) throw ValidationError("eccentricity must be non-negative");
}

}  // namespace detail

/// Places the Gaussian components of a loop. alpha is not range-checked
/// here so seam-identified shapes (alpha = pi) can be rendered directly.
inline LoopGeometry build_loop_components(const LoopParams& theta, const LoopBuildConfig& cfg = {}) {
    detail::validate_shape(theta);
    if (cfg.components < 1 || cfg.components % 2 == 0)
        throw ValidationError("loop component count must be a positive odd number");
    if (!(cfg.span_factor >= 0.0)) throw ValidationError("span factor must be non-negative");

    LoopGeometry g;
    g.params = theta;
    double s = theta.sigma * kFwhmToStd;
    if (cfg.exponent_mode == ExponentMode::verbatim) {
        s = std::sqrt(theta.sigma);
        g.mass_scale = 1.0 / theta.sigma;
    }

    if (theta.eps == 0.0) {
        g.components.push_back({theta.x_c, theta.y_c, 1.0, s});
        return g;
    }

    const int half = cfg.components / 2;
    const double L = cfg.span_factor * theta.eps * theta.sigma;
    const double spread = L / 2.0 + s;
    const double ca = std::cos(theta.alpha);
    const double sa = std::sin(theta.alpha);

    double wsum = 0.0;
    g.components.reserve(static_cast<std::size_t>(cfg.components));
    for (int j = -half; j <= half; ++j) {
        const double d = half == 0 ? 0.0 : L * j / half;
        const double lx = detail::parabola_abscissa(theta.c, d);
        const double ly = theta.c * lx * lx;
        const double w = std::exp(-d * d / (2.0 * spread * spread));
        wsum += w;
        g.components.push_back({theta.x_c + lx * ca - ly * sa, theta.y_c + lx * sa + ly * ca, w, s});
    }
    for (auto& comp : g.components) comp.weight /= wsum;
    return g;
}

/// 30 (or N) complex visibilities.
struct VisibilitySet {
    std::vector<std::complex<double>> values;

    std::size_t size() const noexcept { return values.size(); }

    /// re_1..re_N, im_1..im_N
    std::vector<double> to_reals() const {
        std::vector<double> out(2 * values.size());
        for (std::size_t j = 0; j < values.size(); ++j) {
            out[j] = values[j].real();
            out[values.size() + j] = values[j].imag();
        }
        return out;
    }
    static VisibilitySet from_reals(std::span<const double> r) {
        if (r.size() % 2 != 0) throw ValidationError("visibility vector must have even length");
        VisibilitySet v;
        const std::size_t n = r.size() / 2;
        v.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) v.values[j] = {r[j], r[n + j]};
        return v;
    }
};

inline VisibilitySet visibilities_closed_form(const LoopGeometry& g, const FrequencySet& freqs) {
    VisibilitySet out;
    out.values.resize(freqs.size());
    const double amp = g.params.flux * g.mass_scale;
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        const double u = freqs.uv[j].u;
        const double v = freqs.uv[j].v;
        const double rho2 = u * u + v * v;
        double re = 0.0;
        double im = 0.0;
        for (const auto& comp : g.components) {
            const double damp = comp.weight * std::exp(-2.0 * kPi * kPi * comp.std * comp.std * rho2);
            const double phase = kTwoPi * (comp.x * u + comp.y * v);
            re += damp * std::cos(phase);
            im += damp * std::sin(phase);
        }
        out.values[j] = {amp * re, amp * im};
    }
    return out;
}

inline VisibilitySet visibilities_closed_form(const LoopParams& theta, const FrequencySet& freqs,
                                              const LoopBuildConfig& cfg = {}) {
    return visibilities_closed_form(build_loop_components(theta, cfg), freqs);
}

/// Adds independent N(0, (2 sqrt F)^2) noise to each real component.
template <class Rng>
VisibilitySet add_noise(const VisibilitySet& v, double flux, Rng& rng) {
    if (!(flux > 0.0)) throw ValidationError("noise level needs a positive flux");
    std::normal_distribution<double> noise(0.0, 2.0 * std::sqrt(flux));
    VisibilitySet out = v;
    for (auto& z : out.values) {
        const double re = z.real() + noise(rng);
        const double im = z.imag() + noise(rng);
        z = {re, im};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Images and the quadrature oracle

/// Regular grid of pixel centers: x_i = x0 + i dx, y_k = y0 + k dy.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double dx = 1.0;
    double dy = 1.0;

    double x(int i) const noexcept { return x0 + i * dx; }
    double y(int k) const noexcept { return y0 + k * dy; }
};

/// n x n nodes spanning the component bounding box padded by `pad_fwhm`
/// times the FWHM on every side.
inline GridSpec oracle_grid(const LoopGeometry& g, int n = 1024, double pad_fwhm = 10.0) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& c : g.components) {
        xmin = std::min(xmin, c.x);
        xmax = std::max(xmax, c.x);
        ymin = std::min(ymin, c.y);
        ymax = std::max(ymax, c.y);
    }
    const double fwhm = g.components.front().std / kFwhmToStd;
    const double pad = pad_fwhm * fwhm;
    GridSpec grid;
    grid.nx = grid.ny = n;
    const double half = 0.5 * std::max(xmax - xmin, ymax - ymin) + pad;
    const double cx = 0.5 * (xmin + xmax);
    const double cy = 0.5 * (ymin + ymax);
    grid.dx = grid.dy = 2.0 * half / (n - 1);
    grid.x0 = cx - half;
    grid.y0 = cy - half;
    return grid;
}

struct Image2D {
    GridSpec grid;
    std::vector<double> pixels;  // row-major: pixels[k * nx + i] at (x(i), y(k))

    double at(int i, int k) const { return pixels[static_cast<std::size_t>(k) * grid.nx + i]; }
};

inline Image2D eval_image(const LoopGeometry& g, const GridSpec& grid) {
    Image2D img;
    img.grid = grid;
    img.pixels.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0.0);
    const double amp = g.params.flux * g.mass_scale;
    std::vector<double> ex(static_cast<std::size_t>(grid.nx));
    std::vector<double> ey(static_cast<std::size_t>(grid.ny));
    for (const auto& c : g.components) {
        const double inv2s2 = 1.0 / (2.0 * c.std * c.std);
        const double norm = amp * c.weight / (kTwoPi * c.std * c.std);
        for (int i = 0; i < grid.nx; ++i) ex[i] = std::exp(-(grid.x(i) - c.x) * (grid.x(i) - c.x) * inv2s2);
        for (int k = 0; k < grid.ny; ++k) ey[k] = norm * std::exp(-(grid.y(k) - c.y) * (grid.y(k) - c.y) * inv2s2);
        for (int k = 0; k < grid.ny; ++k) {
            double* row = img.pixels.data() + static_cast<std::size_t>(k) * grid.nx;
            for (int i = 0; i < grid.nx; ++i) row[i] += ey[k] * ex[i];
        }
    }
    return img;
}

inline Image2D eval_image(const LoopParams& theta, const GridSpec& grid, const LoopBuildConfig& cfg = {}) {
    return eval_image(build_loop_components(theta, cfg), grid);
}

/// Trapezoid-rule evaluation of the Fourier integral of the rendered image.
/// Independent of the closed form: it only sees pixel values. Pixels are
/// evaluated and accumulated in extended precision so strongly damped
/// high-frequency visibilities keep their relative accuracy.
inline VisibilitySet visibilities_quadrature_oracle(const LoopGeometry& g, const FrequencySet& freqs,
                                                    const GridSpec& grid, Diagnostics* diag = nullptr) {
    using LD = long double;
    const LD pi = 3.141592653589793238462643383279502884L;
    const std::size_t nx = static_cast<std::size_t>(grid.nx);
    const std::size_t ny = static_cast<std::size_t>(grid.ny);

    if (diag) {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300, smax = 0.0;
        for (const auto& c : g.components) {
            xmin = std::min(xmin, c.x);
            xmax = std::max(xmax, c.x);
            ymin = std::min(ymin, c.y);
            ymax = std::max(ymax, c.y);
            smax = std::max(smax, c.std);
        }
        const double need = 8.0 * smax / kFwhmToStd;
        if (grid.x(0) > xmin - need || grid.x(grid.nx - 1) < xmax + need || grid.y(0) > ymin - need ||
            grid.y(grid.ny - 1) < ymax + need)
            diag->warn("quadrature grid does not cover the source plus 8 FWHM");
        double rho_max = 0.0;
        for (const auto& p : freqs.uv) rho_max = std::max(rho_max, std::hypot(p.u, p.v));
        const double h = std::max(grid.dx, grid.dy);
        const double margin = 1.0 / h - 2.0 * rho_max;
        const double alias = margin <= 0.0 ? 1.0 : std::exp(-2.0 * kPi * kPi * smax * smax * margin / h);
        if (alias > 1e-8) diag->warn("quadrature grid too coarse for the sampled frequencies");
    }

    // Extended-precision image.
    std::vector<LD> img(nx * ny, 0.0L);
    std::vector<LD> ex(nx), ey(ny);
    const LD amp = static_cast<LD>(g.params.flux) * static_cast<LD>(g.mass_scale);
    for (const auto& c : g.components) {
        const LD s = c.std;
        const LD inv2s2 = 1.0L / (2.0L * s * s);
        const LD norm = amp * static_cast<LD>(c.weight) / (2.0L * pi * s * s);
        for (std::size_t i = 0; i < nx; ++i) {
            const LD d = static_cast<LD>(grid.x0) + static_cast<LD>(i) * grid.dx - c.x;
            ex[i] = std::exp(-d * d * inv2s2);
        }
        for (std::size_t k = 0; k < ny; ++k) {
            const LD d = static_cast<LD>(grid.y0) + static_cast<LD>(k) * grid.dy - c.y;
            ey[k] = norm * std::exp(-d * d * inv2s2);
        }
        for (std::size_t k = 0; k < ny; ++k)
            for (std::size_t i = 0; i < nx; ++i) img[k * nx + i] += ey[k] * ex[i];
    }

    // Trapezoid weights.
    auto tw = [](std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5L : 1.0L; };

    VisibilitySet out;
    out.values.resize(freqs.size());
    std::vector<std::complex<LD>> px(nx), py(ny);
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        const LD u = freqs.uv[j].u;
        const LD v = freqs.uv[j].v;
        for (std::size_t i = 0; i < nx; ++i) {
            const LD x = static_cast<LD>(grid.x0) + static_cast<LD>(i) * grid.dx;
            const LD ph = 2.0L * pi * x * u;
            px[i] = std::complex<LD>(std::cos(ph), std::sin(ph)) * tw(i, nx);
        }
        for (std::size_t k = 0; k < ny; ++k) {
            const LD y = static_cast<LD>(grid.y0) + static_cast<LD>(k) * grid.dy;
            const LD ph = 2.0L * pi * y * v;
            py[k] = std::complex<LD>(std::cos(ph), std::sin(ph)) * tw(k, ny);
        }
        std::complex<LD> total = 0.0L;
        for (std::size_t k = 0; k < ny; ++k) {
            LD re = 0.0L, im = 0.0L;
            const LD* row = img.data() + k * nx;
            for (std::size_t i = 0; i < nx; ++i) {
                re += row[i] * px[i].real();
                im += row[i] * px[i].imag();
            }
            total += std::complex<LD>(re, im) * py[k];
        }
        total *= static_cast<LD>(grid.dx) * static_cast<LD>(grid.dy);
        out.values[j] = {static_cast<double>(total.real()), static_cast<double>(total.imag())};
    }
    return out;
}

}  // namespace toporeg

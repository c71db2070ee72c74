#pragma once

// Example datasets {(theta_i, V_i)} for the circle, simple and complete
// scenarios: sampling, generation, splits, standardization and on-disk
// format.
//
// On-disk layout (a directory):
//   manifest.json   format name/version, sampling config, frequency set,
//                   column names, per-file byte size and CRC32
//   theta.bin       S x P little-endian float64 (alpha / circle angle in degrees)
//   clean.bin       S x D float64, noise-free inputs
//   noisy.bin       S x D float64, network inputs (== clean without noise)
//   split.bin       S uint8 (0 train, 1 val, 2 test)
// With text encoding the same tables are written as CSV (*.csv).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "toporeg/core.hpp"
#include "toporeg/embedding.hpp"
#include "toporeg/forward_model.hpp"
#include "toporeg/params.hpp"

namespace toporeg {

enum class Scenario { circle, simple, complete };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::circle: return "circle";
        case Scenario::simple: return "simple";
        case Scenario::complete: return "complete";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "circle") return Scenario::circle;
    if (s == "simple") return Scenario::simple;
    if (s == "complete") return Scenario::complete;
    throw ValidationError("unknown scenario '" + s + "' (expected circle, simple or complete)");
}

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct SamplingConfig {
    Scenario scenario = Scenario::simple;
    LoopIntervals intervals;
    std::size_t n_train = 30000;
    std::size_t n_val = 10000;
    std::size_t n_test = 10000;
    std::size_t samples = 50000;  // must equal n_train + n_val + n_test
    bool noise = false;
    double p_circular = 0.0;
    std::uint64_t seed = 1;
    FrequencyConfig frequencies;
    LoopBuildConfig loop;

    /// Full-scale protocol defaults for each scenario.
    static SamplingConfig defaults(Scenario s) {
        SamplingConfig c;
        c.scenario = s;
        switch (s) {
            case Scenario::circle:
                c.n_train = 30000;
                c.n_val = 5000;
                c.n_test = 5000;
                break;
            case Scenario::simple:
                c.intervals.x_c = {0.0, 0.0};
                c.intervals.y_c = {0.0, 0.0};
                c.intervals.flux = {1000.0, 1000.0};
                c.intervals.sigma = {8.0, 8.0};
                c.intervals.eps = {5.0, 5.0};
                c.n_train = 30000;
                c.n_val = 10000;
                c.n_test = 10000;
                break;
            case Scenario::complete:
                c.n_train = 60000;
                c.n_val = 20000;
                c.n_test = 20000;
                c.noise = true;
                c.p_circular = 0.05;
                break;
        }
        c.samples = c.n_train + c.n_val + c.n_test;
        return c;
    }

    void set_splits(std::size_t train, std::size_t val, std::size_t test) {
        n_train = train;
        n_val = val;
        n_test = test;
        samples = train + val + test;
    }

    void validate() const {
        if (samples == 0) throw ValidationError("sample count must be positive");
        if (n_train + n_val + n_test != samples)
            throw ValidationError("split sizes " + std::to_string(n_train) + "/" + std::to_string(n_val) +
                                  "/" + std::to_string(n_test) + " do not add up to " +
                                  std::to_string(samples) + " samples");
        if (!(p_circular >= 0.0 && p_circular < 1.0))
            throw ValidationError("circular-shape fraction must lie in [0, 1)");
        if (scenario == Scenario::circle) {
            if (noise) throw ValidationError("the circle scenario has no noise model");
            return;
        }
        auto check = [](const Interval& i, const char* name, bool positive) {
            if (!std::isfinite(i.lo) || !std::isfinite(i.hi) || i.lo > i.hi)
                throw ValidationError(std::string("invalid interval for ") + name);
            if (positive && i.lo <= 0.0) throw ValidationError(std::string(name) + " interval must be positive");
        };
        check(intervals.x_c, "x_c", false);
        check(intervals.y_c, "y_c", false);
        check(intervals.flux, "F", true);
        check(intervals.sigma, "sigma", true);
        check(intervals.eps, "eps", false);
        check(intervals.c, "c", false);
        if (intervals.eps.lo < 0.0) throw ValidationError("eps interval must be non-negative");
        if (intervals.alpha != Interval{0.0, kPi}) throw ValidationError("alpha interval is fixed to [0, 180) degrees");
    }
};

namespace detail {

inline double draw(const Interval& i, std::mt19937_64& rng) {
    if (i.pinned()) return i.lo;
    std::uniform_real_distribution<double> u(i.lo, i.hi);
    return u(rng);
}

// Orientation in degrees, uniform on [0, 180).
inline double draw_alpha_deg(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 180.0);
    double a = u(rng);
    return a >= 180.0 ? 0.0 : a;
}

}  // namespace detail

/// Uniform draw per interval. With probability p_circular the shape is an
/// exact circular Gaussian (eps = alpha = c = 0). alpha is returned in
/// degrees in `alpha_deg_out` when requested, so datasets can record it
/// exactly.
inline LoopParams sample_params(const SamplingConfig& cfg, std::mt19937_64& rng, double* alpha_deg_out = nullptr) {
    LoopParams p;
    p.x_c = detail::draw(cfg.intervals.x_c, rng);
    p.y_c = detail::draw(cfg.intervals.y_c, rng);
    p.flux = detail::draw(cfg.intervals.flux, rng);
    p.sigma = detail::draw(cfg.intervals.sigma, rng);
    const double eps = detail::draw(cfg.intervals.eps, rng);
    const double alpha_deg = detail::draw_alpha_deg(rng);
    const double c = detail::draw(cfg.intervals.c, rng);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const bool circular = cfg.p_circular > 0.0 && u01(rng) < cfg.p_circular;
    if (circular || eps == 0.0) {
        p.eps = 0.0;
        p.alpha = 0.0;
        p.c = 0.0;
        if (alpha_deg_out) *alpha_deg_out = 0.0;
        return p;
    }
    p.eps = eps;
    p.alpha = deg_to_rad(alpha_deg);
    p.c = c;
    if (alpha_deg_out) *alpha_deg_out = alpha_deg;
    return p;
}

/// Dense sample storage. theta rows hold the recorded parameters with angles
/// in degrees; use params()/circle() for radians.
struct Dataset {
    SamplingConfig config;
    FrequencySet frequencies;
    std::size_t param_dim = 0;  // 7 for loops, 1 for the circle
    std::size_t input_dim = 0;  // 2 * frequencies, or 2 for the circle
    std::vector<double> theta;
    std::vector<double> clean;
    std::vector<double> noisy;
    std::vector<std::uint8_t> split;

    std::size_t size() const noexcept { return split.size(); }

    std::span<const double> theta_row(std::size_t i) const {
        return {theta.data() + i * param_dim, param_dim};
    }
    std::span<const double> clean_row(std::size_t i) const {
        return {clean.data() + i * input_dim, input_dim};
    }
    /// Network input of sample i.
    std::span<const double> input(std::size_t i) const {
        return {noisy.data() + i * input_dim, input_dim};
    }

    LoopParams params(std::size_t i) const {
        auto r = theta_row(i);
        return {r[0], r[1], r[2], r[3], r[4], deg_to_rad(r[5]), r[6]};
    }
    CircleParam circle(std::size_t i) const { return {deg_to_rad(theta[i])}; }

    Split split_of(std::size_t i) const { return static_cast<Split>(split[i]); }

    std::vector<std::size_t> indices(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (split[i] == static_cast<std::uint8_t>(s)) out.push_back(i);
        return out;
    }

    std::vector<std::string> param_columns() const {
        if (config.scenario == Scenario::circle) return {"theta_deg"};
        return {"x_c", "y_c", "F", "sigma", "eps", "alpha_deg", "c"};
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.frequencies == b.frequencies && a.param_dim == b.param_dim && a.input_dim == b.input_dim &&
               a.theta == b.theta && a.clean == b.clean && a.noisy == b.noisy && a.split == b.split;
    }
};

namespace detail {

inline constexpr std::uint64_t kSampleStream = 0x73616d706c65ULL;  // "sample"

inline void generate_range(Dataset& ds, std::size_t begin, std::size_t end) {
    const auto& cfg = ds.config;
    for (std::size_t i = begin; i < end; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, kSampleStream, i));
        double* th = ds.theta.data() + i * ds.param_dim;
        double* cl = ds.clean.data() + i * ds.input_dim;
        double* no = ds.noisy.data() + i * ds.input_dim;
        if (cfg.scenario == Scenario::circle) {
            const double deg = draw_alpha_deg(rng) * 2.0;  // [0, 360)
            th[0] = deg;
            const auto e = circle_embed({deg_to_rad(deg)});
            cl[0] = no[0] = e[0];
            cl[1] = no[1] = e[1];
            continue;
        }
        double alpha_deg = 0.0;
        LoopParams p = sample_params(cfg, rng, &alpha_deg);
        const double rec[7] = {p.x_c, p.y_c, p.flux, p.sigma, p.eps, alpha_deg, p.c};
        std::copy(rec, rec + 7, th);
        p.alpha = deg_to_rad(alpha_deg);
        const auto vis = visibilities_closed_form(p, ds.frequencies, cfg.loop);
        const auto reals = vis.to_reals();
        std::copy(reals.begin(), reals.end(), cl);
        if (cfg.noise) {
            const auto nr = add_noise(vis, p.flux, rng).to_reals();
            std::copy(nr.begin(), nr.end(), no);
        } else {
            std::copy(reals.begin(), reals.end(), no);
        }
    }
}

}  // namespace detail

/// Generates S samples. Each sample uses its own generator seeded from
/// (seed, index), so the result does not depend on `jobs`.
inline Dataset generate_dataset(const SamplingConfig& cfg, const FrequencySet& freqs, unsigned jobs = 1) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    if (cfg.scenario == Scenario::circle) {
        ds.param_dim = 1;
        ds.input_dim = 2;
    } else {
        if (freqs.size() == 0) throw ValidationError("frequency set is empty");
        ds.frequencies = freqs;
        ds.param_dim = 7;
        ds.input_dim = 2 * freqs.size();
    }
    const std::size_t S = cfg.samples;
    ds.theta.assign(S * ds.param_dim, 0.0);
    ds.clean.assign(S * ds.input_dim, 0.0);
    ds.noisy.assign(S * ds.input_dim, 0.0);
    ds.split.resize(S);
    for (std::size_t i = 0; i < S; ++i) {
        ds.split[i] = static_cast<std::uint8_t>(i < cfg.n_train                 ? Split::train
                                                : i < cfg.n_train + cfg.n_val ? Split::val
                                                                              : Split::test);
    }

    jobs = std::max(1u, jobs);
    if (jobs == 1 || S < 2 * jobs) {
        detail::generate_range(ds, 0, S);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (S + jobs - 1) / jobs;
        for (unsigned t = 0; t < jobs; ++t) {
            const std::size_t b = t * chunk, e = std::min(S, b + chunk);
            if (b < e) pool.emplace_back([&ds, b, e] { detail::generate_range(ds, b, e); });
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

inline Dataset generate_dataset(const SamplingConfig& cfg, unsigned jobs = 1) {
    return generate_dataset(cfg, default_frequencies(cfg.frequencies), jobs);
}

// ---------------------------------------------------------------------------
// Input standardization

struct StandardizationStats {
    std::vector<double> mean;
    std::vector<double> std;

    std::size_t dim() const noexcept { return mean.size(); }

    template <class T>
    void apply(std::span<const double> x, std::span<T> out) const {
        for (std::size_t k = 0; k < mean.size(); ++k) out[k] = static_cast<T>((x[k] - mean[k]) / std[k]);
    }
    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> out(x.size());
        apply<double>(x, out);
        return out;
    }
    std::vector<double> invert(std::span<const double> z) const {
        std::vector<double> out(z.size());
        for (std::size_t k = 0; k < mean.size(); ++k) out[k] = z[k] * std[k] + mean[k];
        return out;
    }
};

/// Per-feature mean and std of the network inputs of the given rows.
inline StandardizationStats fit_standardization(const Dataset& ds, const std::vector<std::size_t>& rows,
                                                Diagnostics* diag = nullptr) {
    if (rows.empty()) throw ValidationError("standardization needs a non-empty training split");
    const std::size_t D = ds.input_dim;
    StandardizationStats st;
    st.mean.assign(D, 0.0);
    st.std.assign(D, 0.0);
    for (std::size_t i : rows) {
        auto x = ds.input(i);
        for (std::size_t k = 0; k < D; ++k) st.mean[k] += x[k];
    }
    for (auto& m : st.mean) m /= static_cast<double>(rows.size());
    for (std::size_t i : rows) {
        auto x = ds.input(i);
        for (std::size_t k = 0; k < D; ++k) st.std[k] += (x[k] - st.mean[k]) * (x[k] - st.mean[k]);
    }
    for (std::size_t k = 0; k < D; ++k) {
        st.std[k] = std::sqrt(st.std[k] / static_cast<double>(rows.size()));
        if (!(st.std[k] > 1e-12 * std::max(1.0, std::abs(st.mean[k])))) {
            if (diag) diag->warn("feature " + std::to_string(k) + " has zero variance; using std = 1");
            st.std[k] = 1.0;
        }
    }
    return st;
}

inline StandardizationStats fit_standardization(const Dataset& ds, Diagnostics* diag = nullptr) {
    return fit_standardization(ds, ds.indices(Split::train), diag);
}

// ---------------------------------------------------------------------------
// JSON for configs

inline nlohmann::json to_json_value(const Interval& i) { return nlohmann::json::array({i.lo, i.hi}); }

inline Interval interval_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("interval must be a [lo, hi] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline nlohmann::json to_json_value(const LoopIntervals& li) {
    return {{"x_c", to_json_value(li.x_c)},   {"y_c", to_json_value(li.y_c)},
            {"F", to_json_value(li.flux)},    {"sigma", to_json_value(li.sigma)},
            {"eps", to_json_value(li.eps)},   {"alpha_deg", nlohmann::json::array({0.0, 180.0})},
            {"c", to_json_value(li.c)}};
}

inline LoopIntervals intervals_from_json(const nlohmann::json& j, LoopIntervals base = {}) {
    if (j.contains("x_c")) base.x_c = interval_from_json(j["x_c"]);
    if (j.contains("y_c")) base.y_c = interval_from_json(j["y_c"]);
    if (j.contains("F")) base.flux = interval_from_json(j["F"]);
    if (j.contains("sigma")) base.sigma = interval_from_json(j["sigma"]);
    if (j.contains("eps")) base.eps = interval_from_json(j["eps"]);
    if (j.contains("c")) base.c = interval_from_json(j["c"]);
    if (j.contains("alpha_deg") && interval_from_json(j["alpha_deg"]) != Interval{0.0, 180.0})
        throw ValidationError("alpha interval is fixed to [0, 180) degrees");
    return base;
}

inline nlohmann::json to_json_value(const FrequencyConfig& f) {
    return {{"radii", f.radii},       {"per_radius", f.per_radius}, {"r_min", f.r_min},
            {"r_max", f.r_max},       {"step_deg", f.step_deg},     {"spread_deg", f.spread_deg}};
}

inline FrequencyConfig frequency_config_from_json(const nlohmann::json& j, FrequencyConfig f = {}) {
    f.radii = j.value("radii", f.radii);
    f.per_radius = j.value("per_radius", f.per_radius);
    f.r_min = j.value("r_min", f.r_min);
    f.r_max = j.value("r_max", f.r_max);
    f.step_deg = j.value("step_deg", f.step_deg);
    f.spread_deg = j.value("spread_deg", f.spread_deg);
    return f;
}

inline nlohmann::json to_json_value(const LoopBuildConfig& l) {
    return {{"components", l.components},
            {"span_factor", l.span_factor},
            {"exponent_mode", l.exponent_mode == ExponentMode::fwhm ? "fwhm" : "verbatim"}};
}

inline LoopBuildConfig loop_config_from_json(const nlohmann::json& j, LoopBuildConfig l = {}) {
    l.components = j.value("components", l.components);
    l.span_factor = j.value("span_factor", l.span_factor);
    if (j.contains("exponent_mode")) {
        const auto m = j["exponent_mode"].get<std::string>();
        if (m == "fwhm") l.exponent_mode = ExponentMode::fwhm;
        else if (m == "verbatim") l.exponent_mode = ExponentMode::verbatim;
        else throw ValidationError("exponent_mode must be 'fwhm' or 'verbatim'");
    }
    return l;
}

inline nlohmann::json to_json_value(const SamplingConfig& c) {
    return {{"scenario", to_string(c.scenario)},
            {"intervals", to_json_value(c.intervals)},
            {"samples", c.samples},
            {"n_train", c.n_train},
            {"n_val", c.n_val},
            {"n_test", c.n_test},
            {"noise", c.noise},
            {"p_circular", c.p_circular},
            {"seed", c.seed},
            {"frequencies", to_json_value(c.frequencies)},
            {"loop", to_json_value(c.loop)}};
}

/// Reads a sampling config. Missing fields take the scenario defaults; if
/// only split sizes are given, `samples` is their sum.
inline SamplingConfig sampling_config_from_json(const nlohmann::json& j) {
    const Scenario s = scenario_from_string(j.value("scenario", std::string("simple")));
    SamplingConfig c = SamplingConfig::defaults(s);
    if (j.contains("intervals")) c.intervals = intervals_from_json(j["intervals"], c.intervals);
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.n_test = j.value("n_test", c.n_test);
    c.samples = j.value("samples", c.n_train + c.n_val + c.n_test);
    c.noise = j.value("noise", c.noise);
    c.p_circular = j.value("p_circular", c.p_circular);
    c.seed = j.value("seed", c.seed);
    if (j.contains("frequencies")) c.frequencies = frequency_config_from_json(j["frequencies"]);
    if (j.contains("loop")) c.loop = loop_config_from_json(j["loop"]);
    return c;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetFormatName = "toporeg-dataset";

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::uint32_t crc32_of(const std::string& s) {
    return crc32_of(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << v;
    return os.str();
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw FormatError("cannot open " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("write failed: " + p.string());
}

template <class T>
std::string to_bytes(const std::vector<T>& v) {
    std::string s(v.size() * sizeof(T), '\0');
    if (!v.empty()) std::memcpy(s.data(), v.data(), s.size());
    return s;
}

template <class T>
std::vector<T> from_bytes(const std::string& s, std::size_t expected, const std::string& name) {
    if (s.size() != expected * sizeof(T))
        throw FormatError(name + ": expected " + std::to_string(expected * sizeof(T)) + " bytes, found " +
                          std::to_string(s.size()) + " (truncated or corrupt)");
    std::vector<T> v(expected);
    if (expected) std::memcpy(v.data(), s.data(), s.size());
    return v;
}

inline std::string table_csv(const std::vector<std::string>& header, const std::vector<double>& data, std::size_t cols) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
    os << '\n';
    for (std::size_t r = 0; cols && r < data.size() / cols; ++r) {
        for (std::size_t k = 0; k < cols; ++k) os << (k ? "," : "") << data[r * cols + k];
        os << '\n';
    }
    return os.str();
}

inline std::vector<double> parse_table_csv(const std::string& text, std::size_t rows, std::size_t cols,
                                           const std::string& name) {
    std::vector<double> out;
    out.reserve(rows * cols);
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) throw FormatError(name + ": missing header");
    ++lineno;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const char* p = line.c_str();
        for (std::size_t k = 0; k < cols; ++k) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p) throw FormatError(name + ":" + std::to_string(lineno) + ": malformed number");
            out.push_back(v);
            p = end;
            if (k + 1 < cols) {
                if (*p != ',') throw FormatError(name + ":" + std::to_string(lineno) + ": expected " +
                                                 std::to_string(cols) + " columns");
                ++p;
            }
        }
        if (*p != '\0') throw FormatError(name + ":" + std::to_string(lineno) + ": trailing data");
    }
    if (out.size() != rows * cols)
        throw FormatError(name + ": expected " + std::to_string(rows) + " rows (truncated or corrupt)");
    return out;
}

inline std::vector<std::string> numbered(const std::string& prefix, std::size_t n, std::size_t offset = 0) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k + 1 + offset));
    return out;
}

inline std::vector<std::string> input_columns(const Dataset& ds) {
    if (ds.config.scenario == Scenario::circle) return {"x", "y"};
    auto re = numbered("re", ds.input_dim / 2);
    auto im = numbered("im", ds.input_dim / 2);
    re.insert(re.end(), im.begin(), im.end());
    return re;
}

}  // namespace detail

/// Writes `dir/manifest.json` plus the data tables. `text` selects CSV.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool text = false) {
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> files;
    const auto in_cols = detail::input_columns(ds);
    if (text) {
        std::vector<double> split(ds.split.begin(), ds.split.end());
        files.emplace_back("theta.csv", detail::table_csv(ds.param_columns(), ds.theta, ds.param_dim));
        files.emplace_back("clean.csv", detail::table_csv(in_cols, ds.clean, ds.input_dim));
        files.emplace_back("noisy.csv", detail::table_csv(in_cols, ds.noisy, ds.input_dim));
        files.emplace_back("split.csv", detail::table_csv({"split"}, split, 1));
    } else {
        files.emplace_back("theta.bin", detail::to_bytes(ds.theta));
        files.emplace_back("clean.bin", detail::to_bytes(ds.clean));
        files.emplace_back("noisy.bin", detail::to_bytes(ds.noisy));
        files.emplace_back("split.bin", detail::to_bytes(ds.split));
    }

    nlohmann::json m;
    m["format"] = kDatasetFormatName;
    m["format_version"] = kDatasetFormatVersion;
    m["encoding"] = text ? "text" : "binary";
    m["byte_order"] = "little";
    m["angle_unit"] = "degrees";
    m["samples"] = ds.size();
    m["param_dim"] = ds.param_dim;
    m["input_dim"] = ds.input_dim;
    m["param_columns"] = ds.param_columns();
    m["input_columns"] = in_cols;
    m["input_layout"] = "re_1..re_N, im_1..im_N";
    m["split_codes"] = {{"train", 0}, {"val", 1}, {"test", 2}};
    m["config"] = to_json_value(ds.config);
    nlohmann::json uv = nlohmann::json::array();
    for (const auto& p : ds.frequencies.uv) uv.push_back({p.u, p.v});
    m["frequencies_uv"] = uv;
    nlohmann::json fj = nlohmann::json::object();
    for (const auto& [name, bytes] : files) {
        detail::write_file(dir / name, bytes);
        fj[name] = {{"bytes", bytes.size()}, {"crc32", hex32(crc32_of(bytes))}};
    }
    m["files"] = fj;
    detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

/// Short identifier of a saved dataset: CRC32 of its manifest.
inline std::string dataset_manifest_hash(const std::filesystem::path& dir) {
    return hex32(crc32_of(detail::read_file(dir / "manifest.json")));
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("dataset manifest is not valid JSON: " + std::string(e.what()));
    }
    if (m.value("format", std::string()) != kDatasetFormatName)
        throw FormatError(dir.string() + " is not a toporeg dataset");
    const int version = m.value("format_version", -1);
    if (version != kDatasetFormatVersion)
        throw FormatError("unsupported dataset format version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kDatasetFormatVersion) + ")");

    Dataset ds;
    try {
        ds.config = sampling_config_from_json(m.at("config"));
        ds.param_dim = m.at("param_dim").get<std::size_t>();
        ds.input_dim = m.at("input_dim").get<std::size_t>();
        for (const auto& p : m.at("frequencies_uv")) ds.frequencies.uv.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("dataset manifest is incomplete: " + std::string(e.what()));
    }
    const std::size_t S = m.at("samples").get<std::size_t>();
    const bool text = m.value("encoding", std::string("binary")) == "text";

    auto checked = [&](const std::string& name) {
        const auto bytes = detail::read_file(dir / name);
        const auto& info = m.at("files").at(name);
        if (bytes.size() != info.at("bytes").get<std::size_t>())
            throw FormatError(name + ": size mismatch (truncated or corrupt)");
        if (hex32(crc32_of(bytes)) != info.at("crc32").get<std::string>())
            throw FormatError(name + ": checksum mismatch");
        return bytes;
    };
    if (text) {
        ds.theta = detail::parse_table_csv(checked("theta.csv"), S, ds.param_dim, "theta.csv");
        ds.clean = detail::parse_table_csv(checked("clean.csv"), S, ds.input_dim, "clean.csv");
        ds.noisy = detail::parse_table_csv(checked("noisy.csv"), S, ds.input_dim, "noisy.csv");
        const auto sp = detail::parse_table_csv(checked("split.csv"), S, 1, "split.csv");
        ds.split.reserve(S);
        for (double v : sp) ds.split.push_back(static_cast<std::uint8_t>(v));
    } else {
        ds.theta = detail::from_bytes<double>(checked("theta.bin"), S * ds.param_dim, "theta.bin");
        ds.clean = detail::from_bytes<double>(checked("clean.bin"), S * ds.input_dim, "clean.bin");
        ds.noisy = detail::from_bytes<double>(checked("noisy.bin"), S * ds.input_dim, "noisy.bin");
        ds.split = detail::from_bytes<std::uint8_t>(checked("split.bin"), S, "split.bin");
    }
    for (auto s : ds.split)
        if (s > 2) throw FormatError("split.bin: invalid split code");
    return ds;
}

}  // namespace toporeg

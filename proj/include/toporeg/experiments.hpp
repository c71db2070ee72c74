#pragma once

// Scripted experiments shared by the command-line tool and the acceptance
// suite: the circle demonstration and seam-band evaluation sets.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "toporeg/analysis.hpp"
#include "toporeg/regularizer.hpp"

namespace toporeg {

/// Angles approaching 0 and 2 pi from inside the band (0, band) u (2 pi - band, 2 pi),
/// log-spaced in the distance to the seam.
inline std::vector<double> circle_seam_angles(double band = 0.05, double closest = 1e-8, double ratio = 1.25) {
    std::vector<double> out;
    for (double d = closest; d < band; d *= ratio) {
        out.push_back(d);
        out.push_back(kTwoPi - d);
    }
    return out;
}

struct CircleDemoConfig {
    std::size_t n_train = 5000;
    std::size_t n_val = 1000;
    std::size_t n_uniform = 2000;
    double seam_band = 0.05;
    std::size_t width = 64;
    std::size_t depth = 3;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t patience = 25;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

inline CircleDemoConfig circle_demo_config_from_json(const nlohmann::json& j, CircleDemoConfig c = {}) {
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.n_uniform = j.value("n_uniform", c.n_uniform);
    c.seam_band = j.value("seam_band", c.seam_band);
    c.width = j.value("width", c.width);
    c.depth = j.value("depth", c.depth);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    return c;
}

struct CircleDemoRow {
    double theta = 0.0;
    double naive = 0.0;
    double embedded = 0.0;
    bool seam = false;
};

struct CircleDemoResult {
    TrainedRegularizer naive;
    TrainedRegularizer embedded;
    std::vector<CircleDemoRow> rows;
    double naive_seam_max_raw_error = 0.0;
    double embedded_seam_max_circular_error = 0.0;
    double naive_mean_circular_error = 0.0;  // uniform set
    double embedded_mean_circular_error = 0.0;

    nlohmann::json summary() const {
        return {{"naive_seam_max_raw_error", naive_seam_max_raw_error},
                {"embedded_seam_max_circular_error", embedded_seam_max_circular_error},
                {"naive_mean_circular_error", naive_mean_circular_error},
                {"embedded_mean_circular_error", embedded_mean_circular_error},
                {"naive_best_epoch", naive.history.best_epoch},
                {"embedded_best_epoch", embedded.history.best_epoch}};
    }

    std::string scatter_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "theta_deg,naive_deg,embedded_deg,naive_raw_error,naive_circular_error,embedded_circular_error,seam\n";
        for (const auto& r : rows)
            os << rad_to_deg(r.theta) << ',' << rad_to_deg(r.naive) << ',' << rad_to_deg(r.embedded) << ','
               << std::abs(r.naive - r.theta) << ',' << circular_error(r.naive, r.theta) << ','
               << circular_error(r.embedded, r.theta) << ',' << (r.seam ? 1 : 0) << '\n';
        return os.str();
    }
};

/// Trains a naive and an embedded network on clean circle samples and scores
/// both on a uniform angle grid and on angles approaching the seam.
inline CircleDemoResult run_circle_demo(const CircleDemoConfig& cfg) {
    auto sc = SamplingConfig::defaults(Scenario::circle);
    sc.set_splits(cfg.n_train, cfg.n_val, 0);
    sc.seed = cfg.seed;
    const Dataset ds = generate_dataset(sc, cfg.jobs);

    auto nc = nn::MlpConfig::uniform(2, cfg.width, cfg.depth, 1);
    nc.seed = derive_seed(cfg.seed, 0x696e6974ULL, 0);
    nn::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr;
    tc.patience = cfg.patience;
    tc.seed = derive_seed(cfg.seed, 0x747261696eULL, 0);
    tc.jobs = cfg.jobs;

    CircleDemoResult res;
    res.naive = train_regularizer(ds, RegularizerKind::naive, nc, tc);
    res.embedded = train_regularizer(ds, RegularizerKind::embedded, nc, tc);

    auto eval = [&](double t, bool seam) {
        const std::vector<double> x = {std::cos(t), std::sin(t)};
        CircleDemoRow r;
        r.theta = t;
        r.seam = seam;
        r.naive = predict(res.naive.reg, std::span<const double>(x)).theta;
        r.embedded = predict(res.embedded.reg, std::span<const double>(x)).theta;
        res.rows.push_back(r);
        return r;
    };
    for (std::size_t k = 0; k < cfg.n_uniform; ++k) {
        const auto r = eval(kTwoPi * static_cast<double>(k) / static_cast<double>(cfg.n_uniform), false);
        res.naive_mean_circular_error += circular_error(r.naive, r.theta);
        res.embedded_mean_circular_error += circular_error(r.embedded, r.theta);
    }
    if (cfg.n_uniform > 0) {
        res.naive_mean_circular_error /= static_cast<double>(cfg.n_uniform);
        res.embedded_mean_circular_error /= static_cast<double>(cfg.n_uniform);
    }
    for (double t : circle_seam_angles(cfg.seam_band)) {
        const auto r = eval(t, true);
        res.naive_seam_max_raw_error = std::max(res.naive_seam_max_raw_error, std::abs(r.naive - r.theta));
        res.embedded_seam_max_circular_error =
            std::max(res.embedded_seam_max_circular_error, circular_error(r.embedded, r.theta));
    }
    return res;
}

/// Simple-scenario loops on an (alpha, c) grid inside the seam band
/// [0, band] u [180 - band, 180) degrees, shape parameters from the intervals.
inline std::vector<LoopParams> simple_seam_band(const LoopIntervals& iv, double band_deg = 2.0, int n_alpha = 21,
                                                int n_c = 11) {
    std::vector<LoopParams> out;
    std::vector<double> alphas;
    for (int i = 0; i < n_alpha; ++i) {
        const double a = band_deg * i / (n_alpha - 1);
        alphas.push_back(a);
        alphas.push_back(180.0 - band_deg + band_deg * i / n_alpha);  // stops short of 180
    }
    alphas.push_back(180.0 - 1e-3);
    for (double a : alphas)
        for (int k = 0; k < n_c; ++k) {
            LoopParams p;
            p.x_c = iv.x_c.lo;
            p.y_c = iv.y_c.lo;
            p.flux = iv.flux.lo;
            p.sigma = iv.sigma.lo;
            p.eps = iv.eps.lo;
            p.alpha = deg_to_rad(a);
            p.c = iv.c.lo + iv.c.length() * k / (n_c - 1);
            out.push_back(p);
        }
    return out;
}

inline bool in_seam_band(double alpha_rad, double band_deg = 2.0) {
    const double a = rad_to_deg(alpha_rad);
    return a <= band_deg || a >= 180.0 - band_deg;
}

}  // namespace toporeg

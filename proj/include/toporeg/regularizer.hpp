#pragma once

// End-to-end regularizers: a network that maps visibilities either directly
// to parameters (naive) or to an embedded point that is then mapped back by
// the analytic inverse embedding (embedded).

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "toporeg/dataset.hpp"
#include "toporeg/embedding.hpp"
#include "toporeg/nn.hpp"

namespace toporeg {

enum class RegularizerKind { naive, embedded };

inline std::string to_string(RegularizerKind k) { return k == RegularizerKind::naive ? "naive" : "embedded"; }

inline RegularizerKind regularizer_kind_from_string(const std::string& s) {
    if (s == "naive") return RegularizerKind::naive;
    if (s == "embedded") return RegularizerKind::embedded;
    throw ValidationError("unknown regularizer kind '" + s + "' (expected naive or embedded)");
}

inline std::size_t output_dim(RegularizerKind k, Scenario task) {
    switch (task) {
        case Scenario::circle: return k == RegularizerKind::naive ? 1 : 2;
        case Scenario::simple: return k == RegularizerKind::naive ? 2 : 3;
        case Scenario::complete: return k == RegularizerKind::naive ? 7 : 8;
    }
    return 0;
}

inline std::string embedding_id(RegularizerKind k, Scenario task) {
    if (k == RegularizerKind::naive) return "identity";
    switch (task) {
        case Scenario::circle: return "circle";
        case Scenario::simple: return "moebius_strip";
        case Scenario::complete: return "scaled_loop_strip";
    }
    return "";
}

/// Per-output affine map: network output = (target - offset) / scale.
struct TargetScaling {
    std::vector<double> offset;
    std::vector<double> scale;

    double to_net(std::size_t k, double v) const { return (v - offset[k]) / scale[k]; }
    double from_net(std::size_t k, double v) const { return v * scale[k] + offset[k]; }

    friend bool operator==(const TargetScaling&, const TargetScaling&) = default;
};

inline nlohmann::json to_json_value(const TargetScaling& s) { return {{"offset", s.offset}, {"scale", s.scale}}; }

inline TargetScaling target_scaling_from_json(const nlohmann::json& j) {
    return {j.at("offset").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

/// Identity for naive circle/simple and embedded circle/simple; min-max per
/// interval for naive complete; for embedded complete the five shape
/// coordinates are min-max scaled and the three strip coordinates divided by
/// the upper eccentricity bound.
inline TargetScaling default_target_scaling(RegularizerKind k, Scenario task, const LoopIntervals& iv) {
    const std::size_t n = output_dim(k, task);
    TargetScaling s{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    if (task != Scenario::complete) return s;
    const auto arr = iv.to_array();
    const std::size_t minmax = k == RegularizerKind::naive ? 7 : 5;
    for (std::size_t i = 0; i < minmax; ++i) {
        s.offset[i] = arr[i].lo;
        s.scale[i] = arr[i].pinned() ? 1.0 : arr[i].length();
    }
    if (k == RegularizerKind::embedded) {
        const double e = iv.eps.hi > 0.0 ? iv.eps.hi : 1.0;
        for (std::size_t i = 5; i < 8; ++i) s.scale[i] = e;
    }
    return s;
}

/// Raw (unscaled) training target of sample i.
inline std::vector<double> raw_target(RegularizerKind k, const Dataset& ds, std::size_t i) {
    const Scenario task = ds.config.scenario;
    if (task == Scenario::circle) {
        const double t = ds.circle(i).theta;
        if (k == RegularizerKind::naive) return {t};
        const auto e = circle_embed({t});
        return {e[0], e[1]};
    }
    const LoopParams p = ds.params(i);
    if (task == Scenario::simple) {
        if (k == RegularizerKind::naive) return {p.alpha, p.c};
        const auto g = gamma(p.strip());
        return {g.x, g.y, g.z};
    }
    if (k == RegularizerKind::naive) {
        const auto a = p.to_array();
        return {a.begin(), a.end()};
    }
    const auto a = gamma_g(p).to_array();
    return {a.begin(), a.end()};
}

struct Regularizer {
    RegularizerKind kind = RegularizerKind::embedded;
    Scenario task = Scenario::simple;
    nn::Mlp<float> model;
    TargetScaling scaling;
    LoopIntervals intervals;
    std::string dataset_hash;
    nlohmann::json extra = nlohmann::json::object();  // caller metadata (config hashes etc.)

    std::size_t input_dim() const { return model.config.input_dim; }
};

struct Prediction {
    LoopParams params;   // loop tasks (simple: pinned fields from the intervals)
    double theta = 0.0;  // circle task, radians in [0, 2 pi)
    std::vector<double> raw;  // unscaled network output
    Diagnostics diag;
};

namespace detail {

inline double below(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }

}  // namespace detail

/// Maps an unscaled network output to parameters. Total on finite input.
inline Prediction decode_output(const Regularizer& r, std::vector<double> raw) {
    Prediction out;
    out.raw = std::move(raw);
    const auto& y = out.raw;
    auto& d = out.diag;
    const auto& iv = r.intervals;
    auto clamp_into = [&](const Interval& i, double v, const char* name, bool open_hi = false) {
        const double hi = open_hi ? detail::below(i.hi) : i.hi;
        const double c = v < i.lo ? i.lo : (v > hi ? hi : v);
        if (c != v) d.warn(std::string("clamped ") + name + " into its interval");
        return c;
    };
    auto pinned_base = [&] {
        LoopParams p;
        p.x_c = iv.x_c.lo;
        p.y_c = iv.y_c.lo;
        p.flux = iv.flux.lo;
        p.sigma = iv.sigma.lo;
        p.eps = iv.eps.lo;
        return p;
    };

    switch (r.task) {
        case Scenario::circle:
            if (r.kind == RegularizerKind::naive)
                out.theta = clamp_into(Interval{0.0, kTwoPi}, y[0], "theta", true);
            else
                out.theta = circle_inv(y[0], y[1], &d).theta;
            break;
        case Scenario::simple: {
            LoopParams p = pinned_base();
            if (r.kind == RegularizerKind::naive) {
                p.alpha = clamp_into(iv.alpha, y[0], "alpha", true);
                p.c = clamp_into(iv.c, y[1], "c");
            } else {
                const auto m = gamma_inv({y[0], y[1], y[2]}, &d);
                p.alpha = m.alpha;
                p.c = clamp_into(iv.c, m.c, "c");
            }
            out.params = p;
            break;
        }
        case Scenario::complete: {
            LoopParams p;
            if (r.kind == RegularizerKind::naive) {
                p = LoopParams::from_array({y[0], y[1], y[2], y[3], y[4], y[5], y[6]});
                p.alpha = clamp_into(iv.alpha, p.alpha, "alpha", true);
            } else {
                p = gamma_g_inv(EmbeddedPoint8::from_span(y), {}, &d);
            }
            p.x_c = clamp_into(iv.x_c, p.x_c, "x_c");
            p.y_c = clamp_into(iv.y_c, p.y_c, "y_c");
            p.flux = clamp_into(iv.flux, p.flux, "F");
            p.sigma = clamp_into(iv.sigma, p.sigma, "sigma");
            p.eps = clamp_into(iv.eps, p.eps, "eps");
            p.c = clamp_into(iv.c, p.c, "c");
            if (p.eps == 0.0) p.alpha = p.c = 0.0;
            out.params = p;
            break;
        }
    }
    return out;
}

/// Standardized float input matrix (features x samples) for the given rows.
inline nn::Mat<float> input_matrix(const StandardizationStats& st, const Dataset& ds,
                                   std::span<const std::size_t> rows) {
    nn::Mat<float> X(static_cast<Eigen::Index>(ds.input_dim), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        st.apply<float>(ds.input(rows[j]), std::span<float>(X.col(static_cast<Eigen::Index>(j)).data(), ds.input_dim));
    return X;
}

inline nn::Mat<float> target_matrix(RegularizerKind k, const TargetScaling& s, const Dataset& ds,
                                    std::span<const std::size_t> rows) {
    const std::size_t n = output_dim(k, ds.config.scenario);
    nn::Mat<float> Y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto t = raw_target(k, ds, rows[j]);
        for (std::size_t q = 0; q < n; ++q)
            Y(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = static_cast<float>(s.to_net(q, t[q]));
    }
    return Y;
}

/// Batched prediction on dataset rows.
inline std::vector<Prediction> predict_rows(const Regularizer& r, const Dataset& ds, std::span<const std::size_t> rows) {
    if (ds.input_dim != r.input_dim())
        throw ValidationError("dataset input dimension does not match the model");
    std::vector<Prediction> out;
    out.reserve(rows.size());
    const std::size_t block = 2048;
    for (std::size_t b0 = 0; b0 < rows.size(); b0 += block) {
        const auto part = rows.subspan(b0, std::min(block, rows.size() - b0));
        const auto Y = nn::forward(r.model, input_matrix(r.model.input_stats, ds, part));
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            std::vector<double> raw(static_cast<std::size_t>(Y.rows()));
            for (Eigen::Index q = 0; q < Y.rows(); ++q)
                raw[static_cast<std::size_t>(q)] = r.scaling.from_net(static_cast<std::size_t>(q), Y(q, j));
            out.push_back(decode_output(r, std::move(raw)));
        }
    }
    return out;
}

/// Prediction for one measurement vector (visibility reals, or the circle point).
inline Prediction predict(const Regularizer& r, std::span<const double> v) {
    if (v.size() != r.input_dim())
        throw ValidationError("expected " + std::to_string(r.input_dim()) + " input values, got " +
                              std::to_string(v.size()));
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError("input values must be finite");
    nn::Mat<float> X(static_cast<Eigen::Index>(v.size()), 1);
    r.model.input_stats.apply<float>(v, std::span<float>(X.data(), v.size()));
    const auto Y = nn::forward(r.model, X);
    std::vector<double> raw(static_cast<std::size_t>(Y.rows()));
    for (Eigen::Index q = 0; q < Y.rows(); ++q)
        raw[static_cast<std::size_t>(q)] = r.scaling.from_net(static_cast<std::size_t>(q), Y(q, 0));
    return decode_output(r, std::move(raw));
}

inline Prediction predict(const Regularizer& r, const VisibilitySet& v) {
    const auto reals = v.to_reals();
    return predict(r, std::span<const double>(reals));
}

struct TrainedRegularizer {
    Regularizer reg;
    nn::TrainHistory history;
};

/// Trains a regularizer of the given kind on the dataset's train/val splits.
/// Input and output dimensions of nn_cfg are set from the task.
inline TrainedRegularizer train_regularizer(const Dataset& ds, RegularizerKind kind, nn::MlpConfig nn_cfg,
                                            const nn::TrainConfig& train_cfg,
                                            const std::optional<nn::Mlp<float>>& warm_start = std::nullopt,
                                            const std::function<void(const nn::EpochRecord&)>& on_epoch = {},
                                            Diagnostics* diag = nullptr) {
    const Scenario task = ds.config.scenario;
    nn_cfg.input_dim = ds.input_dim;
    nn_cfg.output_dim = output_dim(kind, task);

    TrainedRegularizer out;
    Regularizer& r = out.reg;
    r.kind = kind;
    r.task = task;
    r.intervals = ds.config.intervals;
    r.scaling = default_target_scaling(kind, task, r.intervals);

    if (warm_start) {
        if (!(warm_start->config == nn_cfg)) throw ValidationError("warm-start network does not match the configuration");
        r.model = *warm_start;
    } else {
        r.model = nn::init_mlp<float>(nn_cfg);
        r.model.input_stats = fit_standardization(ds, diag);
    }

    const auto tr = ds.indices(Split::train);
    const auto va = ds.indices(Split::val);
    nn::TrainingData<float> data;
    data.x_train = input_matrix(r.model.input_stats, ds, tr);
    data.y_train = target_matrix(kind, r.scaling, ds, tr);
    data.x_val = input_matrix(r.model.input_stats, ds, va);
    data.y_val = target_matrix(kind, r.scaling, ds, va);
    out.history = nn::train(r.model, data, train_cfg, on_epoch);
    return out;
}

inline TrainedRegularizer train_naive(const Dataset& ds, const nn::MlpConfig& nn_cfg, const nn::TrainConfig& tc) {
    return train_regularizer(ds, RegularizerKind::naive, nn_cfg, tc);
}

inline TrainedRegularizer train_embedded(const Dataset& ds, const nn::MlpConfig& nn_cfg, const nn::TrainConfig& tc) {
    return train_regularizer(ds, RegularizerKind::embedded, nn_cfg, tc);
}

inline nlohmann::json regularizer_metadata(const Regularizer& r) {
    return {{"kind", to_string(r.kind)},
            {"task", to_string(r.task)},
            {"embedding", embedding_id(r.kind, r.task)},
            {"dataset_hash", r.dataset_hash},
            {"target_scaling", to_json_value(r.scaling)},
            {"intervals", to_json_value(r.intervals)},
            {"extra", r.extra}};
}

inline void save_regularizer(const Regularizer& r, const std::filesystem::path& path) {
    nn::save_checkpoint(r.model, path, regularizer_metadata(r));
}

inline Regularizer load_regularizer(const std::filesystem::path& path) {
    nlohmann::json meta;
    Regularizer r;
    r.model = nn::load_checkpoint<float>(path, &meta);
    try {
        r.kind = regularizer_kind_from_string(meta.at("kind").get<std::string>());
        r.task = scenario_from_string(meta.at("task").get<std::string>());
        r.scaling = target_scaling_from_json(meta.at("target_scaling"));
        r.intervals = intervals_from_json(meta.at("intervals"));
        r.dataset_hash = meta.value("dataset_hash", std::string());
        r.extra = meta.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint lacks regularizer metadata: " + std::string(e.what()));
    }
    const std::size_t want = output_dim(r.kind, r.task);
    if (r.model.config.output_dim != want || r.scaling.offset.size() != want || r.scaling.scale.size() != want)
        throw FormatError("checkpoint output dimension " + std::to_string(r.model.config.output_dim) + " does not match " +
                          to_string(r.kind) + "/" + to_string(r.task) + " (expected " + std::to_string(want) + ")");
    if (r.model.input_stats.dim() != r.model.config.input_dim)
        throw FormatError("checkpoint standardization does not match the input dimension");
    return r;
}

}  // namespace toporeg

#pragma once

// Command implementations behind the `toporeg` executable. Each command reads
// one effective JSON settings object (config-file section plus flag
// overrides) and writes its outputs into the output directory.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "toporeg/analysis.hpp"
#include "toporeg/experiments.hpp"
#include "toporeg/regularizer.hpp"

namespace toporeg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"gen-dataset", "train", "evaluate", "demo-circle",
                                                   "pca",         "predict", "vis-forward"};
    return names;
}

struct Options {
    std::string command;
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    unsigned jobs = 1;
    bool text = false;
    bool resume = false;
    json overrides = json::object();  // dotted keys, e.g. "nn.width"
};

struct RunConfig {
    std::string command;
    json settings;  // effective settings, seed included
    std::uint64_t seed = 0;
    fs::path out;
    unsigned jobs = 1;
    bool text = false;
    bool resume = false;
    bool out_given = false;
    std::string hash;  // crc32 of the canonical settings dump
};

inline void set_path(json& j, const std::string& dotted, const json& value) {
    json* cur = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot - start);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

inline json read_json_file(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw ValidationError("cannot open config file " + p.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

/// Config layout: either a flat settings object, or an object with optional
/// "common" plus per-command sections named after the commands.
inline RunConfig resolve(const Options& o) {
    RunConfig rc;
    rc.command = o.command;
    json doc = o.config ? read_json_file(*o.config) : json::object();
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    bool sectioned = doc.contains("common");
    for (const auto& n : command_names()) sectioned = sectioned || doc.contains(n);
    json s = json::object();
    if (sectioned) {
        if (doc.contains("common")) s = doc["common"];
        if (doc.contains(o.command)) s.merge_patch(doc[o.command]);
    } else {
        s = doc;
    }
    for (auto it = o.overrides.begin(); it != o.overrides.end(); ++it) set_path(s, it.key(), it.value());
    if (o.seed) s["seed"] = *o.seed;
    if (!s.contains("seed") || !s["seed"].is_number_unsigned())
        throw ValidationError("a non-negative integer seed is required (--seed or \"seed\" in the config)");
    rc.seed = s["seed"].get<std::uint64_t>();
    rc.settings = s;
    json hashed = s;
    hashed.erase("out");  // where results land does not change them
    rc.hash = hex32(crc32_of(hashed.dump()));
    rc.out_given = o.out.has_value() || s.contains("out");
    rc.out = o.out ? *o.out : fs::path(s.value("out", std::string(".")));
    rc.jobs = std::max(1u, o.jobs);
    rc.text = o.text;
    rc.resume = o.resume;
    return rc;
}

namespace detail {

inline void prepare_out(const RunConfig& rc) { fs::create_directories(rc.out); }

inline void write_run_record(const RunConfig& rc, const json& results = json::object()) {
    json j = {{"command", rc.command}, {"config_hash", rc.hash}, {"settings", rc.settings}};
    if (!results.empty()) j["results"] = results;
    toporeg::detail::write_file(rc.out / "run.json", j.dump(2) + "\n");
}

inline fs::path required_path(const json& s, const char* key) {
    if (!s.contains(key) || !s[key].is_string())
        throw ValidationError(std::string("setting \"") + key + "\" (a path) is required");
    fs::path p = s[key].get<std::string>();
    if (!fs::exists(p)) throw ValidationError(std::string(key) + " path does not exist: " + p.string());
    return p;
}

inline FrequencySet frequencies_from(const json& s, const FrequencyConfig& fallback) {
    if (s.contains("frequencies_file")) return load_frequencies(s["frequencies_file"].get<std::string>());
    return default_frequencies(fallback);
}

inline std::vector<std::size_t> rows_for(const Dataset& ds, const std::string& split) {
    if (split == "all") {
        std::vector<std::size_t> r(ds.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
        return r;
    }
    if (split == "train") return ds.indices(Split::train);
    if (split == "val") return ds.indices(Split::val);
    if (split == "test") return ds.indices(Split::test);
    throw ValidationError("unknown split '" + split + "' (expected train, val, test or all)");
}

inline void report_diagnostics(const Diagnostics& d, std::ostream& err) {
    for (const auto& w : d.warnings) err << "warning: " << w << '\n';
}

inline std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline void cmd_gen_dataset(const RunConfig& rc, std::ostream& err = std::cerr) {
    SamplingConfig c = sampling_config_from_json(rc.settings);
    c.seed = rc.seed;
    c.validate();
    const FrequencySet freqs = detail::frequencies_from(rc.settings, c.frequencies);
    const Dataset ds = generate_dataset(c, freqs, rc.jobs);
    detail::prepare_out(rc);
    save_dataset(ds, rc.out, rc.text);
    detail::write_run_record(rc, {{"samples", ds.size()}});
    err << "wrote " << ds.size() << " " << to_string(c.scenario) << " samples to " << rc.out.string() << '\n';
}

inline void cmd_train(const RunConfig& rc, std::ostream& err = std::cerr) {
    const auto& s = rc.settings;
    const fs::path data_dir = detail::required_path(s, "dataset");
    const Dataset ds = load_dataset(data_dir);
    const RegularizerKind kind = regularizer_kind_from_string(s.value("kind", std::string("embedded")));

    nn::MlpConfig nc = nn::mlp_config_from_json(s.value("nn", json::object()));
    nc.seed = derive_seed(rc.seed, 0x696e6974ULL, 0);
    nn::TrainConfig tc = nn::train_config_from_json(s.value("train", json::object()));
    tc.seed = derive_seed(rc.seed, 0x747261696eULL, 0);
    tc.jobs = rc.jobs;

    const fs::path ckpt = rc.out / "model.ckpt";
    std::optional<nn::Mlp<float>> warm;
    if (rc.resume && fs::exists(ckpt)) {
        const Regularizer prev = load_regularizer(ckpt);
        const std::string prev_hash = prev.extra.value("config_hash", std::string());
        if (prev_hash != rc.hash)
            throw ValidationError("cannot resume: checkpoint config hash " + prev_hash + " differs from " + rc.hash);
        warm = prev.model;
        err << "resuming from " << ckpt.string() << '\n';
    }

    Diagnostics diag;
    auto trained = train_regularizer(
        ds, kind, nc, tc, warm,
        [&](const nn::EpochRecord& e) {
            err << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << '\n';
        },
        &diag);
    detail::report_diagnostics(diag, err);
    trained.reg.dataset_hash = dataset_manifest_hash(data_dir);
    trained.reg.extra = {{"config_hash", rc.hash}, {"train", nn::to_json_value(tc)}};

    detail::prepare_out(rc);
    save_regularizer(trained.reg, ckpt);
    toporeg::detail::write_file(rc.out / "history.csv", trained.history.to_csv());
    detail::write_run_record(rc, {{"best_epoch", trained.history.best_epoch},
                                  {"best_val_loss", trained.history.best_val_loss},
                                  {"initial_train_loss", trained.history.initial_train_loss},
                                  {"epochs_run", trained.history.epochs.size()},
                                  {"output_dim", trained.reg.model.config.output_dim},
                                  {"dataset_hash", trained.reg.dataset_hash}});
}

inline void cmd_evaluate(const RunConfig& rc, std::ostream& err = std::cerr) {
    const auto& s = rc.settings;
    const fs::path data_dir = detail::required_path(s, "dataset");
    const fs::path model_path = detail::required_path(s, "model");
    const Dataset ds = load_dataset(data_dir);
    const Regularizer reg = load_regularizer(model_path);
    if (reg.task != ds.config.scenario)
        throw ValidationError(std::string("model task ") + to_string(reg.task) + " does not match dataset scenario " +
                              to_string(ds.config.scenario));
    const auto rows = detail::rows_for(ds, s.value("split", std::string("test")));
    if (rows.empty()) throw ValidationError("selected split is empty");

    const auto preds = predict_rows(reg, ds, rows);
    Diagnostics diag;
    for (const auto& p : preds) diag.merge(p.diag);
    if (!diag.empty()) err << diag.warnings.size() << " prediction diagnostics (clamping or degenerate inverses)\n";

    MetricReport rep = build_report(reg, ds, rows, preds);
    const std::size_t pca_dims = s.value("pca_dims", std::size_t{0});
    if (pca_dims > 0) {
        const auto m = pca_fit(ds, rows, pca_dims);
        for (auto& r : rep.records) r.pca = pca_project(m, ds.input(r.index));
    }

    detail::prepare_out(rc);
    const json extra = {{"config_hash", rc.hash},
                        {"dataset_hash", dataset_manifest_hash(data_dir)},
                        {"model_config_hash", reg.extra.value("config_hash", std::string())},
                        {"split", s.value("split", std::string("test"))}};
    toporeg::detail::write_file(rc.out / "report.json", report_to_json(rep, extra).dump(2) + "\n");
    export_scatter(rep, rc.out / "scatter.csv");

    std::ostringstream box;
    box << "parameter,min,q25,median,q75,max\n";
    for (std::size_t p = 0; p < rep.params.size(); ++p) {
        if (!rep.scored[p]) continue;
        const auto b = box_stats(rep.column(p, true));
        box << rep.params[p] << ',' << detail::csv_number(b.min) << ',' << detail::csv_number(b.q25) << ','
            << detail::csv_number(b.median) << ',' << detail::csv_number(b.q75) << ',' << detail::csv_number(b.max)
            << '\n';
    }
    toporeg::detail::write_file(rc.out / "box.csv", box.str());
    detail::write_run_record(rc, {{"count", rep.size()}});
}

inline void cmd_demo_circle(const RunConfig& rc, std::ostream& err = std::cerr) {
    CircleDemoConfig c = circle_demo_config_from_json(rc.settings);
    c.seed = rc.seed;
    c.jobs = rc.jobs;
    const auto res = run_circle_demo(c);
    detail::prepare_out(rc);
    toporeg::detail::write_file(rc.out / "circle_scatter.csv", res.scatter_csv());
    toporeg::detail::write_file(rc.out / "naive_history.csv", res.naive.history.to_csv());
    toporeg::detail::write_file(rc.out / "embedded_history.csv", res.embedded.history.to_csv());
    save_regularizer(res.naive.reg, rc.out / "naive.ckpt");
    save_regularizer(res.embedded.reg, rc.out / "embedded.ckpt");
    json summary = res.summary();
    summary["config_hash"] = rc.hash;
    toporeg::detail::write_file(rc.out / "summary.json", summary.dump(2) + "\n");
    detail::write_run_record(rc, res.summary());
    err << "naive seam max error " << res.naive_seam_max_raw_error << " rad, embedded mean circular error "
        << res.embedded_mean_circular_error << " rad\n";
}

inline void cmd_pca(const RunConfig& rc, std::ostream& err = std::cerr) {
    const auto& s = rc.settings;
    const fs::path data_dir = detail::required_path(s, "dataset");
    const std::size_t k = s.value("k", std::size_t{3});
    const Dataset ds = load_dataset(data_dir);
    if (k < 1 || k > ds.input_dim)
        throw ValidationError("k must lie in [1, " + std::to_string(ds.input_dim) + "], got " + std::to_string(k));
    auto rows = detail::rows_for(ds, s.value("split", std::string("all")));
    const std::size_t max_rows = s.value("max_rows", std::size_t{0});
    if (max_rows > 0 && rows.size() > max_rows) rows.resize(max_rows);
    const auto m = pca_fit(ds, rows, k);
    detail::prepare_out(rc);
    toporeg::detail::write_file(rc.out / "pca.csv", pca_projection_csv(m, ds, rows));
    json j = to_json_value(m);
    j["config_hash"] = rc.hash;
    j["dataset_hash"] = dataset_manifest_hash(data_dir);
    j["rows"] = rows.size();
    toporeg::detail::write_file(rc.out / "pca.json", j.dump(2) + "\n");
    detail::write_run_record(rc, {{"rows", rows.size()}});
    err << "projected " << rows.size() << " samples on " << k << " axes\n";
}

/// Reads numbers separated by commas and/or whitespace. Errors carry
/// file:line:column.
inline std::vector<double> parse_number_list(const std::string& text, const std::string& origin) {
    std::vector<double> out;
    std::size_t line = 1, col = 1, i = 0;
    while (i < text.size()) {
        const char ch = text[i];
        if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
            if (ch == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && text[j] != ',' && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        const std::string tok = text.substr(i, j - i);
        std::size_t used = 0;
        double v = 0.0;
        bool ok = true;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            ok = false;
        }
        if (!ok || used != tok.size() || !std::isfinite(v))
            throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid number '" +
                             tok + "'");
        out.push_back(v);
        col += j - i;
        i = j;
    }
    return out;
}

struct NamedValue {
    std::string name;
    double value;
    std::string unit;
};

inline std::vector<NamedValue> describe(const Regularizer& reg, const Prediction& p) {
    if (reg.task == Scenario::circle) return {{"theta", rad_to_deg(p.theta), "deg"}};
    const auto& q = p.params;
    return {{"x_c", q.x_c, "arcsec"},    {"y_c", q.y_c, "arcsec"}, {"F", q.flux, "photons"},
            {"sigma", q.sigma, "arcsec"}, {"eps", q.eps, "1"},      {"alpha", rad_to_deg(q.alpha), "deg"},
            {"c", q.c, "arcsec^-1"}};
}

inline void cmd_predict(const RunConfig& rc, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const auto& s = rc.settings;
    const Regularizer reg = load_regularizer(detail::required_path(s, "model"));
    const fs::path input = detail::required_path(s, "input");
    const auto values = parse_number_list(toporeg::detail::read_file(input), input.string());
    if (values.size() != reg.input_dim())
        throw ParseError(input.string() + ": expected " + std::to_string(reg.input_dim()) + " values, found " +
                         std::to_string(values.size()));
    const Prediction p = predict(reg, std::span<const double>(values));
    detail::report_diagnostics(p.diag, err);

    const auto named = describe(reg, p);
    out << "parameter,value,unit\n";
    for (const auto& n : named) out << n.name << ',' << detail::csv_number(n.value) << ',' << n.unit << '\n';

    if (rc.out_given || s.value("render", false)) {
        detail::prepare_out(rc);
        json j = json::object();
        for (const auto& n : named) j[n.name] = {{"value", n.value}, {"unit", n.unit}};
        j["config_hash"] = rc.hash;
        j["warnings"] = p.diag.warnings;
        toporeg::detail::write_file(rc.out / "prediction.json", j.dump(2) + "\n");
    }
    if (s.value("render", false)) {
        if (reg.task == Scenario::circle) throw ValidationError("--render needs a loop model");
        const auto geom = build_loop_components(p.params);
        const auto grid = oracle_grid(geom, s.value("render_pixels", 128), s.value("render_pad_fwhm", 2.0));
        const auto img = eval_image(geom, grid);
        std::ostringstream os;
        os.precision(17);
        os << "x,y,intensity\n";
        for (int k = 0; k < grid.ny; ++k)
            for (int i = 0; i < grid.nx; ++i) os << grid.x(i) << ',' << grid.y(k) << ',' << img.at(i, k) << '\n';
        toporeg::detail::write_file(rc.out / "image.csv", os.str());
    }
}

inline LoopParams params_from_json(const json& j) {
    LoopParams p;
    try {
        p.x_c = j.value("x_c", 0.0);
        p.y_c = j.value("y_c", 0.0);
        p.flux = j.at("F").get<double>();
        p.sigma = j.at("sigma").get<double>();
        p.eps = j.value("eps", 0.0);
        p.alpha = deg_to_rad(j.value("alpha_deg", 0.0));
        p.c = j.value("c", 0.0);
    } catch (const json::exception&) {
        throw ValidationError("params need numeric F and sigma (x_c, y_c, eps, alpha_deg, c default to 0)");
    }
    validate(p);
    return p;
}

inline void cmd_vis_forward(const RunConfig& rc, std::ostream& err = std::cerr) {
    const auto& s = rc.settings;
    const LoopParams p = params_from_json(s.value("params", json::object()));
    const FrequencySet freqs =
        detail::frequencies_from(s, frequency_config_from_json(s.value("frequencies", json::object())));
    const LoopBuildConfig lc = loop_config_from_json(s.value("loop", json::object()));
    const auto geom = build_loop_components(p, lc);
    VisibilitySet v;
    Diagnostics diag;
    if (s.value("oracle", false)) {
        v = visibilities_quadrature_oracle(geom, freqs, oracle_grid(geom, s.value("grid", 1024)), &diag);
    } else {
        v = visibilities_closed_form(geom, freqs);
    }
    detail::report_diagnostics(diag, err);
    std::ostringstream os;
    os.precision(17);
    os << "u,v,re,im\n";
    for (std::size_t j = 0; j < freqs.size(); ++j)
        os << freqs.uv[j].u << ',' << freqs.uv[j].v << ',' << v.values[j].real() << ',' << v.values[j].imag() << '\n';
    detail::prepare_out(rc);
    toporeg::detail::write_file(rc.out / "visibilities.csv", os.str());
    detail::write_run_record(rc, {{"method", s.value("oracle", false) ? "quadrature" : "closed_form"}});
}

/// Runs a command; returns the process exit code.
inline int run(const Options& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const RunConfig rc = resolve(o);
        if (o.command == "gen-dataset") cmd_gen_dataset(rc, err);
        else if (o.command == "train") cmd_train(rc, err);
        else if (o.command == "evaluate") cmd_evaluate(rc, err);
        else if (o.command == "demo-circle") cmd_demo_circle(rc, err);
        else if (o.command == "pca") cmd_pca(rc, err);
        else if (o.command == "predict") cmd_predict(rc, out, err);
        else if (o.command == "vis-forward") cmd_vis_forward(rc, err);
        else throw ValidationError("unknown command '" + o.command + "'");
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return 3;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << '\n';
        return 3;
    } catch (const TrainingError& e) {
        err << "training error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace toporeg::cli

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "toporeg/cli.hpp"

namespace {

using toporeg::cli::Options;

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    unsigned jobs = 1;
    bool text = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file (flat, or with per-command sections)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "master seed (required here or in the config)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads; results do not depend on this")->check(CLI::PositiveNumber);
    sub->add_flag("--text", c.text, "write datasets as CSV instead of binary");
}

// Optional flag that, when given, overrides a (dotted) settings key.
template <class T>
struct Override {
    std::string key;
    std::optional<T> value;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topology-aware learned regularizers for parametric loop-shape inversion"};
    app.require_subcommand(1);
    Common common;

    std::vector<Override<std::string>> str_ov;
    std::vector<Override<double>> num_ov;
    std::vector<Override<std::int64_t>> int_ov;
    str_ov.reserve(32);
    num_ov.reserve(32);
    int_ov.reserve(32);
    bool resume = false, oracle = false, render = false;

    auto str = [&](CLI::App* s, const std::string& flag, const std::string& key, const std::string& help) {
        str_ov.push_back({key, {}});
        s->add_option(flag, str_ov.back().value, help);
    };
    auto num = [&](CLI::App* s, const std::string& flag, const std::string& key, const std::string& help) {
        num_ov.push_back({key, {}});
        s->add_option(flag, num_ov.back().value, help);
    };
    auto integer = [&](CLI::App* s, const std::string& flag, const std::string& key, const std::string& help) {
        int_ov.push_back({key, {}});
        s->add_option(flag, int_ov.back().value, help)->check(CLI::NonNegativeNumber);
    };

    auto* gen = app.add_subcommand("gen-dataset", "generate a synthetic dataset");
    str(gen, "--scenario", "scenario", "circle, simple or complete");
    integer(gen, "--n-train", "n_train", "training samples");
    integer(gen, "--n-val", "n_val", "validation samples");
    integer(gen, "--n-test", "n_test", "test samples");
    integer(gen, "--samples", "samples", "total samples (must equal the split sum)");
    str(gen, "--frequencies", "frequencies_file", "CSV file of u,v frequencies");

    auto* train = app.add_subcommand("train", "train a naive or embedded regularizer");
    str(train, "--dataset", "dataset", "dataset directory");
    str(train, "--kind", "kind", "naive or embedded");
    integer(train, "--epochs", "train.epochs", "maximum epochs");
    integer(train, "--batch-size", "train.batch_size", "mini-batch size");
    num(train, "--lr", "train.lr", "Adam learning rate");
    integer(train, "--patience", "train.patience", "early-stopping patience (0 disables)");
    integer(train, "--grad-chunks", "train.grad_chunks", "gradient chunks per batch");
    integer(train, "--width", "nn.width", "hidden width");
    integer(train, "--depth", "nn.depth", "hidden layers");
    num(train, "--dropout", "nn.dropout", "dropout rate");
    train->add_flag("--resume", resume, "continue from <out>/model.ckpt (config hash must match)");

    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset split");
    str(eval, "--dataset", "dataset", "dataset directory");
    str(eval, "--model", "model", "checkpoint file");
    str(eval, "--split", "split", "train, val, test or all");
    integer(eval, "--pca-dims", "pca_dims", "append this many PCA coordinates to the scatter CSV");

    auto* demo = app.add_subcommand("demo-circle", "naive versus embedded regression on the circle");
    integer(demo, "--n-train", "n_train", "training samples");
    integer(demo, "--epochs", "epochs", "maximum epochs");

    auto* pca = app.add_subcommand("pca", "principal-component projection of visibilities");
    str(pca, "--dataset", "dataset", "dataset directory");
    integer(pca, "--k", "k", "number of axes");
    str(pca, "--split", "split", "train, val, test or all");
    integer(pca, "--max-rows", "max_rows", "limit on projected samples (0 = all)");

    auto* pred = app.add_subcommand("predict", "apply a checkpoint to a visibility file");
    str(pred, "--model", "model", "checkpoint file");
    str_ov.push_back({"input", {}});
    pred->add_option("input", str_ov.back().value, "file with the input values (comma or whitespace separated)");
    pred->add_flag("--render", render, "write the predicted source image to <out>/image.csv");

    auto* vis = app.add_subcommand("vis-forward", "visibilities of a loop shape");
    num(vis, "--x-c", "params.x_c", "centre x [arcsec]");
    num(vis, "--y-c", "params.y_c", "centre y [arcsec]");
    num(vis, "--flux", "params.F", "total flux");
    num(vis, "--sigma", "params.sigma", "FWHM [arcsec]");
    num(vis, "--eps", "params.eps", "eccentricity");
    num(vis, "--alpha-deg", "params.alpha_deg", "rotation angle [deg]");
    num(vis, "--c", "params.c", "curvature [arcsec^-1]");
    str(vis, "--frequencies", "frequencies_file", "CSV file of u,v frequencies");
    integer(vis, "--grid", "grid", "quadrature grid size");
    vis->add_flag("--oracle", oracle, "use the quadrature oracle instead of the closed form");

    for (auto* s : {gen, train, eval, demo, pca, pred, vis}) add_common(s, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Options o;
    for (auto* s : app.get_subcommands()) o.command = s->get_name();
    if (common.config) o.config = *common.config;
    o.seed = common.seed;
    if (common.out) o.out = *common.out;
    o.jobs = common.jobs;
    o.text = common.text;
    o.resume = resume;
    for (const auto& v : str_ov)
        if (v.value) o.overrides[v.key] = *v.value;
    for (const auto& v : num_ov)
        if (v.value) o.overrides[v.key] = *v.value;
    for (const auto& v : int_ov)
        if (v.value) o.overrides[v.key] = *v.value;
    if (oracle) o.overrides["oracle"] = true;
    if (render) o.overrides["render"] = true;
    return toporeg::cli::run(o);
}

#pragma once

// Fully connected ReLU network trained with mean squared error and Adam.
//
//   N(z) = W_L (l_{L-1} o ... o l_1)(z) [+ b_L],   l(z) = relu(W z + b)
//
// Samples are stored as columns. The scalar type is a template parameter:
// float for training, double for gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "toporeg/core.hpp"
#include "toporeg/dataset.hpp"

namespace toporeg::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Mode { train, eval };

struct MlpConfig {
    std::size_t input_dim = 60;
    std::vector<std::size_t> hidden_widths = {256, 256, 256, 256};
    std::size_t output_dim = 3;
    double dropout = 0.0;
    bool drop_input = false;  // also drop raw input features
    bool final_bias = true;
    std::uint64_t seed = 1;

    static MlpConfig uniform(std::size_t input, std::size_t width, std::size_t depth, std::size_t output) {
        MlpConfig c;
        c.input_dim = input;
        c.hidden_widths.assign(depth, width);
        c.output_dim = output;
        return c;
    }

    std::size_t depth() const noexcept { return hidden_widths.size(); }

    /// Dropout sites: the output of every hidden layer, i.e. the input of
    /// layers 1..depth, plus the raw input when drop_input is set.
    bool drops_input_of(std::size_t layer) const noexcept { return dropout > 0.0 && (layer > 0 || drop_input); }

    void validate() const {
        if (input_dim < 1 || output_dim < 1) throw ValidationError("network dimensions must be >= 1");
        if (hidden_widths.empty()) throw ValidationError("network needs at least one hidden layer");
        for (auto w : hidden_widths)
            if (w < 1) throw ValidationError("hidden widths must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout rate must lie in [0, 1)");
    }

    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

inline nlohmann::json to_json_value(const MlpConfig& c) {
    return {{"input_dim", c.input_dim}, {"hidden_widths", c.hidden_widths}, {"output_dim", c.output_dim},
            {"dropout", c.dropout},     {"drop_input", c.drop_input},       {"final_bias", c.final_bias},
            {"seed", c.seed}};
}

inline MlpConfig mlp_config_from_json(const nlohmann::json& j, MlpConfig c = {}) {
    c.input_dim = j.value("input_dim", c.input_dim);
    if (j.contains("hidden_widths")) {
        c.hidden_widths = j["hidden_widths"].get<std::vector<std::size_t>>();
    } else if (j.contains("width") || j.contains("depth")) {
        const std::size_t width = j.value("width", c.hidden_widths.empty() ? 256 : c.hidden_widths.front());
        const std::size_t depth = j.value("depth", c.hidden_widths.size());
        c.hidden_widths.assign(depth, width);
    }
    c.output_dim = j.value("output_dim", c.output_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.drop_input = j.value("drop_input", c.drop_input);
    c.final_bias = j.value("final_bias", c.final_bias);
    c.seed = j.value("seed", c.seed);
    return c;
}

template <class T>
struct Mlp {
    MlpConfig config;
    std::vector<Mat<T>> weights;  // weights[l]: out x in
    std::vector<Vec<T>> biases;   // last entry stays zero without a final bias
    StandardizationStats input_stats;

    std::size_t layers() const noexcept { return weights.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            n += static_cast<std::size_t>(weights[l].size());
            if (l + 1 < weights.size() || config.final_bias) n += static_cast<std::size_t>(biases[l].size());
        }
        return n;
    }

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

/// He-normal weights (std sqrt(2 / fan_in)), zero biases.
template <class T>
Mlp<T> init_mlp(const MlpConfig& cfg) {
    cfg.validate();
    Mlp<T> m;
    m.config = cfg;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x696e6974ULL, 0));
    std::size_t in = cfg.input_dim;
    auto add = [&](std::size_t out) {
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        Mat<T> w(out, in);
        // Row-major fill order keeps the draw sequence independent of storage order.
        for (std::size_t r = 0; r < out; ++r)
            for (std::size_t c = 0; c < in; ++c) w(r, c) = static_cast<T>(nd(rng));
        m.weights.push_back(std::move(w));
        m.biases.push_back(Vec<T>::Zero(out));
        in = out;
    };
    for (auto w : cfg.hidden_widths) add(w);
    add(cfg.output_dim);
    return m;
}

namespace detail {

// Inverted-dropout mask: entries are 0 or 1/(1-rate).
template <class T>
void dropout_mask(Mat<T>& mask, Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
    mask.resize(rows, cols);
    const auto threshold = static_cast<std::uint32_t>(rate * 65536.0);
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    T* p = mask.data();
    const Eigen::Index n = rows * cols;
    Eigen::Index i = 0;
    while (i < n) {
        std::uint64_t bits = rng();
        for (int k = 0; k < 4 && i < n; ++k, ++i, bits >>= 16)
            p[i] = (static_cast<std::uint32_t>(bits & 0xffffu) < threshold) ? T(0) : keep;
    }
}

}  // namespace detail

/// Batched forward pass. X is input_dim x batch (already standardized).
/// In train mode dropout masks are drawn from `rng`, layer by layer, at the
/// sites given by MlpConfig::drops_input_of.
template <class T>
Mat<T> forward(const Mlp<T>& m, const Mat<T>& X, Mode mode = Mode::eval, std::mt19937_64* rng = nullptr) {
    if (static_cast<std::size_t>(X.rows()) != m.config.input_dim)
        throw ValidationError("input has " + std::to_string(X.rows()) + " features, network expects " +
                              std::to_string(m.config.input_dim));
    const bool drop = mode == Mode::train && m.config.dropout > 0.0;
    if (drop && !rng) throw ValidationError("train-mode dropout needs a random generator");
    Mat<T> a = X;
    Mat<T> mask;
    const std::size_t L = m.layers();
    for (std::size_t l = 0; l < L; ++l) {
        if (drop && m.config.drops_input_of(l)) {
            detail::dropout_mask(mask, a.rows(), a.cols(), m.config.dropout, *rng);
            a = a.cwiseProduct(mask);
        }
        Mat<T> z = m.weights[l] * a;
        if (l + 1 < L || m.config.final_bias) z.colwise() += m.biases[l];
        a = l + 1 < L ? Mat<T>(z.cwiseMax(T(0))) : std::move(z);
    }
    return a;
}

/// Single-sample eval-mode forward.
template <class T>
std::vector<double> forward(const Mlp<T>& m, std::span<const double> x) {
    Mat<T> X(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t k = 0; k < x.size(); ++k) X(static_cast<Eigen::Index>(k), 0) = static_cast<T>(x[k]);
    Mat<T> y = forward(m, X);
    std::vector<double> out(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index k = 0; k < y.rows(); ++k) out[static_cast<std::size_t>(k)] = static_cast<double>(y(k, 0));
    return out;
}

template <class T>
struct Gradients {
    std::vector<Mat<T>> dW;
    std::vector<Vec<T>> db;

    static Gradients zeros_like(const Mlp<T>& m) {
        Gradients g;
        for (std::size_t l = 0; l < m.layers(); ++l) {
            g.dW.push_back(Mat<T>::Zero(m.weights[l].rows(), m.weights[l].cols()));
            g.db.push_back(Vec<T>::Zero(m.biases[l].size()));
        }
        return g;
    }

    Gradients& operator+=(const Gradients& o) {
        for (std::size_t l = 0; l < dW.size(); ++l) {
            dW[l] += o.dW[l];
            db[l] += o.db[l];
        }
        return *this;
    }

    bool all_zero() const {
        for (const auto& w : dW)
            if (!w.isZero(0)) return false;
        for (const auto& b : db)
            if (!b.isZero(0)) return false;
        return true;
    }
};

template <class T>
struct LossGrad {
    double loss = 0.0;  // sum over the given columns of squared error, divided by `denom`
    Gradients<T> grads;
};

/// Squared-error loss and its exact gradient by backpropagation.
///
/// Returns (1/denom) * sum_i ||N(x_i) - y_i||^2 over the columns of X, Y.
/// With denom = batch size this is the batch mean; passing the full batch
/// size for a sub-chunk lets chunk results be summed.
template <class T>
LossGrad<T> loss_and_grad(const Mlp<T>& m, const Mat<T>& X, const Mat<T>& Y, std::mt19937_64* rng = nullptr,
                          Eigen::Index denom = 0) {
    if (X.cols() == 0) throw ValidationError("loss needs a non-empty batch");
    if (X.cols() != Y.cols() || static_cast<std::size_t>(Y.rows()) != m.config.output_dim)
        throw ValidationError("target shape does not match the network output");
    if (static_cast<std::size_t>(X.rows()) != m.config.input_dim)
        throw ValidationError("input shape does not match the network");
    if (denom == 0) denom = X.cols();
    const bool drop = m.config.dropout > 0.0 && rng != nullptr;
    const std::size_t L = m.layers();

    // Forward with caches: inputs[l] is the (masked) input of layer l.
    std::vector<Mat<T>> inputs(L);
    std::vector<Mat<T>> masks(L);
    std::vector<Mat<T>> pre(L);
    Mat<T> a = X;
    for (std::size_t l = 0; l < L; ++l) {
        if (drop && m.config.drops_input_of(l)) {
            detail::dropout_mask(masks[l], a.rows(), a.cols(), m.config.dropout, *rng);
            a = a.cwiseProduct(masks[l]);
        }
        inputs[l] = std::move(a);
        if (l + 1 == L) break;
        pre[l].noalias() = m.weights[l] * inputs[l];
        pre[l].colwise() += m.biases[l];
        a = pre[l].cwiseMax(T(0));
    }
    Mat<T> out;
    out.noalias() = m.weights[L - 1] * inputs[L - 1];
    if (m.config.final_bias) out.colwise() += m.biases[L - 1];

    Mat<T> diff = out - Y;
    LossGrad<T> r;
    r.loss = static_cast<double>(diff.squaredNorm()) / static_cast<double>(denom);
    r.grads = Gradients<T>::zeros_like(m);

    Mat<T> delta = diff * (T(2) / static_cast<T>(denom));
    for (std::size_t l = L; l-- > 0;) {
        r.grads.dW[l].noalias() = delta * inputs[l].transpose();
        if (l + 1 < L || m.config.final_bias) r.grads.db[l] = delta.rowwise().sum();
        if (l == 0) break;
        Mat<T> back;
        back.noalias() = m.weights[l].transpose() * delta;
        // through the mask applied to this layer's input (if any) and the ReLU of layer l-1
        if (drop && m.config.drops_input_of(l)) back = back.cwiseProduct(masks[l]);
        delta = (pre[l - 1].array() > T(0)).select(back, T(0));
    }
    return r;
}

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    Gradients<T> m;
    Gradients<T> v;

    static AdamState init(const Mlp<T>& model, AdamHyper h = {}) {
        AdamState s;
        s.hyper = h;
        s.m = Gradients<T>::zeros_like(model);
        s.v = Gradients<T>::zeros_like(model);
        return s;
    }
};

/// Bias-corrected Adam update.
template <class T>
void adam_step(AdamState<T>& st, Mlp<T>& model, const Gradients<T>& g) {
    if (g.dW.size() != model.layers() || st.m.dW.size() != model.layers())
        throw ValidationError("optimizer state does not match the network");
    ++st.step;
    const double b1 = st.hyper.beta1, b2 = st.hyper.beta2;
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(b1, static_cast<double>(st.step))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(b2, static_cast<double>(st.step))));
    const T lr = static_cast<T>(st.hyper.lr);
    const T eps = static_cast<T>(st.hyper.eps);
    const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
    auto update = [&](auto& p, auto& m, auto& v, const auto& grad) {
        m.array() = tb1 * m.array() + (T(1) - tb1) * grad.array();
        v.array() = tb2 * v.array() + (T(1) - tb2) * grad.array().square();
        p.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
    };
    const std::size_t L = model.layers();
    for (std::size_t l = 0; l < L; ++l) {
        update(model.weights[l], st.m.dW[l], st.v.dW[l], g.dW[l]);
        if (l + 1 < L || model.config.final_bias) update(model.biases[l], st.m.db[l], st.v.db[l], g.db[l]);
    }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    std::size_t patience = 0;  // 0 disables early stopping
    std::uint64_t seed = 1;
    // Each batch is split into this many column chunks whose gradients are
    // summed in chunk order. Results depend on this value, never on `jobs`.
    std::size_t grad_chunks = 1;
    unsigned jobs = 1;

    void validate() const {
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (batch_size < 1) throw ValidationError("batch size must be >= 1");
        if (grad_chunks < 1) throw ValidationError("grad_chunks must be >= 1");
        if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
    }
};

inline nlohmann::json to_json_value(const TrainConfig& c) {
    return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},
            {"patience", c.patience}, {"seed", c.seed}, {"grad_chunks", c.grad_chunks}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.grad_chunks = j.value("grad_chunks", c.grad_chunks);
    return c;
}

template <class T>
struct TrainingData {
    Mat<T> x_train, y_train;
    Mat<T> x_val, y_val;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    double initial_train_loss = 0.0;  // eval mode, before the first update
    double initial_val_loss = 0.0;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    bool stopped_early = false;

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "epoch,train_loss,val_loss\n";
        for (const auto& e : epochs) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
        return os.str();
    }
};

/// Mean squared error (per sample, summed over outputs) in eval mode.
template <class T>
double mse(const Mlp<T>& m, const Mat<T>& X, const Mat<T>& Y, Eigen::Index block = 2048) {
    if (X.cols() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index c0 = 0; c0 < X.cols(); c0 += block) {
        const Eigen::Index n = std::min(block, X.cols() - c0);
        Mat<T> out = forward(m, Mat<T>(X.middleCols(c0, n)));
        total += static_cast<double>((out - Y.middleCols(c0, n)).squaredNorm());
    }
    return total / static_cast<double>(X.cols());
}

/// Mini-batch Adam on shuffled epochs. Returns the parameters with the lowest
/// validation loss (or the final ones when there is no validation data).
template <class T>
TrainHistory train(Mlp<T>& model, const TrainingData<T>& data, const TrainConfig& cfg,
                   const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    const Eigen::Index n = data.x_train.cols();
    if (n == 0) throw ValidationError("training split is empty");
    const bool have_val = data.x_val.cols() > 0;

    TrainHistory hist;
    hist.initial_train_loss = mse(model, data.x_train, data.y_train);
    hist.initial_val_loss = have_val ? mse(model, data.x_val, data.y_val) : hist.initial_train_loss;

    AdamHyper hyper;
    hyper.lr = cfg.lr;
    auto opt = AdamState<T>::init(model, hyper);
    Mlp<T> best = model;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    const std::size_t bs = std::min<std::size_t>(cfg.batch_size, static_cast<std::size_t>(n));

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0x73687566ULL, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += bs, ++batches) {
            const std::size_t nb = std::min(bs, order.size() - b0);
            std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                          order.begin() + static_cast<std::ptrdiff_t>(b0 + nb));
            const Mat<T> xb = data.x_train(Eigen::all, idx);
            const Mat<T> yb = data.y_train(Eigen::all, idx);

            const std::size_t chunks = std::min(cfg.grad_chunks, nb);
            std::vector<LossGrad<T>> parts(chunks);
            auto run_chunk = [&](std::size_t c) {
                const Eigen::Index c0 = static_cast<Eigen::Index>(c * nb / chunks);
                const Eigen::Index c1 = static_cast<Eigen::Index>((c + 1) * nb / chunks);
                std::mt19937_64 rng(derive_seed(cfg.seed ^ derive_seed(epoch, batches, c), 0x64726f70ULL, c));
                parts[c] = loss_and_grad(model, Mat<T>(xb.middleCols(c0, c1 - c0)),
                                         Mat<T>(yb.middleCols(c0, c1 - c0)), &rng,
                                         static_cast<Eigen::Index>(nb));
            };
            if (cfg.jobs > 1 && chunks > 1) {
                std::vector<std::thread> pool;
                const unsigned workers = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(chunks));
                for (unsigned w = 0; w < workers; ++w)
                    pool.emplace_back([&, w] {
                        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
                    });
                for (auto& t : pool) t.join();
            } else {
                for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
            }
            double loss = parts[0].loss;
            for (std::size_t c = 1; c < chunks; ++c) {
                parts[0].grads += parts[c].grads;
                loss += parts[c].loss;
            }
            if (!std::isfinite(loss))
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches));
            loss_sum += loss;
            adam_step(opt, model, parts[0].grads);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.val_loss = have_val ? mse(model, data.x_val, data.y_val) : rec.train_loss;
        if (!std::isfinite(rec.val_loss))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        hist.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_loss < hist.best_val_loss) {
            hist.best_val_loss = rec.val_loss;
            hist.best_epoch = epoch;
            best = model;
        } else if (cfg.patience > 0 && epoch - hist.best_epoch >= cfg.patience) {
            hist.stopped_early = true;
            break;
        }
    }
    model = std::move(best);
    return hist;
}

/// Product of layer spectral norms: a Lipschitz constant of the eval-mode
/// network in the Euclidean norm (ReLU is 1-Lipschitz).
template <class T>
double lipschitz_bound(const Mlp<T>& m) {
    double bound = 1.0;
    for (const auto& w : m.weights) {
        Eigen::MatrixXd wd = w.template cast<double>();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(wd);
        bound *= svd.singularValues()(0);
    }
    return bound;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "TRGCKPT\0" | u32 version | u32 scalar bytes | u64 json length | json
//   | per layer: u64 rows, u64 cols, weights (column-major), bias
//   | u64 stats dim, mean[dim] f64, std[dim] f64 | u32 crc32 of everything before

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'T', 'R', 'G', 'C', 'K', 'P', 'T', '\0'};

namespace detail {

struct Writer {
    std::string buf;
    template <class V>
    void put(const V& v) {
        buf.append(reinterpret_cast<const char*>(&v), sizeof(V));
    }
    template <class V>
    void put_array(const V* p, std::size_t n) {
        buf.append(reinterpret_cast<const char*>(p), n * sizeof(V));
    }
};

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    template <class V>
    V get() {
        V v;
        need(sizeof(V));
        std::memcpy(&v, buf.data() + pos, sizeof(V));
        pos += sizeof(V);
        return v;
    }
    template <class V>
    void get_array(V* p, std::size_t n) {
        need(n * sizeof(V));
        if (n) std::memcpy(p, buf.data() + pos, n * sizeof(V));
        pos += n * sizeof(V);
    }
    void need(std::size_t n) const {
        if (n > buf.size() - pos) throw FormatError("checkpoint is truncated");
    }
};

}  // namespace detail

template <class T>
void save_checkpoint(const Mlp<T>& m, const std::filesystem::path& path, const nlohmann::json& meta = {}) {
    detail::Writer w;
    w.buf.append(kCheckpointMagic, 8);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(sizeof(T));
    nlohmann::json head = {{"config", to_json_value(m.config)}, {"meta", meta.is_null() ? nlohmann::json::object() : meta}};
    const std::string js = head.dump();
    w.put<std::uint64_t>(js.size());
    w.buf += js;
    for (std::size_t l = 0; l < m.layers(); ++l) {
        w.put<std::uint64_t>(static_cast<std::uint64_t>(m.weights[l].rows()));
        w.put<std::uint64_t>(static_cast<std::uint64_t>(m.weights[l].cols()));
        w.put_array(m.weights[l].data(), static_cast<std::size_t>(m.weights[l].size()));
        w.put_array(m.biases[l].data(), static_cast<std::size_t>(m.biases[l].size()));
    }
    w.put<std::uint64_t>(m.input_stats.dim());
    w.put_array(m.input_stats.mean.data(), m.input_stats.dim());
    w.put_array(m.input_stats.std.data(), m.input_stats.dim());
    w.put<std::uint32_t>(crc32_of(w.buf));
    toporeg::detail::write_file(path, w.buf);
}

/// Reads the JSON header (config and metadata) of a checkpoint without
/// loading parameters.
inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
    const std::string buf = toporeg::detail::read_file(path);
    detail::Reader r{buf};
    r.need(8);
    if (std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) throw FormatError(path.string() + " is not a checkpoint");
    r.pos = 8;
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    r.get<std::uint32_t>();
    const auto len = r.get<std::uint64_t>();
    r.need(len);
    return nlohmann::json::parse(buf.substr(r.pos, len));
}

template <class T>
Mlp<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta_out = nullptr) {
    const std::string buf = toporeg::detail::read_file(path);
    if (buf.size() < 8 + 4 + 4 + 8 + 4) throw FormatError("checkpoint is truncated");
    if (std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) throw FormatError(path.string() + " is not a checkpoint");
    detail::Reader r{buf};
    r.pos = 8;
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto scalar = r.get<std::uint32_t>();
    if (scalar != sizeof(T)) throw FormatError("checkpoint scalar size does not match the requested precision");
    const auto len = r.get<std::uint64_t>();
    r.need(len);
    nlohmann::json head;
    try {
        head = nlohmann::json::parse(buf.substr(r.pos, len));
    } catch (const nlohmann::json::exception&) {
        throw FormatError("checkpoint header is corrupt");
    }
    r.pos += len;

    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    const std::string body = buf.substr(0, buf.size() - 4);
    if (crc32_of(body) != stored_crc) throw FormatError("checkpoint checksum mismatch (truncated or corrupt)");

    Mlp<T> m;
    m.config = mlp_config_from_json(head.at("config"));
    m.config.validate();
    std::size_t in = m.config.input_dim;
    std::vector<std::size_t> outs = m.config.hidden_widths;
    outs.push_back(m.config.output_dim);
    detail::Reader rb{body, r.pos};
    for (std::size_t out : outs) {
        const auto rows = rb.get<std::uint64_t>();
        const auto cols = rb.get<std::uint64_t>();
        if (rows != out || cols != in) throw FormatError("checkpoint layer shapes do not chain");
        Mat<T> w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        rb.get_array(w.data(), static_cast<std::size_t>(w.size()));
        Vec<T> b(static_cast<Eigen::Index>(rows));
        rb.get_array(b.data(), static_cast<std::size_t>(b.size()));
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
        in = out;
    }
    const auto dim = rb.get<std::uint64_t>();
    m.input_stats.mean.resize(dim);
    m.input_stats.std.resize(dim);
    rb.get_array(m.input_stats.mean.data(), dim);
    rb.get_array(m.input_stats.std.data(), dim);
    if (rb.pos != body.size()) throw FormatError("checkpoint has trailing data");
    if (!m.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
    if (meta_out) *meta_out = head.value("meta", nlohmann::json::object());
    return m;
}

}  // namespace toporeg::nn

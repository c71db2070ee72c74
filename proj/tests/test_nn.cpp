#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "toporeg/nn.hpp"

using namespace toporeg;
using namespace toporeg::nn;
namespace fs = std::filesystem;

namespace {

template <class T>
Mat<T> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Mat<T> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(nd(rng));
    return m;
}

double loss_only(const Mlp<double>& m, const Mat<double>& X, const Mat<double>& Y) {
    return (forward(m, X) - Y).squaredNorm() / static_cast<double>(X.cols());
}

}  // namespace

TEST(Init, DeterministicAndHeScaled) {
    auto cfg = MlpConfig::uniform(60, 256, 2, 3);
    cfg.seed = 9;
    auto a = init_mlp<float>(cfg);
    auto b = init_mlp<float>(cfg);
    ASSERT_EQ(a.layers(), 3u);
    for (std::size_t l = 0; l < a.layers(); ++l) {
        EXPECT_EQ(a.weights[l], b.weights[l]);
        EXPECT_TRUE(a.biases[l].isZero(0));
    }
    for (std::size_t l = 0; l < 2; ++l) {
        const auto& w = a.weights[l];
        const double n = static_cast<double>(w.size());
        const double mean = w.template cast<double>().sum() / n;
        const double var = (w.template cast<double>().array() - mean).square().sum() / n;
        const double want = std::sqrt(2.0 / static_cast<double>(w.cols()));
        EXPECT_NEAR(std::sqrt(var), want, 0.05 * want);
    }
    cfg.seed = 10;
    EXPECT_NE(init_mlp<float>(cfg).weights[0], a.weights[0]);
    EXPECT_EQ(a.parameter_count(), 60u * 256 + 256 + 256 * 256 + 256 + 256 * 3 + 3);
}

TEST(Init, RejectsBadConfigs) {
    auto cfg = MlpConfig::uniform(4, 8, 0, 2);
    EXPECT_THROW(init_mlp<double>(cfg), ValidationError);
    cfg = MlpConfig::uniform(4, 8, 1, 2);
    cfg.dropout = 1.0;
    EXPECT_THROW(init_mlp<double>(cfg), ValidationError);
    cfg.dropout = 0.0;
    cfg.hidden_widths = {8, 0};
    EXPECT_THROW(init_mlp<double>(cfg), ValidationError);
}

TEST(Forward, ZeroWeightsGiveFinalBias) {
    auto m = init_mlp<double>(MlpConfig::uniform(5, 7, 2, 3));
    for (auto& w : m.weights) w.setZero();
    m.biases.back() << 1.0, -2.0, 3.5;
    std::mt19937_64 rng(1);
    auto y = forward(m, random_matrix<double>(5, 4, rng));
    for (Eigen::Index c = 0; c < 4; ++c) {
        EXPECT_EQ(y(0, c), 1.0);
        EXPECT_EQ(y(1, c), -2.0);
        EXPECT_EQ(y(2, c), 3.5);
    }
}

TEST(Forward, ModesAgreeWithoutDropout) {
    auto m = init_mlp<double>(MlpConfig::uniform(6, 10, 3, 2));
    std::mt19937_64 rng(2), drng(3);
    auto X = random_matrix<double>(6, 5, rng);
    EXPECT_EQ(forward(m, X, Mode::eval), forward(m, X, Mode::train, &drng));
    m.config.dropout = 0.3;
    EXPECT_NE(forward(m, X, Mode::eval), forward(m, X, Mode::train, &drng));
    EXPECT_THROW(forward(m, X, Mode::train), ValidationError);
    EXPECT_THROW(forward(m, random_matrix<double>(5, 2, rng)), ValidationError);
}

TEST(Forward, DeadReluGivesBiasOnly) {
    auto m = init_mlp<double>(MlpConfig::uniform(3, 4, 1, 2));
    m.weights[0].setOnes();
    m.biases[0].setConstant(-100.0);
    m.biases[1] << 0.25, -0.5;
    std::vector<double> x = {1.0, 2.0, 3.0};
    auto y = forward(m, std::span<const double>(x));
    EXPECT_EQ(y[0], 0.25);
    EXPECT_EQ(y[1], -0.5);
}

TEST(Forward, SingleAndBatchedAgree) {
    auto m = init_mlp<double>(MlpConfig::uniform(4, 9, 2, 3));
    std::mt19937_64 rng(4);
    auto X = random_matrix<double>(4, 6, rng);
    auto Y = forward(m, X);
    for (Eigen::Index c = 0; c < 6; ++c) {
        std::vector<double> x(X.col(c).data(), X.col(c).data() + 4);
        auto y = forward(m, std::span<const double>(x));
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(y[k], Y(k, c), 1e-14);
    }
}

// Central finite differences against backpropagation on random small nets.
TEST(Gradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int net = 0; net < 20; ++net) {
        auto cfg = MlpConfig::uniform(8, 16, 2, 4);
        cfg.seed = 1000 + net;
        cfg.final_bias = net % 2 == 0;
        auto m = init_mlp<double>(cfg);
        for (auto& b : m.biases) b = random_matrix<double>(b.size(), 1, rng, 0.1);
        if (!cfg.final_bias) m.biases.back().setZero();
        auto X = random_matrix<double>(8, 5, rng);
        auto Y = random_matrix<double>(4, 5, rng);
        auto g = loss_and_grad(m, X, Y);
        EXPECT_NEAR(g.loss, loss_only(m, X, Y), 1e-12);

        const double h = 1e-6;
        auto check = [&](double& p, double analytic) {
            const double keep = p;
            p = keep + h;
            const double up = loss_only(m, X, Y);
            p = keep - h;
            const double down = loss_only(m, X, Y);
            p = keep;
            const double fd = (up - down) / (2 * h);
            // kinks of the ReLU can sit inside the stencil; skip those parameters
            const double rel = std::abs(fd - analytic) / std::max(1e-3, std::abs(fd) + std::abs(analytic));
            return rel;
        };
        for (std::size_t l = 0; l < m.layers(); ++l) {
            for (Eigen::Index i = 0; i < m.weights[l].size(); ++i)
                worst = std::max(worst, check(m.weights[l].data()[i], g.grads.dW[l].data()[i]));
            if (l + 1 < m.layers() || cfg.final_bias)
                for (Eigen::Index i = 0; i < m.biases[l].size(); ++i)
                    worst = std::max(worst, check(m.biases[l].data()[i], g.grads.db[l].data()[i]));
        }
        if (!cfg.final_bias) {
            EXPECT_TRUE(g.grads.db.back().isZero(0));
        }
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Forward, DropoutSitesAreHiddenOutputs) {
    auto cfg = MlpConfig::uniform(4, 6, 1, 2);
    cfg.dropout = 0.5;
    auto m = init_mlp<double>(cfg);
    std::mt19937_64 rng(8);
    m.biases[0] = random_matrix<double>(6, 1, rng);
    m.biases[1] = random_matrix<double>(2, 1, rng);
    auto X = random_matrix<double>(4, 3, rng);

    std::mt19937_64 r1(3), r2(3);
    Mat<double> mask;
    nn::detail::dropout_mask(mask, 6, 3, 0.5, r2);
    Mat<double> h = ((m.weights[0] * X).colwise() + m.biases[0]).cwiseMax(0.0);
    Mat<double> want = (m.weights[1] * h.cwiseProduct(mask)).colwise() + m.biases[1];
    EXPECT_TRUE(forward(m, X, Mode::train, &r1).isApprox(want, 1e-14));

    m.config.drop_input = true;
    std::mt19937_64 r3(3), r4(3);
    Mat<double> in_mask, hid_mask;
    nn::detail::dropout_mask(in_mask, 4, 3, 0.5, r4);
    nn::detail::dropout_mask(hid_mask, 6, 3, 0.5, r4);
    h = ((m.weights[0] * X.cwiseProduct(in_mask)).colwise() + m.biases[0]).cwiseMax(0.0);
    want = (m.weights[1] * h.cwiseProduct(hid_mask)).colwise() + m.biases[1];
    EXPECT_TRUE(forward(m, X, Mode::train, &r3).isApprox(want, 1e-14));
}

class DropoutGradient : public ::testing::TestWithParam<bool> {};

TEST_P(DropoutGradient, MaskMatchesForward) {
    // With the same mask stream, loss_and_grad sees the train-mode forward.
    auto cfg = MlpConfig::uniform(5, 12, 3, 2);
    cfg.dropout = 0.25;
    cfg.drop_input = GetParam();
    auto m = init_mlp<double>(cfg);
    std::mt19937_64 rng(5);
    auto X = random_matrix<double>(5, 7, rng);
    auto Y = random_matrix<double>(2, 7, rng);
    std::mt19937_64 r1(99), r2(99);
    auto out = forward(m, X, Mode::train, &r1);
    auto g = loss_and_grad(m, X, Y, &r2);
    EXPECT_NEAR(g.loss, (out - Y).squaredNorm() / 7.0, 1e-12);

    // finite differences under a frozen mask
    auto masked_loss = [&] {
        std::mt19937_64 r(99);
        return (forward(m, X, Mode::train, &r) - Y).squaredNorm() / 7.0;
    };
    double worst = 0.0;
    for (std::size_t l = 0; l < m.layers(); ++l)
        for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
            double& p = m.weights[l].data()[i];
            const double keep = p;
            p = keep + 1e-6;
            const double up = masked_loss();
            p = keep - 1e-6;
            const double down = masked_loss();
            p = keep;
            const double fd = (up - down) / 2e-6;
            const double an = g.grads.dW[l].data()[i];
            worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an)));
        }
    EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Sites, DropoutGradient, ::testing::Values(false, true));

TEST(Gradient, DuplicatedBatchGivesSameMeanGradient) {
    auto m = init_mlp<double>(MlpConfig::uniform(6, 8, 2, 3));
    std::mt19937_64 rng(6);
    auto X = random_matrix<double>(6, 4, rng);
    auto Y = random_matrix<double>(3, 4, rng);
    Mat<double> X2(6, 8), Y2(3, 8);
    X2 << X, X;
    Y2 << Y, Y;
    auto a = loss_and_grad(m, X, Y);
    auto b = loss_and_grad(m, X2, Y2);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
    for (std::size_t l = 0; l < m.layers(); ++l) EXPECT_TRUE(a.grads.dW[l].isApprox(b.grads.dW[l], 1e-12));
}

TEST(Gradient, ChunkedSumEqualsFullBatch) {
    auto m = init_mlp<double>(MlpConfig::uniform(6, 8, 2, 3));
    std::mt19937_64 rng(7);
    auto X = random_matrix<double>(6, 10, rng);
    auto Y = random_matrix<double>(3, 10, rng);
    auto full = loss_and_grad(m, X, Y);
    auto a = loss_and_grad(m, Mat<double>(X.leftCols(4)), Mat<double>(Y.leftCols(4)), nullptr, 10);
    auto b = loss_and_grad(m, Mat<double>(X.rightCols(6)), Mat<double>(Y.rightCols(6)), nullptr, 10);
    a.grads += b.grads;
    EXPECT_NEAR(a.loss + b.loss, full.loss, 1e-12);
    for (std::size_t l = 0; l < m.layers(); ++l) EXPECT_TRUE(a.grads.dW[l].isApprox(full.grads.dW[l], 1e-12));
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto m = init_mlp<double>(MlpConfig::uniform(3, 5, 1, 2));
    auto before = m.weights;
    auto st = AdamState<double>::init(m);
    adam_step(st, m, Gradients<double>::zeros_like(m));
    for (std::size_t l = 0; l < m.layers(); ++l) EXPECT_EQ(m.weights[l], before[l]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    auto m = init_mlp<double>(MlpConfig::uniform(3, 5, 1, 2));
    auto before = m.weights;
    auto st = AdamState<double>::init(m);
    auto g = Gradients<double>::zeros_like(m);
    std::mt19937_64 rng(8);
    for (auto& w : g.dW) w = random_matrix<double>(w.rows(), w.cols(), rng);
    adam_step(st, m, g);
    for (std::size_t l = 0; l < m.layers(); ++l)
        for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
            const double step = before[l].data()[i] - m.weights[l].data()[i];
            const double sign = g.dW[l].data()[i] > 0 ? 1.0 : -1.0;
            EXPECT_NEAR(step, sign * 1e-3, 1e-3 * 1e-4);
        }
}

TEST(Train, LinearTargetIsLearned) {
    std::mt19937_64 rng(10);
    Mat<float> A = random_matrix<float>(2, 4, rng, 0.5);
    TrainingData<float> d;
    d.x_train = random_matrix<float>(4, 512, rng);
    d.y_train = A * d.x_train;
    d.x_val = random_matrix<float>(4, 128, rng);
    d.y_val = A * d.x_val;
    auto m = init_mlp<float>(MlpConfig::uniform(4, 16, 1, 2));
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 16;
    tc.lr = 3e-3;
    auto h = train(m, d, tc);
    EXPECT_LE(h.epochs.size(), 200u);
    EXPECT_LT(mse(m, d.x_train, d.y_train), 1e-4);
    EXPECT_LT(h.epochs.back().train_loss, h.initial_train_loss);
    EXPECT_NEAR(mse(m, d.x_val, d.y_val), h.best_val_loss, 1e-9);
}

TEST(Train, EarlyStoppingContract) {
    // Pure-noise targets: validation stops improving quickly.
    std::mt19937_64 rng(11);
    TrainingData<float> d;
    d.x_train = random_matrix<float>(3, 64, rng);
    d.y_train = random_matrix<float>(1, 64, rng);
    d.x_val = random_matrix<float>(3, 64, rng);
    d.y_val = random_matrix<float>(1, 64, rng);
    auto m = init_mlp<float>(MlpConfig::uniform(3, 64, 2, 1));
    TrainConfig tc;
    tc.epochs = 500;
    tc.batch_size = 16;
    tc.lr = 1e-2;
    tc.patience = 5;
    auto h = train(m, d, tc);
    ASSERT_TRUE(h.stopped_early);
    EXPECT_EQ(h.epochs.size(), h.best_epoch + tc.patience);
    for (const auto& e : h.epochs) EXPECT_GE(e.val_loss, h.best_val_loss);
    EXPECT_NEAR(mse(m, d.x_val, d.y_val), h.best_val_loss, 1e-9);
    auto csv = h.to_csv();
    EXPECT_EQ(csv.substr(0, 26), "epoch,train_loss,val_loss\n");
}

TEST(Train, DeterministicAcrossJobs) {
    std::mt19937_64 rng(12);
    TrainingData<float> d;
    d.x_train = random_matrix<float>(5, 200, rng);
    d.y_train = random_matrix<float>(2, 200, rng);
    auto cfg = MlpConfig::uniform(5, 16, 2, 2);
    cfg.dropout = 0.1;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 40;
    tc.grad_chunks = 4;
    auto m1 = init_mlp<float>(cfg);
    auto m2 = m1;
    train(m1, d, tc);
    tc.jobs = 3;
    train(m2, d, tc);
    for (std::size_t l = 0; l < m1.layers(); ++l) EXPECT_EQ(m1.weights[l], m2.weights[l]);
}

TEST(Train, NonFiniteLossRaises) {
    TrainingData<float> d;
    d.x_train = Mat<float>::Ones(2, 8);
    d.y_train = Mat<float>::Constant(1, 8, std::numeric_limits<float>::infinity());
    auto m = init_mlp<float>(MlpConfig::uniform(2, 4, 1, 1));
    TrainConfig tc;
    tc.epochs = 2;
    EXPECT_THROW(train(m, d, tc), TrainingError);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
    Mat<double> mask;
    std::mt19937_64 rng(13);
    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        nn::detail::dropout_mask(mask, 8, 1, 0.2, rng);
        sum += mask.sum() / 8.0;
    }
    EXPECT_NEAR(sum / n, 1.0, 0.01);
}

TEST(Lipschitz, BoundHolds) {
    auto m = init_mlp<double>(MlpConfig::uniform(6, 20, 3, 3));
    const double L = lipschitz_bound(m);
    std::mt19937_64 rng(14);
    for (int t = 0; t < 200; ++t) {
        auto x = random_matrix<double>(6, 1, rng);
        auto dx = random_matrix<double>(6, 1, rng, 1e-2);
        const double dy = (forward(m, Mat<double>(x + dx)) - forward(m, x)).norm();
        EXPECT_LE(dy, L * dx.norm() * (1 + 1e-12));
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    auto cfg = MlpConfig::uniform(6, 10, 2, 3);
    cfg.dropout = 0.1;
    auto m = init_mlp<float>(cfg);
    std::mt19937_64 rng(15);
    for (auto& b : m.biases) b = random_matrix<float>(b.size(), 1, rng);
    m.input_stats.mean = {1, 2, 3, 4, 5, 6.5};
    m.input_stats.std = {1, 1, 2, 2, 3, 0.1};
    auto p = fs::temp_directory_path() / "toporeg_ckpt.bin";
    save_checkpoint(m, p, {{"kind", "naive"}});
    nlohmann::json meta;
    auto back = load_checkpoint<float>(p, &meta);
    EXPECT_EQ(meta["kind"], "naive");
    EXPECT_EQ(back.config, m.config);
    for (std::size_t l = 0; l < m.layers(); ++l) {
        EXPECT_EQ(back.weights[l], m.weights[l]);
        EXPECT_EQ(back.biases[l], m.biases[l]);
    }
    EXPECT_EQ(back.input_stats.mean, m.input_stats.mean);
    EXPECT_EQ(back.input_stats.std, m.input_stats.std);
    auto X = random_matrix<float>(6, 5, rng);
    EXPECT_EQ(forward(back, X), forward(m, X));
    EXPECT_EQ(read_checkpoint_header(p)["meta"]["kind"], "naive");
    EXPECT_THROW(load_checkpoint<double>(p), FormatError);

    fs::resize_file(p, fs::file_size(p) - 9);
    EXPECT_THROW(load_checkpoint<float>(p), FormatError);
    fs::resize_file(p, 10);
    EXPECT_THROW(load_checkpoint<float>(p), FormatError);
    fs::remove(p);
}

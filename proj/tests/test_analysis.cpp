#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "toporeg/analysis.hpp"

using namespace toporeg;
namespace fs = std::filesystem;

TEST(Metrics, NormalizedAbsError) {
    EXPECT_EQ(normalized_abs_error(3.0, 3.0, {0, 10}), 0.0);
    EXPECT_EQ(normalized_abs_error(0.0, 10.0, {0, 10}), 1.0);
    EXPECT_NEAR(normalized_abs_error(1100, 1000, {500, 5000}), 0.0222222, 1e-7);
    EXPECT_THROW(normalized_abs_error(1, 2, {3, 3}), ValidationError);
}

TEST(Metrics, CircularError) {
    EXPECT_NEAR(circular_error(0.01, kTwoPi - 0.01), 0.02, 1e-15);
    EXPECT_EQ(circular_error(kPi, kPi), 0.0);
    EXPECT_DOUBLE_EQ(circular_error(0.0, kPi), kPi);
}

TEST(Metrics, MoebiusError) {
    EXPECT_EQ(moebius_error(MoebiusCoords{1.0, 0.02}, MoebiusCoords{1.0, 0.02}), 0.0);
    EXPECT_LT(moebius_error(MoebiusCoords{kPi - 1e-9, 0.04}, MoebiusCoords{0.0, -0.04}), 1e-8);
    EXPECT_NEAR(moebius_error(MoebiusCoords{0.0, 0.05}, MoebiusCoords{0.0, -0.05}), 0.1, 1e-15);

    LoopParams a{0, 0, 1000, 8, 0, 0, 0}, b{0, 0, 1000, 8, 0, 1.0, 0.04};
    EXPECT_EQ(moebius_error(a, b), 0.0);  // circular sources coincide
    LoopParams c{0, 0, 1000, 8, 2, 0.0, 0.05}, d{0, 0, 1000, 8, 2, 0.0, -0.05};
    EXPECT_NEAR(moebius_error(c, d), 0.2, 1e-15);
}

// moebius_error vanishes exactly on identified pairs.
TEST(Metrics, MoebiusZeroIffSameEmbeddedPoint) {
    for (int i = 0; i < 180; ++i) {
        const double a = kPi * i / 180.0;
        for (int k = 0; k <= 10; ++k) {
            const double c = -0.05 + 0.01 * k;
            for (int i2 = 0; i2 < 180; i2 += 7) {
                const double a2 = kPi * i2 / 180.0;
                for (int k2 = 0; k2 <= 10; k2 += 3) {
                    const double c2 = -0.05 + 0.01 * k2;
                    const bool same = i == i2 && k == k2;
                    const double e = moebius_error(MoebiusCoords{a, c}, MoebiusCoords{a2, c2});
                    EXPECT_EQ(e < 1e-12, same);
                }
            }
        }
    }
}

TEST(Quantiles, MatchSortOracle) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(1 + t * 3);
        for (auto& x : v) x = u(rng);
        auto s = v;
        std::sort(s.begin(), s.end());
        for (double q : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0}) {
            // smallest value with at least q n values at or below it
            double want = s.back();
            for (std::size_t i = 0; i < s.size(); ++i)
                if (static_cast<double>(i + 1) >= q * static_cast<double>(s.size())) {
                    want = s[i];
                    break;
                }
            EXPECT_EQ(quantile(v, q), want);
        }
    }
    EXPECT_EQ(quantile({4, 1, 3, 2}, 0.5), 2.0);
    EXPECT_EQ(quantile({4, 1, 3, 2}, 0.75), 3.0);
    EXPECT_THROW(quantile({}, 0.5), ValidationError);
    auto b = box_stats({5, 1, 4, 2, 3});
    EXPECT_EQ(b.min, 1);
    EXPECT_EQ(b.median, 3);
    EXPECT_EQ(b.max, 5);
    EXPECT_LE(b.q25, b.median);
    EXPECT_LE(b.median, b.q75);
}

TEST(Pca, PlanarDataHasRankTwo) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd basis = Eigen::MatrixXd::NullaryExpr(2, 10, [&] { return nd(rng); });
    Eigen::MatrixXd coef = Eigen::MatrixXd::NullaryExpr(300, 2, [&] { return nd(rng); });
    Eigen::MatrixXd X = coef * basis;
    X.rowwise() += Eigen::RowVectorXd::Constant(10, 3.0);
    auto m = pca_fit(X, 3);
    EXPECT_LT(m.explained_ratio(2), 1e-10);
    EXPECT_NEAR(m.explained_ratio(0) + m.explained_ratio(1), 1.0, 1e-10);
    std::vector<double> mean(m.mean.data(), m.mean.data() + 10);
    for (double v : pca_project(m, mean)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pca, MatchesSvdOracle) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(80, 12, [&] { return nd(rng); });
    for (int c = 0; c < 12; ++c) X.col(c) *= (c + 1);
    auto m = pca_fit(X, 5);
    Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinV);
    const auto I = m.axes * m.axes.transpose();
    EXPECT_LT((I - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(m.singular_values(i), svd.singularValues()(i), 1e-9 * svd.singularValues()(0));
        EXPECT_NEAR(std::abs(m.axes.row(i).dot(svd.matrixV().col(i))), 1.0, 1e-9);
        Eigen::Index arg;
        m.axes.row(i).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(m.axes(i, arg), 0.0);
        if (i > 0) EXPECT_LE(m.explained_ratio(i), m.explained_ratio(i - 1));
    }
    EXPECT_LE(m.explained_ratio.sum(), 1.0 + 1e-12);
}

TEST(Pca, ReconstructionAndDistanceBounds) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(40, 8, [&] { return nd(rng); });
    double prev = 1e300;
    for (std::size_t k = 1; k <= 8; ++k) {
        auto m = pca_fit(X, k);
        double err = 0.0;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::vector<double> x(X.row(i).data(), X.row(i).data() + 8);
            Eigen::VectorXd xr = X.row(i).transpose();
            auto back = pca_reconstruct(m, pca_project(m, std::vector<double>(xr.data(), xr.data() + 8)));
            for (int j = 0; j < 8; ++j) err += (back[j] - xr(j)) * (back[j] - xr(j));
        }
        EXPECT_LE(err, prev + 1e-9);
        prev = err;

        // Projected pairwise distances shrink by at most the discarded energy.
        auto full = pca_fit(X, 8);
        double discarded = 0.0;
        for (std::size_t j = k; j < 8; ++j) discarded += full.singular_values(j) * full.singular_values(j);
        for (int a = 0; a < 10; ++a) {
            Eigen::VectorXd xa = X.row(a).transpose(), xb = X.row(a + 10).transpose();
            auto pa = pca_project(m, std::vector<double>(xa.data(), xa.data() + 8));
            auto pb = pca_project(m, std::vector<double>(xb.data(), xb.data() + 8));
            double dp = 0.0;
            for (std::size_t j = 0; j < k; ++j) dp += (pa[j] - pb[j]) * (pa[j] - pb[j]);
            const double d2 = (xa - xb).squaredNorm();
            EXPECT_LE(dp, d2 + 1e-9);
            EXPECT_GE(dp, d2 - 4.0 * discarded - 1e-9);
        }
    }
    EXPECT_LT(prev, 1e-18 * 1e6);
    EXPECT_THROW(pca_fit(X, 9), ValidationError);
}

TEST(Pca, VisibilitySetsAndDataset) {
    auto cfg = SamplingConfig::defaults(Scenario::simple);
    cfg.set_splits(200, 0, 0);
    auto ds = generate_dataset(cfg);
    auto rows = ds.indices(Split::train);
    auto m = pca_fit(ds, rows, 3);
    std::vector<VisibilitySet> vs;
    for (auto i : rows) vs.push_back(VisibilitySet::from_reals(ds.input(i)));
    auto m2 = pca_fit(vs, 3);
    EXPECT_LT((m.axes - m2.axes).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_THROW(pca_fit(vs, 61), ValidationError);

    auto csv = pca_projection_csv(m, ds, rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,pc1,pc2,pc3,alpha_deg,c");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rows.size() + 1);
}

TEST(Report, SimpleScatterExport) {
    auto cfg = SamplingConfig::defaults(Scenario::simple);
    cfg.set_splits(10, 0, 30);
    auto ds = generate_dataset(cfg);
    Regularizer reg;
    reg.kind = RegularizerKind::embedded;
    reg.task = Scenario::simple;
    reg.intervals = cfg.intervals;
    auto rows = ds.indices(Split::test);
    std::vector<Prediction> preds;
    for (auto i : rows) {
        Prediction p;
        p.params = ds.params(i);
        p.params.c = -p.params.c;
        preds.push_back(p);
    }
    auto rep = build_report(reg, ds, rows, preds);
    ASSERT_EQ(rep.size(), 30u);
    EXPECT_EQ(rep.params, (std::vector<std::string>{"alpha_deg", "c"}));
    for (const auto& r : rep.records) {
        EXPECT_EQ(r.abs_error[0], 0.0);
        EXPECT_NEAR(r.norm_error[1], std::abs(2 * ds.params(r.index).c) / 0.1, 1e-12);
        EXPECT_GE(r.moebius, 0.0);
    }
    auto csv = scatter_csv(rep);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "index,alpha_deg_true,c_true,alpha_deg_pred,c_pred,err_alpha_deg,err_c,moebius_error");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 31u);
    auto p1 = fs::temp_directory_path() / "toporeg_sc1.csv";
    auto p2 = fs::temp_directory_path() / "toporeg_sc2.csv";
    export_scatter(rep, p1);
    export_scatter(rep, p2);
    EXPECT_EQ(detail::read_file(p1), detail::read_file(p2));
    fs::remove(p1);
    fs::remove(p2);

    auto j = report_to_json(rep, {{"config_hash", "abc"}});
    EXPECT_EQ(j["count"], 30);
    EXPECT_EQ(j["config_hash"], "abc");
    EXPECT_TRUE(j["parameters"].contains("alpha_deg"));
    auto qs = j["moebius_error"]["quantiles"].get<std::vector<double>>();
    EXPECT_TRUE(std::is_sorted(qs.begin(), qs.end()));
}

TEST(Report, CompleteSkipsPinnedAndScoresAll) {
    auto cfg = SamplingConfig::defaults(Scenario::complete);
    cfg.set_splits(10, 0, 20);
    cfg.intervals.flux = {1000, 1000};
    auto ds = generate_dataset(cfg);
    Regularizer reg;
    reg.kind = RegularizerKind::naive;
    reg.task = Scenario::complete;
    auto rows = ds.indices(Split::test);
    std::vector<Prediction> preds;
    for (auto i : rows) {
        Prediction p;
        p.params = ds.params(i);
        p.params.x_c += 10.0;
        preds.push_back(p);
    }
    auto rep = build_report(reg, ds, rows, preds);
    EXPECT_EQ(rep.params.size(), 7u);
    EXPECT_FALSE(rep.scored[2]);
    for (const auto& r : rep.records) {
        EXPECT_NEAR(r.norm_error[0], 0.1, 1e-12);
        EXPECT_TRUE(std::isnan(r.norm_error[2]));
        EXPECT_NEAR(r.moebius, 0.0, 1e-12);
    }
    auto j = report_to_json(rep);
    EXPECT_FALSE(j["parameters"].contains("F"));
    EXPECT_EQ(j["parameters"]["x_c"]["normalized_abs_error"]["box"]["median"], 0.1);
    auto csv = scatter_csv(rep);
    EXPECT_NE(csv.find(",,"), std::string::npos);  // pinned error cells are empty
}

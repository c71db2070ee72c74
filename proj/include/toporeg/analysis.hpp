#pragma once

// Error metrics, nearest-rank quantiles, PCA of visibility vectors and
// plot-ready exports.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "toporeg/dataset.hpp"
#include "toporeg/embedding.hpp"
#include "toporeg/regularizer.hpp"

namespace toporeg {

inline double normalized_abs_error(double pred, double truth, const Interval& iv) {
    if (!(iv.length() > 0.0)) throw ValidationError("normalized error needs an interval of positive length");
    return std::abs(pred - truth) / iv.length();
}

/// Distance on the circle between two angles in [0, 2 pi).
inline double circular_error(double pred, double truth) {
    const double d = std::abs(pred - truth);
    return std::min(d, kTwoPi - d);
}

inline double moebius_error(const MoebiusCoords& pred, const MoebiusCoords& truth) {
    return moebius_distance(pred, truth);
}

/// Complete-task variant: distance between the eccentricity-scaled strip
/// points, so that all circular sources coincide.
inline double moebius_error(const LoopParams& pred, const LoopParams& truth) {
    const auto a = gamma_g(pred).t;
    const auto b = gamma_g(truth).t;
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

// ---------------------------------------------------------------------------
// Quantiles (nearest rank: the ceil(q n)-th smallest value, q = 0 gives the minimum)

inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, q);
}

struct BoxStats {
    double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

inline BoxStats box_stats(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return {quantile_sorted(v, 0.0), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75),
            quantile_sorted(v, 1.0)};
}

inline nlohmann::json to_json_value(const BoxStats& b) {
    return {{"min", b.min}, {"q25", b.q25}, {"median", b.median}, {"q75", b.q75}, {"max", b.max}};
}

inline const std::vector<double>& report_quantile_levels() {
    static const std::vector<double> levels = {0.05, 0.25, 0.5, 0.75, 0.95};
    return levels;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd axes;  // k x d, orthonormal rows
    Eigen::VectorXd singular_values;
    Eigen::VectorXd explained_ratio;

    std::size_t k() const { return static_cast<std::size_t>(axes.rows()); }
};

/// Rows of `data` are samples. Eigendecomposition of the covariance; each
/// axis is signed so that its largest-magnitude entry is positive.
inline PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t k) {
    const auto n = data.rows();
    const auto d = data.cols();
    if (k < 1 || static_cast<Eigen::Index>(k) > d)
        throw ValidationError("PCA needs 1 <= k <= " + std::to_string(d) + " components, got " + std::to_string(k));
    if (n < static_cast<Eigen::Index>(k) || n < 2) throw ValidationError("PCA needs at least k (and 2) samples");
    PcaModel m;
    m.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - m.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);  // ascending
    const double total = ev.sum();
    m.axes.resize(static_cast<Eigen::Index>(k), d);
    m.singular_values.resize(static_cast<Eigen::Index>(k));
    m.explained_ratio.resize(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
        const Eigen::Index src = d - 1 - i;
        Eigen::VectorXd axis = es.eigenvectors().col(src);
        Eigen::Index arg;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0) axis = -axis;
        m.axes.row(i) = axis.transpose();
        m.singular_values(i) = std::sqrt(ev(src) * static_cast<double>(n - 1));
        m.explained_ratio(i) = total > 0.0 ? ev(src) / total : 0.0;
    }
    return m;
}

inline PcaModel pca_fit(const std::vector<VisibilitySet>& vs, std::size_t k) {
    if (vs.empty()) throw ValidationError("PCA of an empty set");
    const auto d = static_cast<Eigen::Index>(vs.front().to_reals().size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(vs.size()), d);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto r = vs[i].to_reals();
        if (static_cast<Eigen::Index>(r.size()) != d) throw ValidationError("visibility sets differ in length");
        X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), d);
    }
    return pca_fit(X, k);
}

/// PCA of the measurement vectors of the given dataset rows.
inline PcaModel pca_fit(const Dataset& ds, std::span<const std::size_t> rows, std::size_t k) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.input_dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = ds.input(rows[i]);
        X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), X.cols());
    }
    return pca_fit(X, k);
}

inline std::vector<double> pca_project(const PcaModel& m, std::span<const double> v) {
    if (static_cast<Eigen::Index>(v.size()) != m.mean.size()) throw ValidationError("PCA input has the wrong length");
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), m.mean.size()) - m.mean;
    const Eigen::VectorXd p = m.axes * x;
    return {p.data(), p.data() + p.size()};
}

inline std::vector<double> pca_reconstruct(const PcaModel& m, std::span<const double> coords) {
    const Eigen::VectorXd x = m.axes.transpose() * Eigen::Map<const Eigen::VectorXd>(coords.data(), m.axes.rows()) + m.mean;
    return {x.data(), x.data() + x.size()};
}

inline nlohmann::json to_json_value(const PcaModel& m) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"k", m.k()},
            {"singular_values", vec(m.singular_values)},
            {"explained_variance_ratio", vec(m.explained_ratio)}};
}

// ---------------------------------------------------------------------------
// Evaluation reports

struct SampleRecord {
    std::size_t index = 0;
    std::vector<double> truth;  // report parameter units (angles in degrees)
    std::vector<double> pred;
    std::vector<double> abs_error;   // |pred - truth| in radians for angles
    std::vector<double> norm_error;  // divided by interval length (empty entry = NaN for pinned)
    double moebius = 0.0;            // loop tasks
    double circular = 0.0;           // circle task
    std::vector<double> pca;         // optional
};

struct MetricReport {
    Scenario task = Scenario::simple;
    RegularizerKind kind = RegularizerKind::embedded;
    std::vector<std::string> params;  // column stems, e.g. "alpha_deg"
    std::vector<bool> scored;         // parameter has a non-degenerate interval
    std::vector<SampleRecord> records;

    std::size_t size() const { return records.size(); }

    std::vector<double> column(std::size_t p, bool normalized = true) const {
        std::vector<double> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(normalized ? r.norm_error[p] : r.abs_error[p]);
        return out;
    }
    std::vector<double> moebius_column() const {
        std::vector<double> out;
        for (const auto& r : records) out.push_back(r.moebius);
        return out;
    }
    std::vector<double> circular_column() const {
        std::vector<double> out;
        for (const auto& r : records) out.push_back(r.circular);
        return out;
    }
    std::size_t param_index(const std::string& name) const {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i] == name) return i;
        throw ValidationError("report has no parameter '" + name + "'");
    }
};

/// Scores predictions against the dataset's ground truth on the given rows.
inline MetricReport build_report(const Regularizer& reg, const Dataset& ds, std::span<const std::size_t> rows,
                                 std::span<const Prediction> preds) {
    if (rows.size() != preds.size()) throw ValidationError("prediction count does not match row count");
    MetricReport rep;
    rep.task = ds.config.scenario;
    rep.kind = reg.kind;
    const auto& iv = ds.config.intervals;
    if (rep.task == Scenario::circle) {
        rep.params = {"theta_deg"};
        rep.scored = {true};
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const double t = ds.circle(rows[j]).theta;
            const double p = preds[j].theta;
            SampleRecord r;
            r.index = rows[j];
            r.truth = {rad_to_deg(t)};
            r.pred = {rad_to_deg(p)};
            r.abs_error = {std::abs(p - t)};
            r.norm_error = {std::abs(p - t) / kTwoPi};
            r.circular = circular_error(p, t);
            rep.records.push_back(std::move(r));
        }
        return rep;
    }
    std::vector<std::size_t> which;
    const auto arr = iv.to_array();
    if (rep.task == Scenario::simple) {
        which = {5, 6};
    } else {
        which = {0, 1, 2, 3, 4, 5, 6};
    }
    for (auto w : which) {
        rep.params.push_back(w == 5 ? "alpha_deg" : LoopParams::kNames[w]);
        rep.scored.push_back(arr[w].length() > 0.0);
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const LoopParams truth = ds.params(rows[j]);
        const LoopParams pred = preds[j].params;
        const auto ta = truth.to_array();
        const auto pa = pred.to_array();
        SampleRecord r;
        r.index = rows[j];
        for (std::size_t q = 0; q < which.size(); ++q) {
            const auto w = which[q];
            const bool angle = w == 5;
            r.truth.push_back(angle ? rad_to_deg(ta[w]) : ta[w]);
            r.pred.push_back(angle ? rad_to_deg(pa[w]) : pa[w]);
            r.abs_error.push_back(std::abs(pa[w] - ta[w]));
            r.norm_error.push_back(rep.scored[q] ? normalized_abs_error(pa[w], ta[w], arr[w])
                                                 : std::numeric_limits<double>::quiet_NaN());
        }
        r.moebius = rep.task == Scenario::simple ? moebius_error(pred.strip(), truth.strip()) : moebius_error(pred, truth);
        rep.records.push_back(std::move(r));
    }
    return rep;
}

inline nlohmann::json report_to_json(const MetricReport& rep, const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j;
    j["task"] = to_string(rep.task);
    j["kind"] = to_string(rep.kind);
    j["count"] = rep.size();
    j["quantile_convention"] = "nearest_rank";
    j["quantile_levels"] = report_quantile_levels();
    auto summarize = [](std::vector<double> v) {
        nlohmann::json s;
        std::sort(v.begin(), v.end());
        std::vector<double> qs;
        for (double q : report_quantile_levels()) qs.push_back(quantile_sorted(v, q));
        double mean = 0.0;
        for (double x : v) mean += x;
        s["quantiles"] = qs;
        s["mean"] = mean / static_cast<double>(v.size());
        s["box"] = to_json_value(box_stats(v));
        return s;
    };
    nlohmann::json per = nlohmann::json::object();
    if (rep.size() > 0) {
        for (std::size_t p = 0; p < rep.params.size(); ++p) {
            if (!rep.scored[p]) continue;
            per[rep.params[p]] = {{"normalized_abs_error", summarize(rep.column(p, true))},
                                  {"abs_error", summarize(rep.column(p, false))}};
        }
        if (rep.task == Scenario::circle)
            j["circular_error"] = summarize(rep.circular_column());
        else
            j["moebius_error"] = summarize(rep.moebius_column());
    }
    j["parameters"] = per;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

inline std::string scatter_header(const MetricReport& rep, std::size_t pca_dims) {
    std::string h = "index";
    for (const auto& p : rep.params) h += "," + p + "_true";
    for (const auto& p : rep.params) h += "," + p + "_pred";
    for (const auto& p : rep.params) h += ",err_" + p;
    h += rep.task == Scenario::circle ? ",circular_error" : ",moebius_error";
    for (std::size_t k = 0; k < pca_dims; ++k) h += ",pc" + std::to_string(k + 1);
    return h;
}

/// One CSV row per record: truth, prediction, normalized error (raw error in
/// radians for the circle task), topology-aware error, optional PCA coords.
inline std::string scatter_csv(const MetricReport& rep) {
    const std::size_t pca_dims = rep.records.empty() ? 0 : rep.records.front().pca.size();
    std::ostringstream os;
    os.precision(17);
    os << scatter_header(rep, pca_dims) << '\n';
    for (const auto& r : rep.records) {
        os << r.index;
        for (double v : r.truth) os << ',' << v;
        for (double v : r.pred) os << ',' << v;
        const auto& errs = rep.task == Scenario::circle ? r.abs_error : r.norm_error;
        for (double v : errs) {
            os << ',';
            if (std::isfinite(v)) os << v;
        }
        os << ',' << (rep.task == Scenario::circle ? r.circular : r.moebius);
        for (double v : r.pca) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

inline void export_scatter(const MetricReport& rep, const std::filesystem::path& path) {
    detail::write_file(path, scatter_csv(rep));
}

/// Projections on the leading axes with the alpha (degrees) and c colour keys.
inline std::string pca_projection_csv(const PcaModel& m, const Dataset& ds, std::span<const std::size_t> rows) {
    std::ostringstream os;
    os.precision(17);
    os << "index";
    for (std::size_t k = 0; k < m.k(); ++k) os << ",pc" << (k + 1);
    const bool loop = ds.config.scenario != Scenario::circle;
    os << (loop ? ",alpha_deg,c\n" : ",theta_deg\n");
    for (auto i : rows) {
        os << i;
        for (double v : pca_project(m, ds.input(i))) os << ',' << v;
        if (loop)
            os << ',' << ds.theta_row(i)[5] << ',' << ds.theta_row(i)[6];
        else
            os << ',' << ds.theta_row(i)[0];
        os << '\n';
    }
    return os.str();
}

}  // namespace toporeg

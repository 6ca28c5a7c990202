#pragma once

#include "common.hpp"
#include "data.hpp"
#include "forest.hpp"
#include "mews.hpp"
#include "neural.hpp"
#include "pca.hpp"
#include "preprocess.hpp"
#include "trees.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

/// Fold index per row. Classes are shuffled separately and dealt round-robin, the deal
/// continuing across classes so fold sizes also differ by at most one.
inline std::vector<int> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
    require_binary(labels, "stratified_kfold");
    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (members[static_cast<std::size_t>(c)].size() < static_cast<std::size_t>(k))
            throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) + " has " +
                                        std::to_string(members[static_cast<std::size_t>(c)].size()) + " members, fewer than k = " +
                                        std::to_string(k));
    std::vector<int> fold(labels.size(), -1);
    std::size_t dealt = 0;
    for (int c = 0; c < 2; ++c) {
        auto& rows = members[static_cast<std::size_t>(c)];
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t r : rows) fold[r] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    }
    return fold;
}

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("confusion: size mismatch");
    require_binary(predicted, "confusion");
    require_binary(truth, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1) (predicted[i] == 1 ? c.tp : c.fn)++;
        else (predicted[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

struct MetricSet {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0, gmean = 0;

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline constexpr std::array<const char*, 5> kMetricNames = {"accuracy", "precision", "recall", "f1", "gmean"};

inline double& metric_ref(MetricSet& m, std::string_view name) {
    if (name == "accuracy") return m.accuracy;
    if (name == "precision") return m.precision;
    if (name == "recall") return m.recall;
    if (name == "f1") return m.f1;
    if (name == "gmean") return m.gmean;
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

inline double metric_value(MetricSet m, std::string_view name) { return metric_ref(m, name); }

namespace detail {
inline double ratio(std::size_t num, std::size_t den) noexcept {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline double specificity(const ConfusionCounts& c) noexcept { return detail::ratio(c.tn, c.tn + c.fp); }

/// Any 0/0 ratio is 0.
inline MetricSet metrics(const ConfusionCounts& c) {
    MetricSet m;
    m.accuracy = detail::ratio(c.tp + c.tn, c.total());
    m.precision = detail::ratio(c.tp, c.tp + c.fp);
    m.recall = detail::ratio(c.tp, c.tp + c.fn);
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.gmean = std::sqrt(m.recall * specificity(c));
    return m;
}

/// Arithmetic mean and population standard deviation (divisor k) of each metric.
inline std::pair<MetricSet, MetricSet> summarize(const std::vector<MetricSet>& folds) {
    if (folds.empty()) throw std::invalid_argument("summarize: no folds");
    MetricSet mean, sd;
    const double k = static_cast<double>(folds.size());
    for (const char* name : kMetricNames) {
        double sum = 0;
        for (const auto& f : folds) sum += metric_value(f, name);
        const double mu = sum / k;
        double ss = 0;
        for (const auto& f : folds) ss += (metric_value(f, name) - mu) * (metric_value(f, name) - mu);
        metric_ref(mean, name) = mu;
        metric_ref(sd, name) = std::sqrt(ss / k);
    }
    return {mean, sd};
}

inline std::vector<double> average_series(const std::vector<std::vector<double>>& series) {
    if (series.empty()) return {};
    const std::size_t len = series.front().size();
    for (const auto& s : series)
        if (s.size() != len) throw std::invalid_argument("average_curves: series lengths differ");
    std::vector<double> out(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        for (const auto& s : series) out[t] += s[t];
        out[t] /= static_cast<double>(series.size());
    }
    return out;
}

/// Pointwise mean of per-fold curves. Validation columns are averaged only if every fold has them.
inline LearningCurve average_curves(const std::vector<LearningCurve>& curves) {
    LearningCurve out;
    if (curves.empty()) return out;
    auto column = [&](auto member) {
        std::vector<std::vector<double>> s;
        for (const auto& c : curves) s.push_back(c.*member);
        return average_series(s);
    };
    out.train_logloss = column(&LearningCurve::train_logloss);
    out.train_acc = column(&LearningCurve::train_acc);
    const bool all_val = std::all_of(curves.begin(), curves.end(), [](const LearningCurve& c) { return c.has_validation(); });
    if (all_val) {
        out.val_logloss = column(&LearningCurve::val_logloss);
        out.val_acc = column(&LearningCurve::val_acc);
    }
    if (out.has_validation() && out.val_logloss.size() != out.train_logloss.size())
        throw std::invalid_argument("average_curves: validation and training lengths differ");
    return out;
}

struct CvReport {
    std::string model;
    int k = 0;
    std::vector<ConfusionCounts> fold_counts;
    std::vector<MetricSet> folds;
    MetricSet mean;
    MetricSet std;
    LearningCurve curves;  // averaged across folds
    std::vector<std::size_t> fold_features;
    std::vector<double> fold_seconds;
    double total_seconds = 0;
};

/// What one fold produced: held-out predictions and truth, plus the training curve.
struct FoldPrediction {
    Labels predicted;
    Labels truth;
    LearningCurve curve;
    std::size_t features = 0;
};

/// Runs `fold_fn(f)` for f in [0, k), possibly in parallel, and assembles the report in fold order.
/// Exceptions are re-raised as std::runtime_error prefixed with the fold index.
inline CvReport run_folds(std::string model, int k, const std::function<FoldPrediction(int)>& fold_fn, std::size_t threads = 1) {
    if (k < 2) throw std::invalid_argument("run_folds: k must be >= 2");
    std::vector<FoldPrediction> results(static_cast<std::size_t>(k));
    std::vector<double> seconds(static_cast<std::size_t>(k), 0.0);
    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t f) {
        const auto start = std::chrono::steady_clock::now();
        try {
            results[f] = fold_fn(static_cast<int>(f));
        } catch (const std::exception& e) {
            throw std::runtime_error(model + ", fold " + std::to_string(f) + ": " + e.what());
        }
        seconds[f] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    CvReport r;
    r.model = std::move(model);
    r.k = k;
    std::vector<LearningCurve> curves;
    for (std::size_t f = 0; f < results.size(); ++f) {
        r.fold_counts.push_back(confusion(results[f].predicted, results[f].truth));
        r.folds.push_back(metrics(r.fold_counts.back()));
        r.fold_features.push_back(results[f].features);
        curves.push_back(std::move(results[f].curve));
    }
    std::tie(r.mean, r.std) = summarize(r.folds);
    r.curves = average_curves(curves);
    r.fold_seconds = seconds;
    for (double s : seconds) r.total_seconds += s;
    return r;
}

enum class ModelKind { XBNet, MLP, XGBoost, RF, MEWS };

inline const char* model_key(ModelKind m) {
    switch (m) {
        case ModelKind::XBNet: return "xbnet";
        case ModelKind::MLP: return "mlp";
        case ModelKind::XGBoost: return "xgboost";
        case ModelKind::RF: return "rf";
        case ModelKind::MEWS: return "mews";
    }
    return "";
}

inline const char* model_display(ModelKind m) {
    switch (m) {
        case ModelKind::XBNet: return "XBNet";
        case ModelKind::MLP: return "MLP";
        case ModelKind::XGBoost: return "XGBoost";
        case ModelKind::RF: return "RF";
        case ModelKind::MEWS: return "MEWS";
    }
    return "";
}

inline ModelKind parse_model_kind(std::string_view key) {
    for (ModelKind m : {ModelKind::XBNet, ModelKind::MLP, ModelKind::XGBoost, ModelKind::RF, ModelKind::MEWS})
        if (key == model_key(m)) return m;
    throw std::invalid_argument("unknown model '" + std::string(key) + "' (expected xbnet, mlp, xgboost, rf or mews)");
}

struct ModelSpec {
    ModelKind kind = ModelKind::XGBoost;
    BoostParams xgboost;
    ForestParams rf;
    TrainConfig xbnet;
    MewsBands mews = default_mews_bands();
};

struct CvOptions {
    int k = 10;
    std::uint64_t seed = 0;
    bool use_pca = false;
    double pca_threshold = 0.95;
    std::size_t threads = 1;
};

/// Design matrices for one fold; every fitted quantity comes from the training rows only.
struct PreparedFold {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
    EncodingSchema schema;
    std::optional<PcaModel> pca;
    Eigen::Index pca_components = 0;
    Matrix x_train, x_val;
    Labels y_train, y_val;
};

inline Cohort subset(const Cohort& cohort, std::span<const std::size_t> rows) {
    Cohort out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(cohort[r]);
    return out;
}

inline PreparedFold prepare_fold(const Cohort& cohort, std::span<const int> fold_of, int fold, bool use_pca, double pca_threshold) {
    if (fold_of.size() != cohort.size()) throw std::invalid_argument("prepare_fold: fold assignment length mismatch");
    PreparedFold p;
    for (std::size_t i = 0; i < cohort.size(); ++i) (fold_of[i] == fold ? p.val_rows : p.train_rows).push_back(i);
    if (p.train_rows.empty() || p.val_rows.empty()) throw std::invalid_argument("prepare_fold: empty training or validation split");
    const Cohort train = subset(cohort, p.train_rows);
    const Cohort val = subset(cohort, p.val_rows);
    p.schema = fit_schema(train);
    FeatureMatrix ftrain = apply_schema(p.schema, train);
    FeatureMatrix fval = apply_schema(p.schema, val);
    p.y_train = std::move(ftrain.labels);
    p.y_val = std::move(fval.labels);
    if (use_pca) {
        p.pca = fit_pca(ftrain.values);
        p.pca_components = components_for_variance(*p.pca, pca_threshold);
        p.x_train = transform(*p.pca, ftrain.values, p.pca_components);
        p.x_val = transform(*p.pca, fval.values, p.pca_components);
    } else {
        p.x_train = std::move(ftrain.values);
        p.x_val = std::move(fval.values);
    }
    return p;
}

inline std::string config_name(ModelKind kind, bool use_pca) {
    return std::string(model_display(kind)) + (use_pca && kind != ModelKind::MEWS ? " + PCA" : "");
}

inline Labels threshold_half(std::span<const double> prob) {
    Labels out(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= 0.5 ? 1 : 0;
    return out;
}

/// Fits the model named by `spec.kind` on one prepared fold and predicts its held-out rows.
inline FoldPrediction fit_predict_fold(const ModelSpec& spec, const PreparedFold& p, int fold) {
    FoldPrediction out;
    out.truth = p.y_val;
    out.features = static_cast<std::size_t>(p.x_train.cols());
    const auto f = static_cast<std::uint64_t>(fold);
    switch (spec.kind) {
        case ModelKind::XGBoost: {
            BoostParams params = spec.xgboost;
            params.seed = derive_seed(params.seed, f);
            BoostFitOptions opts;
            opts.x_val = &p.x_val;
            opts.y_val = &p.y_val;
            const Booster b = fit_booster(p.x_train, p.y_train, params, opts);
            out.predicted = threshold_half(predict_booster(b, p.x_val));
            out.curve = b.history;
            break;
        }
        case ModelKind::RF: {
            ForestParams params = spec.rf;
            params.seed = derive_seed(params.seed, f);
            ForestFitOptions opts;
            opts.x_val = &p.x_val;
            opts.y_val = &p.y_val;
            const Forest forest = fit_forest(p.x_train, p.y_train, params, opts);
            out.predicted = threshold_half(predict_forest(forest, p.x_val));
            out.curve = forest.history;
            break;
        }
        case ModelKind::XBNet:
        case ModelKind::MLP: {
            TrainConfig cfg = spec.xbnet;
            cfg.seed = derive_seed(cfg.seed, f);
            cfg.boost_params_per_layer.seed = derive_seed(cfg.boost_params_per_layer.seed, f);
            const XbnetModel m = spec.kind == ModelKind::XBNet ? train_xbnet(p.x_train, p.y_train, &p.x_val, p.y_val, cfg)
                                                               : train_mlp(p.x_train, p.y_train, &p.x_val, p.y_val, cfg);
            out.predicted = threshold_half(predict_network(m, p.x_val));
            out.curve = m.history;
            break;
        }
        case ModelKind::MEWS: throw std::logic_error("fit_predict_fold: MEWS has no fitted model");
    }
    return out;
}

/// Stratified k-fold evaluation of one model configuration on a horizon-truncated cohort.
inline CvReport cross_validate(const ModelSpec& spec, const Cohort& truncated, const CvOptions& opt) {
    const Labels y = outcomes(truncated);
    const std::vector<int> fold_of = stratified_kfold(y, opt.k, opt.seed);
    const std::string name = config_name(spec.kind, opt.use_pca);
    if (spec.kind == ModelKind::MEWS) {
        spec.mews.validate();
        const auto snaps = snapshots(truncated);
        const Labels predicted = mews_predict(snaps, spec.mews);
        return run_folds(name, opt.k, [&](int fold) {
            FoldPrediction out;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (fold_of[i] == fold) {
                    out.predicted.push_back(predicted[i]);
                    out.truth.push_back(y[i]);
                }
            out.features = 4;
            return out;
        }, opt.threads);
    }
    return run_folds(name, opt.k, [&](int fold) {
        const PreparedFold p = prepare_fold(truncated, fold_of, fold, opt.use_pca, opt.pca_threshold);
        return fit_predict_fold(spec, p, fold);
    }, opt.threads);
}

inline nlohmann::json to_json(const MetricSet& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"gmean", m.gmean}};
}

inline nlohmann::json to_json(const ConfusionCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

inline nlohmann::json to_json(const LearningCurve& c) {
    return {{"train_logloss", c.train_logloss}, {"val_logloss", c.val_logloss}, {"train_acc", c.train_acc}, {"val_acc", c.val_acc}};
}

/// Timing is excluded unless requested, so reports of identical runs compare byte-for-byte.
inline nlohmann::json to_json(const CvReport& r, bool include_timing = false) {
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
        nlohmann::json jf = {{"fold", f}, {"counts", to_json(r.fold_counts[f])}, {"metrics", to_json(r.folds[f])}, {"features", r.fold_features[f]}};
        if (include_timing) jf["seconds"] = r.fold_seconds[f];
        folds.push_back(std::move(jf));
    }
    nlohmann::json j = {{"model", r.model}, {"k", r.k}, {"mean", to_json(r.mean)}, {"std", to_json(r.std)}, {"folds", folds},
                        {"curves", to_json(r.curves)}};
    if (include_timing) j["total_seconds"] = r.total_seconds;
    return j;
}

/// CSV with header epoch,train_logloss,val_logloss,train_acc,val_acc; epochs count from 1.
inline void write_curve_csv(std::ostream& out, const LearningCurve& c) {
    out << "epoch,train_logloss,val_logloss,train_acc,val_acc\n";
    auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    };
    for (std::size_t t = 0; t < c.size(); ++t) {
        out << t + 1 << ',' << num(c.train_logloss[t]) << ',' << (c.has_validation() ? num(c.val_logloss[t]) : "") << ','
            << num(c.train_acc[t]) << ',' << (c.has_validation() ? num(c.val_acc[t]) : "") << '\n';
    }
}

/// Fixed-width table: one row per configuration, mean and STD of the five metrics, then seconds.
inline std::string render_report_table(const std::vector<CvReport>& reports) {
    std::ostringstream out;
    char buf[64];
    out << std::left << std::setw(16) << "Algorithm";
    for (const char* h : {"Accuracy", "Precision", "Recall", "F1-score", "G-mean"}) out << std::setw(16) << h;
    out << "Seconds\n" << std::setw(16) << "";
    for (int i = 0; i < 5; ++i) out << std::setw(16) << "mean   STD";
    out << '\n';
    for (const auto& r : reports) {
        out << std::setw(16) << r.model;
        for (const char* name : kMetricNames) {
            std::snprintf(buf, sizeof buf, "%.3f  %.3f", metric_value(r.mean, name), metric_value(r.std, name));
            out << std::setw(16) << buf;
        }
        std::snprintf(buf, sizeof buf, "%.3f", r.total_seconds);
        out << buf << '\n';
    }
    return out.str();
}

struct GridEntry {
    nlohmann::json point;
    MetricSet mean;
    MetricSet std;
    double objective = 0;
};

struct GridResult {
    std::size_t best = 0;
    nlohmann::json best_point;
    std::vector<GridEntry> table;
};

/// Cartesian product of {"param": [values...]} axes, keys in lexicographic order, last key fastest.
inline std::vector<nlohmann::json> expand_grid(const nlohmann::json& axes) {
    if (!axes.is_object()) throw std::invalid_argument("expand_grid: axes must be an object");
    std::vector<nlohmann::json> points{nlohmann::json::object()};
    for (const auto& [key, values] : axes.items()) {
        if (!values.is_array() || values.empty()) throw std::invalid_argument("expand_grid: axis '" + key + "' must be a non-empty array");
        std::vector<nlohmann::json> next;
        for (const auto& p : points)
            for (const auto& v : values) {
                nlohmann::json q = p;
                q[key] = v;
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    return points;
}

/// Evaluates each point in order; the strictly greatest mean objective wins, so ties keep the earliest point.
inline GridResult grid_search(const std::vector<nlohmann::json>& points, const std::function<CvReport(const nlohmann::json&)>& evaluate,
                              std::string_view objective = "f1") {
    if (points.empty()) throw std::invalid_argument("grid_search: empty grid");
    metric_value(MetricSet{}, objective);
    GridResult g;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const CvReport r = evaluate(points[i]);
        g.table.push_back({points[i], r.mean, r.std, metric_value(r.mean, objective)});
        if (i == 0 || g.table[i].objective > g.table[g.best].objective) g.best = i;
    }
    g.best_point = points[g.best];
    return g;
}

}  // namespace cdpred

#pragma once

#include "cohort_io.hpp"
#include "data.hpp"
#include "eval.hpp"
#include "forest.hpp"
#include "mews.hpp"
#include "neural.hpp"
#include "pca.hpp"
#include "preprocess.hpp"
#include "trees.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

using nlohmann::json;

struct PcaConfig {
    bool enabled = true;
    double threshold = 0.95;
};

struct CvConfig {
    int k = 10;
    std::string objective_metric = "f1";
    std::size_t threads = 1;
};

struct GridConfig {
    ModelKind model = ModelKind::XGBoost;
    bool use_pca = false;
    std::vector<json> points;
    json axes = json::object();

    std::vector<json> all_points() const {
        std::vector<json> out = points;
        if (!axes.empty())
            for (auto& p : expand_grid(axes)) out.push_back(std::move(p));
        return out;
    }
};

/// One JSON file drives a run. Model seeds derive from `seed`; sections carry no seeds of their own.
struct PipelineConfig {
    std::string cohort;
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    double horizon_h = 12.0;
    std::vector<ModelKind> models = {ModelKind::XBNet, ModelKind::XGBoost, ModelKind::RF, ModelKind::MEWS};
    PcaConfig pca;
    CvConfig cv;
    BoostParams xgboost;
    ForestParams rf;
    TrainConfig xbnet;
    MewsBands mews = default_mews_bands();
    std::optional<GridConfig> grid;
    bool save_models = true;

    void validate() const {
        if (cohort.empty()) throw std::invalid_argument("config: 'cohort' path is required");
        if (!(horizon_h >= 0)) throw std::invalid_argument("config: horizon_h must be >= 0");
        if (models.empty()) throw std::invalid_argument("config: 'models' must name at least one model");
        if (!(pca.threshold > 0 && pca.threshold <= 1)) throw std::invalid_argument("config: pca.threshold must lie in (0, 1]");
        if (cv.k < 2) throw std::invalid_argument("config: cv.k must be >= 2");
        metric_value(MetricSet{}, cv.objective_metric);
        xgboost.validate();
        rf.validate();
        xbnet.validate();
        mews.validate();
    }
};

namespace config_detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: bad value for '" + (where.empty() ? "" : where + ".") + key + "': " + e.what());
    }
}

}  // namespace config_detail

inline void read_boost_params(const json& j, BoostParams& p, const std::string& where) {
    using namespace config_detail;
    check_keys(j, {"n_rounds", "max_depth", "subsample", "colsample_bytree", "reg_lambda", "reg_alpha", "min_child_weight", "gamma",
                   "learning_rate", "base_score"},
               where);
    read(j, "n_rounds", p.n_rounds, where);
    read(j, "max_depth", p.max_depth, where);
    read(j, "subsample", p.subsample, where);
    read(j, "colsample_bytree", p.colsample_bytree, where);
    read(j, "reg_lambda", p.reg_lambda, where);
    read(j, "reg_alpha", p.reg_alpha, where);
    read(j, "min_child_weight", p.min_child_weight, where);
    read(j, "gamma", p.gamma, where);
    read(j, "learning_rate", p.learning_rate, where);
    read(j, "base_score", p.base_score, where);
}

inline json boost_params_section(const BoostParams& p) {
    json j = to_json(p);
    j.erase("seed");
    return j;
}

inline void read_forest_params(const json& j, ForestParams& p, const std::string& where) {
    using namespace config_detail;
    check_keys(j, {"n_trees", "max_depth", "min_samples_leaf", "max_features", "bootstrap", "threads"}, where);
    read(j, "n_trees", p.n_trees, where);
    read(j, "max_depth", p.max_depth, where);
    read(j, "min_samples_leaf", p.min_samples_leaf, where);
    read(j, "max_features", p.max_features, where);
    read(j, "bootstrap", p.bootstrap, where);
    read(j, "threads", p.threads, where);
}

inline json forest_params_section(const ForestParams& p) {
    json j = to_json(p);
    j.erase("seed");
    j["threads"] = p.threads;
    return j;
}

inline void read_train_config(const json& j, TrainConfig& c, const std::string& where) {
    using namespace config_detail;
    check_keys(j, {"learning_rate", "batch_size", "epochs", "adam_beta1", "adam_beta2", "adam_eps", "init_from_importance",
                   "preserve_frobenius_norm", "importance_booster"},
               where);
    read(j, "learning_rate", c.learning_rate, where);
    read(j, "batch_size", c.batch_size, where);
    read(j, "epochs", c.epochs, where);
    read(j, "adam_beta1", c.adam_beta1, where);
    read(j, "adam_beta2", c.adam_beta2, where);
    read(j, "adam_eps", c.adam_eps, where);
    read(j, "init_from_importance", c.init_from_importance, where);
    read(j, "preserve_frobenius_norm", c.rescale.preserve_frobenius_norm, where);
    if (j.contains("importance_booster")) read_boost_params(j.at("importance_booster"), c.boost_params_per_layer, where + ".importance_booster");
}

inline json train_config_section(const TrainConfig& c) {
    json j = to_json(c);
    for (const char* k : {"seed", "boosted_updates"}) j.erase(k);
    j["importance_booster"] = boost_params_section(c.boost_params_per_layer);
    return j;
}

inline void read_mews_bands(const json& j, MewsBands& b, const std::string& where) {
    using namespace config_detail;
    check_keys(j, {"alarm_threshold", "bands"}, where);
    read(j, "alarm_threshold", b.alarm_threshold, where);
    if (j.contains("bands")) {
        const json& jb = j.at("bands");
        check_keys(jb, {"systolic_bp", "heart_rate", "respiratory_rate", "temperature"}, where + ".bands");
        for (MewsParameter p : kMewsParameters)
            if (jb.contains(parameter_key(p))) b.bands[static_cast<std::size_t>(p)] = bands_from_json(jb.at(parameter_key(p)), parameter_key(p));
    }
}

/// Parses a pipeline config; relative cohort/out_dir paths resolve against `base_dir`.
inline PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
    using namespace config_detail;
    check_keys(j, {"cohort", "out_dir", "seed", "horizon_h", "models", "pca", "cv", "xgboost", "rf", "xbnet", "mews", "grid", "save_models"}, "");
    PipelineConfig c;
    read(j, "cohort", c.cohort, "");
    read(j, "out_dir", c.out_dir, "");
    read(j, "seed", c.seed, "");
    read(j, "horizon_h", c.horizon_h, "");
    read(j, "save_models", c.save_models, "");
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("pca")) {
        check_keys(j.at("pca"), {"enabled", "threshold"}, "pca");
        read(j.at("pca"), "enabled", c.pca.enabled, "pca");
        read(j.at("pca"), "threshold", c.pca.threshold, "pca");
    }
    if (j.contains("cv")) {
        check_keys(j.at("cv"), {"k", "objective_metric", "threads"}, "cv");
        read(j.at("cv"), "k", c.cv.k, "cv");
        read(j.at("cv"), "objective_metric", c.cv.objective_metric, "cv");
        read(j.at("cv"), "threads", c.cv.threads, "cv");
    }
    if (j.contains("xgboost")) read_boost_params(j.at("xgboost"), c.xgboost, "xgboost");
    if (j.contains("rf")) read_forest_params(j.at("rf"), c.rf, "rf");
    if (j.contains("xbnet")) read_train_config(j.at("xbnet"), c.xbnet, "xbnet");
    if (j.contains("mews")) read_mews_bands(j.at("mews"), c.mews, "mews");
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_keys(g, {"model", "use_pca", "points", "axes"}, "grid");
        GridConfig gc;
        if (g.contains("model")) gc.model = parse_model_kind(g.at("model").get<std::string>());
        read(g, "use_pca", gc.use_pca, "grid");
        if (g.contains("points")) gc.points = g.at("points").get<std::vector<json>>();
        if (g.contains("axes")) gc.axes = g.at("axes");
        c.grid = std::move(gc);
    }
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative() && !base_dir.empty()) p = (base_dir / p).lexically_normal().string();
    };
    resolve(c.cohort);
    resolve(c.out_dir);
    c.validate();
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j, std::filesystem::absolute(path).parent_path());
}

/// Full echo; parse_config(to_json(c)) reproduces `c`.
inline json to_json(const PipelineConfig& c) {
    json models = json::array();
    for (ModelKind m : c.models) models.push_back(model_key(m));
    json j = {{"cohort", c.cohort},
              {"out_dir", c.out_dir},
              {"seed", c.seed},
              {"horizon_h", c.horizon_h},
              {"models", models},
              {"pca", {{"enabled", c.pca.enabled}, {"threshold", c.pca.threshold}}},
              {"cv", {{"k", c.cv.k}, {"objective_metric", c.cv.objective_metric}, {"threads", c.cv.threads}}},
              {"xgboost", boost_params_section(c.xgboost)},
              {"rf", forest_params_section(c.rf)},
              {"xbnet", train_config_section(c.xbnet)},
              {"mews", to_json(c.mews)},
              {"save_models", c.save_models}};
    if (c.grid) {
        j["grid"] = {{"model", model_key(c.grid->model)}, {"use_pca", c.grid->use_pca}, {"points", c.grid->points}, {"axes", c.grid->axes}};
    }
    return j;
}

/// Command-line overrides of config keys.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::string>> models;
    bool no_pca = false;
    std::optional<std::string> out_dir;

    void apply(PipelineConfig& c) const {
        if (seed) c.seed = *seed;
        if (models) {
            c.models.clear();
            for (const auto& m : *models) c.models.push_back(parse_model_kind(m));
        }
        if (no_pca) c.pca.enabled = false;
        if (out_dir) c.out_dir = *out_dir;
        c.validate();
    }
};

/// Seeds every model section from the run seed.
inline ModelSpec model_spec(const PipelineConfig& c, ModelKind kind) {
    ModelSpec s;
    s.kind = kind;
    s.xgboost = c.xgboost;
    s.xgboost.seed = derive_seed(c.seed, 1);
    s.rf = c.rf;
    s.rf.seed = derive_seed(c.seed, 2);
    s.xbnet = c.xbnet;
    s.xbnet.seed = derive_seed(c.seed, 3);
    s.xbnet.boost_params_per_layer.seed = derive_seed(c.seed, 4);
    s.mews = c.mews;
    return s;
}

inline CvOptions cv_options(const PipelineConfig& c, bool use_pca) {
    CvOptions o;
    o.k = c.cv.k;
    o.seed = derive_seed(c.seed, 0);
    o.use_pca = use_pca;
    o.pca_threshold = c.pca.threshold;
    o.threads = c.cv.threads;
    return o;
}

struct ConfigRow {
    ModelKind kind;
    bool use_pca;

    std::string name() const { return config_name(kind, use_pca); }
    std::string slug() const { return std::string(model_key(kind)) + (use_pca ? "_pca" : ""); }
};

/// Rows in the fixed order XBNet, MLP, XGBoost, RF, MEWS, each ML model followed by its PCA variant.
inline std::vector<ConfigRow> config_rows(const PipelineConfig& c) {
    std::vector<ConfigRow> rows;
    for (ModelKind kind : {ModelKind::XBNet, ModelKind::MLP, ModelKind::XGBoost, ModelKind::RF, ModelKind::MEWS}) {
        if (std::find(c.models.begin(), c.models.end(), kind) == c.models.end()) continue;
        rows.push_back({kind, false});
        if (c.pca.enabled && kind != ModelKind::MEWS) rows.push_back({kind, true});
    }
    return rows;
}

/// Adult stays, truncated at the prediction horizon.
inline Cohort load_prepared_cohort(const PipelineConfig& c) {
    return truncate_horizon(filter_adults(load_cohort(c.cohort)), c.horizon_h);
}

namespace detail {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(name + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json cohort_summary(const Cohort& cohort) {
    std::size_t deaths = 0;
    for (const auto& s : cohort) deaths += static_cast<std::size_t>(s.outcome);
    return {{"stays", cohort.size()}, {"deaths", deaths},
            {"mortality_rate", cohort.empty() ? 0.0 : static_cast<double>(deaths) / static_cast<double>(cohort.size())}};
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

struct RunResult {
    std::vector<ConfigRow> rows;
    std::vector<CvReport> reports;
    json report;  // contents of report.json
};

/// Full-cohort fit of one configuration, serialized.
inline json fit_full_model(const ModelSpec& spec, const Matrix& x, const Labels& y, Eigen::Index pca_components) {
    json j;
    switch (spec.kind) {
        case ModelKind::XGBoost: j = to_json(fit_booster(x, y, spec.xgboost)); break;
        case ModelKind::RF: {
            ForestFitOptions opts;
            opts.record_history = false;
            j = to_json(fit_forest(x, y, spec.rf, opts));
            break;
        }
        case ModelKind::XBNet: j = to_json(train_xbnet(x, y, nullptr, {}, spec.xbnet)); break;
        case ModelKind::MLP: j = to_json(train_mlp(x, y, nullptr, {}, spec.xbnet)); break;
        case ModelKind::MEWS: throw std::logic_error("fit_full_model: MEWS has nothing to fit");
    }
    if (pca_components > 0) j["pca_components"] = pca_components;
    return j;
}

/// Cross-validates every configured row and writes report.json, report.txt, timing.json,
/// curves_<slug>.csv, config.json and, with save_models, schema.json, pca.json and model_<slug>.json.
inline RunResult cmd_run(const PipelineConfig& config, std::ostream& log = std::cerr) {
    config.validate();
    namespace fs = std::filesystem;
    const fs::path out_dir(config.out_dir);
    detail::stage("output", [&] { fs::create_directories(out_dir); });
    const Cohort cohort = detail::stage("load cohort", [&] { return load_prepared_cohort(config); });
    if (cohort.empty()) throw std::runtime_error("load cohort: no adult stays");

    RunResult result;
    result.rows = config_rows(config);
    json timing = json::array();
    json rows = json::array();
    for (const auto& row : result.rows) {
        log << "[run] " << row.name() << " ..." << std::flush;
        CvReport r = detail::stage("cross-validation (" + row.name() + ")",
                                   [&] { return cross_validate(model_spec(config, row.kind), cohort, cv_options(config, row.use_pca)); });
        log << " " << detail::fixed(r.total_seconds, 2) << " s\n";
        rows.push_back(to_json(r));
        timing.push_back({{"model", r.model}, {"total_seconds", r.total_seconds}, {"fold_seconds", r.fold_seconds}});
        if (row.kind != ModelKind::MEWS) {
            std::ostringstream csv;
            write_curve_csv(csv, r.curves);
            detail::write_text(out_dir / ("curves_" + row.slug() + ".csv"), csv.str());
        }
        result.reports.push_back(std::move(r));
    }
    result.report = {{"cohort", detail::cohort_summary(cohort)}, {"k", config.cv.k}, {"horizon_h", config.horizon_h}, {"rows", rows}};
    detail::write_json(out_dir / "report.json", result.report);
    detail::write_json(out_dir / "timing.json", timing);

    std::ostringstream txt;
    const json summary = detail::cohort_summary(cohort);
    txt << "Stratified " << config.cv.k << "-fold cross-validation, " << cohort.size() << " stays, mortality rate "
        << detail::fixed(summary["mortality_rate"].get<double>(), 4) << ", horizon " << config.horizon_h << " h\n\n";
    txt << render_report_table(result.reports) << "\nWall-clock seconds per model\n";
    for (const auto& r : result.reports) {
        txt << "  " << std::left << std::setw(16) << r.model << detail::fixed(r.total_seconds, 3) << " s total, folds:";
        for (double s : r.fold_seconds) txt << ' ' << detail::fixed(s, 3);
        txt << '\n';
    }
    detail::write_text(out_dir / "report.txt", txt.str());
    detail::write_json(out_dir / "config.json", to_json(config));

    const bool any_model = std::any_of(result.rows.begin(), result.rows.end(), [](const ConfigRow& r) { return r.kind != ModelKind::MEWS; });
    if (config.save_models && any_model) {
        detail::stage("full-cohort fit", [&] {
            const EncodingSchema schema = fit_schema(cohort);
            detail::write_json(out_dir / "schema.json", to_json(schema));
            const FeatureMatrix fm = apply_schema(schema, cohort);
            std::optional<PcaModel> pca;
            Eigen::Index k = 0;
            Matrix projected;
            for (const auto& row : result.rows) {
                if (row.kind == ModelKind::MEWS) continue;
                if (row.use_pca && !pca) {
                    pca = fit_pca(fm.values);
                    k = components_for_variance(*pca, config.pca.threshold);
                    projected = transform(*pca, fm.values, k);
                    json jp = to_json(*pca);
                    jp["selected_components"] = k;
                    jp["threshold"] = config.pca.threshold;
                    detail::write_json(out_dir / "pca.json", jp);
                }
                log << "[fit] " << row.name() << " on full cohort\n";
                const json model = fit_full_model(model_spec(config, row.kind), row.use_pca ? projected : fm.values, fm.labels, row.use_pca ? k : 0);
                detail::write_json(out_dir / ("model_" + row.slug() + ".json"), model);
            }
        });
    }
    return result;
}

inline RunResult cmd_run(const std::string& config_path, const Overrides& overrides = {}, std::ostream& log = std::cerr) {
    PipelineConfig c = load_config(config_path);
    overrides.apply(c);
    return cmd_run(c, log);
}

/// Writes a synthetic cohort and prints its size, mortality rate and per-vital missing rates.
inline Cohort cmd_synth(std::size_t n, std::uint64_t seed, const std::string& out_path, std::ostream& out = std::cout) {
    if (n == 0) throw std::invalid_argument("synth: n must be >= 1");
    Cohort cohort = generate_synthetic_cohort(n, seed, default_calibration());
    const auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    save_cohort(out_path, cohort);
    const json summary = detail::cohort_summary(cohort);
    out << "stays: " << n << "\nmortality rate: " << detail::fixed(summary["mortality_rate"].get<double>(), 4) << "\nmissing rate per vital:\n";
    for (VitalKind k : kAllVitalKinds) {
        std::size_t seen = 0;
        for (const auto& s : cohort) seen += s.series(k).size();
        const double expected = static_cast<double>(n) * kCollectionsPerKind;
        out << "  " << std::left << std::setw(5) << vital_code(k) << detail::fixed(1.0 - static_cast<double>(seen) / expected, 4) << '\n';
    }
    return cohort;
}

/// component,eigenvalue,ratio,cumulative,selected; `selected` is 1 on the row where the threshold is first reached.
inline Eigen::Index write_pca_scree(std::ostream& out, const PcaModel& model, double threshold) {
    const Eigen::Index k = components_for_variance(model, threshold);
    out << "component,eigenvalue,ratio,cumulative,selected\n";
    double cum = 0;
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < model.dim(); ++i) {
        cum += model.explained_variance_ratio(i);
        out << i + 1 << ',' << model.eigenvalues(i) << ',' << model.explained_variance_ratio(i) << ',' << cum << ',' << (i + 1 == k ? 1 : 0)
            << '\n';
    }
    return k;
}

inline Eigen::Index cmd_pca_scree(const PipelineConfig& config, std::ostream& log = std::cout) {
    namespace fs = std::filesystem;
    const Cohort cohort = detail::stage("load cohort", [&] { return load_prepared_cohort(config); });
    const FeatureMatrix fm = detail::stage("encode", [&] { return apply_schema(fit_schema(cohort), cohort); });
    const PcaModel model = detail::stage("pca", [&] { return fit_pca(fm.values); });
    fs::create_directories(config.out_dir);
    std::ostringstream csv;
    const Eigen::Index k = write_pca_scree(csv, model, config.pca.threshold);
    detail::write_text(fs::path(config.out_dir) / "pca_scree.csv", csv.str());
    log << k << " of " << model.dim() << " components reach cumulative explained variance " << config.pca.threshold << '\n';
    return k;
}

/// Overlays a grid point onto the grid model's config section.
inline ModelSpec apply_grid_point(const PipelineConfig& config, ModelKind kind, const json& point) {
    ModelSpec spec = model_spec(config, kind);
    const std::string where = std::string("grid point (") + model_key(kind) + ")";
    switch (kind) {
        case ModelKind::XGBoost: read_boost_params(point, spec.xgboost, where); spec.xgboost.validate(); break;
        case ModelKind::RF: read_forest_params(point, spec.rf, where); spec.rf.validate(); break;
        case ModelKind::XBNet:
        case ModelKind::MLP: read_train_config(point, spec.xbnet, where); spec.xbnet.validate(); break;
        case ModelKind::MEWS: read_mews_bands(point, spec.mews, where); spec.mews.validate(); break;
    }
    return spec;
}

inline GridResult run_grid_search(const PipelineConfig& config, const Cohort& cohort, std::ostream& log = std::cerr) {
    if (!config.grid) throw std::invalid_argument("grid-search: config has no 'grid' section");
    const GridConfig& g = *config.grid;
    return grid_search(
        g.all_points(),
        [&](const json& point) {
            log << "[grid] " << point.dump() << " ..." << std::flush;
            CvReport r = cross_validate(apply_grid_point(config, g.model, point), cohort, cv_options(config, g.use_pca));
            log << ' ' << config.cv.objective_metric << " = " << detail::fixed(metric_value(r.mean, config.cv.objective_metric), 4) << '\n';
            return r;
        },
        config.cv.objective_metric);
}

inline json to_json(const GridResult& g) {
    json table = json::array();
    for (const auto& e : g.table) table.push_back({{"point", e.point}, {"mean", to_json(e.mean)}, {"std", to_json(e.std)}, {"objective", e.objective}});
    return {{"best_index", g.best}, {"best_point", g.best_point}, {"table", table}};
}

/// Writes grid_search.json with the full table and the winning point.
inline GridResult cmd_grid_search(const PipelineConfig& config, std::ostream& log = std::cerr) {
    const Cohort cohort = detail::stage("load cohort", [&] { return load_prepared_cohort(config); });
    GridResult g = detail::stage("grid search", [&] { return run_grid_search(config, cohort, log); });
    std::filesystem::create_directories(config.out_dir);
    json j = to_json(g);
    j["model"] = model_key(config.grid->model);
    j["use_pca"] = config.grid->use_pca;
    j["objective_metric"] = config.cv.objective_metric;
    detail::write_json(std::filesystem::path(config.out_dir) / "grid_search.json", j);
    return g;
}

}  // namespace cdpred

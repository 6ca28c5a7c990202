#include "oracles.hpp"

#include <cdpred/eval.hpp>
#include <cdpred/pipeline.hpp>

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace cdpred;

namespace {

Labels labels_with(std::size_t n, std::size_t positives) {
    Labels y(n, 0);
    for (std::size_t i = 0; i < positives; ++i) y[i * (n / positives)] = 1;
    return y;
}

const Cohort& small_cohort() {
    static const Cohort c = truncate_horizon(filter_adults(generate_synthetic_cohort(2000, 11, default_calibration())), 12.0);
    return c;
}

CvReport fake_report(const std::string& name, double f1) {
    CvReport r;
    r.model = name;
    r.mean.f1 = f1;
    return r;
}

}  // namespace

TEST(StratifiedKFold, DivisibleCase) {
    const Labels y = labels_with(1000, 40);
    const auto fold = stratified_kfold(y, 10, 3);
    std::map<int, std::pair<int, int>> counts;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? counts[fold[i]].first : counts[fold[i]].second)++;
    ASSERT_EQ(counts.size(), 10u);
    for (const auto& [f, c] : counts) {
        EXPECT_EQ(c.first, 4) << "fold " << f;
        EXPECT_EQ(c.second, 96) << "fold " << f;
    }
}

TEST(StratifiedKFold, RemainderCase) {
    const Labels y = labels_with(1000, 43);
    const auto fold = stratified_kfold(y, 10, 4);
    std::vector<int> pos(10, 0), neg(10, 0), size(10, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        (y[i] ? pos : neg)[static_cast<std::size_t>(fold[i])]++;
        size[static_cast<std::size_t>(fold[i])]++;
    }
    for (auto* v : {&pos, &neg, &size}) EXPECT_LE(*std::max_element(v->begin(), v->end()) - *std::min_element(v->begin(), v->end()), 1);
    EXPECT_EQ(*std::min_element(pos.begin(), pos.end()), 4);
    EXPECT_EQ(*std::max_element(pos.begin(), pos.end()), 5);
}

TEST(StratifiedKFold, DeterministicPartition) {
    const Labels y = labels_with(500, 37);
    const auto a = stratified_kfold(y, 10, 9);
    EXPECT_EQ(a, stratified_kfold(y, 10, 9));
    EXPECT_NE(a, stratified_kfold(y, 10, 10));
    for (int f : a) {
        EXPECT_GE(f, 0);
        EXPECT_LT(f, 10);
    }
}

TEST(StratifiedKFold, Errors) {
    EXPECT_THROW(stratified_kfold(labels_with(100, 9), 10, 0), std::invalid_argument);
    EXPECT_THROW(stratified_kfold(labels_with(100, 10), 1, 0), std::invalid_argument);
    EXPECT_THROW(stratified_kfold(Labels{0, 1, 2}, 2, 0), std::invalid_argument);
}

TEST(Metrics, ReferenceRowConsistency) {
    const auto m = metrics({40, 10, 43, 907});
    EXPECT_NEAR(m.precision, 0.800, 5e-4);
    EXPECT_NEAR(m.recall, 0.482, 5e-4);
    EXPECT_NEAR(m.f1, 0.601, 1e-3);
}

TEST(Metrics, PerfectAndBlind) {
    const auto perfect = metrics({25, 0, 0, 75});
    for (const char* name : kMetricNames) EXPECT_EQ(metric_value(perfect, name), 1.0) << name;
    const auto blind = metrics({0, 3, 7, 90});
    EXPECT_EQ(blind.recall, 0.0);
    EXPECT_EQ(blind.f1, 0.0);
    EXPECT_EQ(blind.gmean, 0.0);
    const auto none = metrics({0, 0, 5, 95});
    EXPECT_EQ(none.precision, 0.0);
    EXPECT_EQ(metrics({}).accuracy, 0.0);
}

TEST(Metrics, AgreeWithBruteForceRecount) {
    Rng rng(1);
    std::uniform_int_distribution<int> len(1, 60);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(len(rng));
        Labels p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = coin(rng);
            t[i] = coin(rng);
        }
        const auto c = confusion(p, t);
        const auto r = oracle::recount(p, t);
        ASSERT_EQ(c.tp, r.tp);
        ASSERT_EQ(c.fp, r.fp);
        ASSERT_EQ(c.fn, r.fn);
        ASSERT_EQ(c.tn, r.tn);
        const auto m = metrics(c);
        const double acc = double(r.tp + r.tn) / double(n);
        const double prec = r.tp + r.fp ? double(r.tp) / double(r.tp + r.fp) : 0.0;
        const double rec = r.tp + r.fn ? double(r.tp) / double(r.tp + r.fn) : 0.0;
        const double spec = r.tn + r.fp ? double(r.tn) / double(r.tn + r.fp) : 0.0;
        ASSERT_EQ(m.accuracy, acc);
        ASSERT_EQ(m.precision, prec);
        ASSERT_EQ(m.recall, rec);
        ASSERT_EQ(m.f1, prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0);
        ASSERT_NEAR(m.gmean * m.gmean, rec * spec, 1e-12);
    }
    EXPECT_THROW(confusion(Labels{1}, Labels{1, 0}), std::invalid_argument);
}

TEST(Summarize, MatchesExternalRecomputation) {
    Rng rng(2);
    std::uniform_real_distribution<double> u;
    std::vector<MetricSet> folds(10);
    for (auto& f : folds) f = {u(rng), u(rng), u(rng), u(rng), u(rng)};
    const auto [mean, sd] = summarize(folds);
    for (const char* name : kMetricNames) {
        long double s = 0, ss = 0;
        for (const auto& f : folds) s += metric_value(f, name);
        const long double mu = s / 10;
        for (const auto& f : folds) ss += (metric_value(f, name) - mu) * (metric_value(f, name) - mu);
        EXPECT_NEAR(metric_value(mean, name), static_cast<double>(mu), 1e-15);
        EXPECT_NEAR(metric_value(sd, name), static_cast<double>(std::sqrt(ss / 10)), 1e-15);
    }
    EXPECT_THROW(summarize({}), std::invalid_argument);
}

TEST(AverageCurves, Examples) {
    LearningCurve c;
    c.train_logloss = {0.7, 0.5, 0.4};
    c.train_acc = {0.5, 0.8, 0.9};
    EXPECT_EQ(average_curves(std::vector<LearningCurve>(10, c)).train_logloss.size(), 3u);
    const auto same = average_curves(std::vector<LearningCurve>(10, c));
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(same.train_logloss[t], c.train_logloss[t], 1e-15);

    std::vector<LearningCurve> mixed;
    for (int i = 0; i < 10; ++i) {
        LearningCurve k;
        const double v = i < 5 ? 0.0 : 1.0;
        k.train_logloss = {v, v};
        k.train_acc = {v, v};
        mixed.push_back(k);
    }
    EXPECT_EQ(average_curves(mixed).train_logloss, (std::vector<double>{0.5, 0.5}));
    EXPECT_FALSE(average_curves(mixed).has_validation());

    mixed[3].train_logloss.push_back(0.2);
    EXPECT_THROW(average_curves(mixed), std::invalid_argument);
}

TEST(AverageCurves, PointwiseMeanEqualsDirectSum) {
    Rng rng(3);
    std::uniform_real_distribution<double> u;
    std::vector<LearningCurve> curves(10);
    for (auto& c : curves)
        for (int t = 0; t < 50; ++t) {
            c.push(u(rng), u(rng));
            c.push_validation(u(rng), u(rng));
        }
    const auto avg = average_curves(curves);
    ASSERT_TRUE(avg.has_validation());
    for (std::size_t t = 0; t < 50; ++t) {
        double s = 0, v = 0;
        for (const auto& c : curves) {
            s += c.train_logloss[t];
            v += c.val_acc[t];
        }
        EXPECT_NEAR(avg.train_logloss[t], s / 10, 1e-12);
        EXPECT_NEAR(avg.val_acc[t], v / 10, 1e-12);
    }
}

TEST(RunFolds, ConstantPredictZero) {
    const Labels y = labels_with(1000, 40);
    const auto fold_of = stratified_kfold(y, 10, 5);
    const auto r = run_folds("zero", 10, [&](int f) {
        FoldPrediction out;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (fold_of[i] == f) {
                out.truth.push_back(y[i]);
                out.predicted.push_back(0);
            }
        return out;
    });
    EXPECT_EQ(r.mean.recall, 0.0);
    EXPECT_NEAR(r.mean.accuracy, 0.96, 1e-12);
    EXPECT_EQ(r.folds.size(), 10u);
    for (const auto& m : r.folds) EXPECT_NEAR(m.gmean * m.gmean, 0.0, 1e-12);
}

TEST(RunFolds, ErrorsNameTheFold) {
    try {
        run_folds("XGBoost", 4, [](int f) -> FoldPrediction {
            if (f == 2) throw std::invalid_argument("bad data");
            return {{0, 1}, {0, 1}, {}, 1};
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_EQ(std::string(e.what()), "XGBoost, fold 2: bad data");
    }
}

TEST(RunFolds, OrderIndependentOfThreads) {
    auto fn = [](int f) {
        FoldPrediction out;
        for (int i = 0; i <= f; ++i) {
            out.truth.push_back(i % 2);
            out.predicted.push_back((i / 2) % 2);
        }
        out.features = static_cast<std::size_t>(f);
        return out;
    };
    const auto a = run_folds("m", 6, fn, 1), b = run_folds("m", 6, fn, 3);
    EXPECT_EQ(a.fold_counts, b.fold_counts);
    EXPECT_EQ(a.fold_features, b.fold_features);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(PrepareFold, HeldOutFoldNeverInfluencesFittedState) {
    const Cohort& base = small_cohort();
    const auto fold_of = stratified_kfold(outcomes(base), 10, 6);
    Cohort perturbed = base;
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
        if (fold_of[i] != 9) continue;
        auto& s = perturbed[i];
        s.registered_disease = "never-seen";
        s.age += 7;
        s.days_from_last_hospitalization *= 3;
        for (auto& series : s.vitals)
            for (auto& o : series) o.value = std::min(o.value * 1.3, value_range(o.kind).hi);
    }
    for (bool use_pca : {false, true}) {
        const auto a = prepare_fold(base, fold_of, 9, use_pca, 0.95);
        const auto b = prepare_fold(perturbed, fold_of, 9, use_pca, 0.95);
        EXPECT_EQ(to_json(a.schema).dump(), to_json(b.schema).dump());
        EXPECT_EQ(a.x_train, b.x_train);
        EXPECT_EQ(a.y_train, b.y_train);
        EXPECT_NE(a.x_val, b.x_val);
        if (use_pca) {
            EXPECT_EQ(to_json(*a.pca).dump(), to_json(*b.pca).dump());
            EXPECT_EQ(a.pca_components, b.pca_components);
            EXPECT_EQ(a.x_train.cols(), a.pca_components);
        }
    }
}

TEST(PrepareFold, SplitsRowsExactly) {
    const Cohort& c = small_cohort();
    const auto fold_of = stratified_kfold(outcomes(c), 10, 7);
    std::set<std::size_t> seen;
    for (int f = 0; f < 10; ++f) {
        const auto p = prepare_fold(c, fold_of, f, false, 0.95);
        EXPECT_EQ(p.train_rows.size() + p.val_rows.size(), c.size());
        for (auto r : p.val_rows) EXPECT_TRUE(seen.insert(r).second);
        EXPECT_EQ(p.x_val.rows(), static_cast<Eigen::Index>(p.val_rows.size()));
    }
    EXPECT_EQ(seen.size(), c.size());
}

TEST(CrossValidate, MewsIsScoringOnly) {
    ModelSpec spec;
    spec.kind = ModelKind::MEWS;
    CvOptions opt;
    opt.seed = 1;
    const auto r = cross_validate(spec, small_cohort(), opt);
    EXPECT_EQ(r.model, "MEWS");
    EXPECT_EQ(r.folds.size(), 10u);
    EXPECT_EQ(r.curves.size(), 0u);
    for (auto f : r.fold_features) EXPECT_EQ(f, 4u);
    std::size_t total = 0;
    for (const auto& c : r.fold_counts) total += c.total();
    EXPECT_EQ(total, small_cohort().size());
    const auto predicted = mews_predict(snapshots(small_cohort()), spec.mews);
    const auto all = confusion(predicted, outcomes(small_cohort()));
    ConfusionCounts summed;
    for (const auto& c : r.fold_counts) {
        summed.tp += c.tp;
        summed.fp += c.fp;
        summed.fn += c.fn;
        summed.tn += c.tn;
    }
    EXPECT_EQ(summed, all);
}

TEST(CrossValidate, ReportInvariants) {
    ModelSpec spec;
    spec.kind = ModelKind::XGBoost;
    spec.xgboost.n_rounds = 20;
    CvOptions opt;
    opt.k = 5;
    opt.seed = 2;
    const auto r = cross_validate(spec, small_cohort(), opt);
    ASSERT_EQ(r.folds.size(), 5u);
    const auto [mean, sd] = summarize(r.folds);
    EXPECT_EQ(mean, r.mean);
    EXPECT_EQ(sd, r.std);
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
        EXPECT_EQ(r.folds[f], metrics(r.fold_counts[f]));
        EXPECT_NEAR(r.folds[f].gmean * r.folds[f].gmean, r.folds[f].recall * specificity(r.fold_counts[f]), 1e-12);
    }
    EXPECT_EQ(r.curves.size(), 20u);
    EXPECT_TRUE(r.curves.has_validation());
    EXPECT_EQ(cross_validate(spec, small_cohort(), opt).fold_counts, r.fold_counts);
}

TEST(GridSearch, TieBreakSingletonAndEmpty) {
    const std::vector<nlohmann::json> two{{{"a", 1}}, {{"a", 1}}};
    const auto g = grid_search(two, [](const nlohmann::json&) { return fake_report("m", 0.5); });
    EXPECT_EQ(g.best, 0u);
    EXPECT_EQ(g.table.size(), 2u);
    const auto one = grid_search({{{"a", 3}}}, [](const nlohmann::json&) { return fake_report("m", 0.1); });
    EXPECT_EQ(one.best_point, (nlohmann::json{{"a", 3}}));
    EXPECT_THROW(grid_search({}, [](const nlohmann::json&) { return CvReport{}; }), std::invalid_argument);
    std::vector<nlohmann::json> pts{{{"a", 1}}, {{"a", 2}}, {{"a", 3}}};
    const auto best = grid_search(pts, [](const nlohmann::json& p) { return fake_report("m", p.at("a") == 2 ? 0.9 : 0.3); });
    EXPECT_EQ(best.best, 1u);
    EXPECT_THROW(grid_search(pts, [](const nlohmann::json&) { return CvReport{}; }, "auc"), std::invalid_argument);
}

TEST(GridSearch, ExpandGridOrder) {
    const auto pts = expand_grid({{"max_depth", {3, 6}}, {"n_rounds", {10, 20, 30}}});
    ASSERT_EQ(pts.size(), 6u);
    EXPECT_EQ(pts[0], (nlohmann::json{{"max_depth", 3}, {"n_rounds", 10}}));
    EXPECT_EQ(pts[1], (nlohmann::json{{"max_depth", 3}, {"n_rounds", 20}}));
    EXPECT_EQ(pts[5], (nlohmann::json{{"max_depth", 6}, {"n_rounds", 30}}));
    EXPECT_THROW(expand_grid({{"max_depth", nlohmann::json::array()}}), std::invalid_argument);
}

TEST(GridSearch, DefaultsBeatCrippledPoint) {
    PipelineConfig cfg;
    cfg.seed = 42;
    const std::vector<nlohmann::json> pts{nlohmann::json::object(), {{"max_depth", 1}, {"n_rounds", 1}}};
    const auto g = grid_search(pts, [&](const nlohmann::json& p) {
        return cross_validate(apply_grid_point(cfg, ModelKind::XGBoost, p), small_cohort(), cv_options(cfg, false));
    });
    EXPECT_EQ(g.best, 0u);
    EXPECT_GT(g.table[0].objective, g.table[1].objective);
}

TEST(Rendering, TableCsvAndJson) {
    CvReport r = fake_report("XGBoost + PCA", 0.7);
    r.k = 2;
    r.folds = {MetricSet{}, MetricSet{}};
    r.fold_counts = {ConfusionCounts{}, ConfusionCounts{}};
    r.fold_features = {3, 3};
    r.fold_seconds = {1.5, 2.5};
    r.total_seconds = 4.0;
    const auto table = render_report_table({r});
    EXPECT_NE(table.find("XGBoost + PCA"), std::string::npos);
    EXPECT_NE(table.find("0.700"), std::string::npos);
    EXPECT_NE(table.find("4.000"), std::string::npos);
    EXPECT_FALSE(to_json(r).contains("total_seconds"));
    EXPECT_EQ(to_json(r, true).at("total_seconds"), 4.0);

    LearningCurve c;
    c.push(0.5, 0.75);
    c.push(0.25, 1.0);
    std::ostringstream csv;
    write_curve_csv(csv, c);
    EXPECT_EQ(csv.str(), "epoch,train_logloss,val_logloss,train_acc,val_acc\n1,0.5,,0.75,\n2,0.25,,1,\n");
    EXPECT_EQ(config_name(ModelKind::MEWS, true), "MEWS");
    EXPECT_EQ(config_name(ModelKind::RF, true), "RF + PCA");
    EXPECT_EQ(parse_model_kind("xbnet"), ModelKind::XBNet);
    EXPECT_THROW(parse_model_kind("svm"), std::invalid_argument);
}

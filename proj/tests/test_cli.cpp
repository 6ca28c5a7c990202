#include <cdpred/pipeline.hpp>

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cdpred;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int status;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const fs::path dir = fs::temp_directory_path() / (std::string("cdpred_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Result cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(CDPRED_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
    const auto p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

fs::path synth(const fs::path& dir, std::size_t n, std::uint64_t seed) {
    const auto p = dir / "cohort.csv";
    const auto r = cli("synth --n " + std::to_string(n) + " --seed " + std::to_string(seed) + " --out " + p.string(), dir);
    EXPECT_EQ(r.status, 0) << r.err;
    return p;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Synth, RoundTripAndSummary) {
    const auto dir = scratch();
    const auto r = cli("synth --n 10000 --seed 7 --out " + (dir / "a.csv").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const Cohort c = load_cohort((dir / "a.csv").string());
    EXPECT_EQ(c.size(), 10000u);
    const auto pos = r.out.find("mortality rate: ");
    ASSERT_NE(pos, std::string::npos);
    const double rate = std::stod(r.out.substr(pos + 16));
    EXPECT_GE(rate, 0.03);
    EXPECT_LE(rate, 0.05);
    EXPECT_NE(r.out.find("missing rate per vital"), std::string::npos);
}

TEST(Synth, IdenticalCommandsWriteIdenticalFiles) {
    const auto dir = scratch();
    ASSERT_EQ(cli("synth --n 500 --seed 3 --out " + (dir / "a.csv").string(), dir).status, 0);
    ASSERT_EQ(cli("synth --n 500 --seed 3 --out " + (dir / "b.csv").string(), dir).status, 0);
    ASSERT_EQ(cli("synth --n 500 --seed 4 --out " + (dir / "c.csv").string(), dir).status, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Synth, UnwritablePathFails) {
    const auto dir = scratch();
    std::ofstream(dir / "file") << "x";
    const auto r = cli("synth --n 10 --out " + (dir / "file" / "c.csv").string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Run, DefaultConfigOnFiveThousandStays) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 5000, 21);
    const auto cfg = write_config(dir, {{"cohort", cohort.string()}, {"out_dir", (dir / "out").string()}});
    const auto r = cli("run " + cfg.string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const fs::path out = dir / "out";
    const json report = json::parse(slurp(out / "report.json"));
    const std::vector<std::string> names{"XBNet", "XBNet + PCA", "XGBoost", "XGBoost + PCA", "RF", "RF + PCA", "MEWS"};
    ASSERT_EQ(report.at("rows").size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        const json& row = report.at("rows")[i];
        EXPECT_EQ(row.at("model"), names[i]);
        for (const char* key : {"mean", "std"}) {
            ASSERT_EQ(row.at(key).size(), 5u);
            for (const char* m : kMetricNames) EXPECT_TRUE(row.at(key).at(m).is_number()) << names[i] << ' ' << key << ' ' << m;
        }
        ASSERT_EQ(row.at("folds").size(), 10u);
        for (const json& f : row.at("folds")) {
            const double p = f.at("metrics").at("precision"), rc = f.at("metrics").at("recall");
            EXPECT_NEAR(f.at("metrics").at("f1").get<double>(), p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0, 1e-12);
        }
    }
    const std::string txt = slurp(out / "report.txt");
    EXPECT_NE(txt.find("Wall-clock seconds per model"), std::string::npos);
    for (const auto& n : names) EXPECT_NE(txt.find(n), std::string::npos);
    const json timing = json::parse(slurp(out / "timing.json"));
    ASSERT_EQ(timing.size(), 7u);
    for (const json& t : timing) EXPECT_GE(t.at("total_seconds").get<double>(), 0.0);

    const PipelineConfig defaults = load_config(cfg.string());
    for (const char* slug : {"xbnet", "xbnet_pca", "xgboost", "xgboost_pca", "rf", "rf_pca"}) {
        const std::string csv = slurp(out / (std::string("curves_") + slug + ".csv"));
        const std::size_t expected = std::string(slug).starts_with("xbnet") ? static_cast<std::size_t>(defaults.xbnet.epochs)
                                     : std::string(slug).starts_with("xgboost") ? static_cast<std::size_t>(defaults.xgboost.n_rounds)
                                                                                : static_cast<std::size_t>(defaults.rf.n_trees);
        EXPECT_EQ(count_lines(csv), expected + 1) << slug;
        EXPECT_TRUE(fs::exists(out / (std::string("model_") + slug + ".json"))) << slug;
    }
    EXPECT_FALSE(fs::exists(out / "curves_mews.csv"));
    for (const char* f : {"schema.json", "pca.json", "config.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Run, MewsOnlyIsFastAndWritesNoModels) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 5000, 22);
    const auto cfg = write_config(dir, {{"cohort", cohort.string()}, {"out_dir", (dir / "out").string()}});
    const auto start = std::chrono::steady_clock::now();
    const auto r = cli("run " + cfg.string() + " --models mews", dir);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_LT(seconds, 1.0);
    const json report = json::parse(slurp(dir / "out" / "report.json"));
    ASSERT_EQ(report.at("rows").size(), 1u);
    EXPECT_EQ(report.at("rows")[0].at("model"), "MEWS");
    for (const auto& e : fs::directory_iterator(dir / "out")) EXPECT_FALSE(e.path().filename().string().starts_with("model_")) << e.path();
    EXPECT_FALSE(fs::exists(dir / "out" / "schema.json"));
}

TEST(Run, EchoedConfigReproducesReport) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 1500, 23);
    const auto cfg = write_config(dir, {{"cohort", cohort.string()},
                                        {"out_dir", (dir / "first").string()},
                                        {"seed", 5},
                                        {"models", {"xgboost", "mews"}},
                                        {"cv", {{"k", 5}}},
                                        {"xgboost", {{"n_rounds", 15}}},
                                        {"save_models", false}});
    ASSERT_EQ(cli("run " + cfg.string(), dir).status, 0);
    const auto echoed = dir / "first" / "config.json";
    ASSERT_EQ(cli("run " + echoed.string() + " --out " + (dir / "second").string(), dir).status, 0);
    EXPECT_EQ(slurp(dir / "first" / "report.json"), slurp(dir / "second" / "report.json"));
    const json a = json::parse(slurp(echoed)), b = json::parse(slurp(dir / "second" / "config.json"));
    EXPECT_EQ(a.at("seed"), 5);
    EXPECT_EQ(a.at("xgboost"), b.at("xgboost"));
    EXPECT_EQ(count_lines(slurp(dir / "first" / "curves_xgboost_pca.csv")), 16u);

    ASSERT_EQ(cli("run " + cfg.string() + " --seed 6 --no-pca --out " + (dir / "third").string(), dir).status, 0);
    const json third = json::parse(slurp(dir / "third" / "config.json"));
    EXPECT_EQ(third.at("seed"), 6);
    EXPECT_EQ(third.at("pca").at("enabled"), false);
    EXPECT_EQ(json::parse(slurp(dir / "third" / "report.json")).at("rows").size(), 2u);
}

TEST(Run, ConfigErrorsAreReported) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 200, 24);
    auto r = cli("run " + write_config(dir, {{"cohort", cohort.string()}, {"xgboost", {{"max_dpeth", 3}}}}).string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("max_dpeth"), std::string::npos) << r.err;
    r = cli("run " + write_config(dir, {{"cohort", cohort.string()}, {"colour", 1}}).string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("colour"), std::string::npos) << r.err;
    r = cli("run " + write_config(dir, {{"cohort", (dir / "missing.csv").string()}, {"out_dir", (dir / "o").string()}}).string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("load cohort"), std::string::npos) << r.err;
    r = cli("run " + (dir / "nope.json").string(), dir);
    EXPECT_NE(r.status, 0);
    r = cli("run " + cohort.string() + " --models svm", dir);
    EXPECT_NE(r.status, 0);
}

TEST(Run, FoldFailureNamesStageAndFold) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 40, 25);
    // 40 stays hold too few deaths for 10 folds.
    const auto r = cli("run " + write_config(dir, {{"cohort", cohort.string()}, {"out_dir", (dir / "o").string()}, {"models", {"xgboost"}}}).string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("cross-validation (XGBoost)"), std::string::npos) << r.err;
}

TEST(PcaScree, CumulativeColumnAndMarkedCutoff) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 2000, 26);
    const auto r = cli("pca-scree " + write_config(dir, {{"cohort", cohort.string()}, {"out_dir", (dir / "o").string()}}).string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    std::istringstream csv(slurp(dir / "o" / "pca_scree.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "component,eigenvalue,ratio,cumulative,selected");
    std::vector<double> cum;
    int marked = 0, marks = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        ASSERT_EQ(f.size(), 5u);
        cum.push_back(std::stod(f[3]));
        if (f[4] == "1") {
            marked = std::stoi(f[0]);
            ++marks;
        }
    }
    ASSERT_EQ(marks, 1);
    for (std::size_t i = 1; i < cum.size(); ++i) EXPECT_GE(cum[i], cum[i - 1]);
    EXPECT_NEAR(cum.back(), 1.0, 1e-9);
    EXPECT_GE(cum[static_cast<std::size_t>(marked - 1)], 0.95);
    if (marked > 1) {
        EXPECT_LT(cum[static_cast<std::size_t>(marked - 2)], 0.95);
    }
    EXPECT_NE(r.out.find(std::to_string(marked) + " of "), std::string::npos);
}

TEST(PcaScree, DuplicateColumnsGiveZeroTrailingRatios) {
    Matrix x(50, 4);
    Rng rng(1);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < 50; ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = z(rng);
        x(i, 2) = x(i, 0);
        x(i, 3) = x(i, 1);
    }
    std::ostringstream csv;
    const auto k = write_pca_scree(csv, fit_pca(x), 0.95);
    EXPECT_EQ(k, 2);
    const auto model = fit_pca(x);
    EXPECT_NEAR(model.explained_variance_ratio(2), 0.0, 1e-12);
    EXPECT_NEAR(model.explained_variance_ratio(3), 0.0, 1e-12);
}

TEST(GridSearchCommand, WritesTableAndBestPoint) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 1500, 27);
    const auto cfg = write_config(dir, {{"cohort", cohort.string()},
                                        {"out_dir", (dir / "o").string()},
                                        {"cv", {{"k", 5}}},
                                        {"grid", {{"model", "xgboost"}, {"axes", {{"max_depth", {1, 6}}, {"n_rounds", {1, 20}}}}}}});
    const auto r = cli("grid-search " + cfg.string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const json g = json::parse(slurp(dir / "o" / "grid_search.json"));
    ASSERT_EQ(g.at("table").size(), 4u);
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i)
        if (g.at("table")[i].at("objective").get<double>() > g.at("table")[best].at("objective").get<double>()) best = i;
    EXPECT_EQ(g.at("best_index"), best);
    EXPECT_EQ(g.at("best_point"), g.at("table")[best].at("point"));
    EXPECT_EQ(g.at("objective_metric"), "f1");
    EXPECT_NE(r.out.find("best point"), std::string::npos);
}

TEST(GridSearchCommand, MissingGridSectionFails) {
    const auto dir = scratch();
    const auto cohort = synth(dir, 200, 28);
    const auto r = cli("grid-search " + write_config(dir, {{"cohort", cohort.string()}}).string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("grid"), std::string::npos);
}

TEST(Config, DefaultsAndEcho) {
    const PipelineConfig c = parse_config(json{{"cohort", "c.csv"}});
    EXPECT_EQ(c.cv.k, 10);
    EXPECT_EQ(c.pca.threshold, 0.95);
    EXPECT_EQ(c.horizon_h, 12.0);
    EXPECT_EQ(config_rows(c).size(), 7u);
    const PipelineConfig back = parse_config(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    EXPECT_THROW(parse_config(json::object()), std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"cohort", "c.csv"}, {"cv", {{"k", 1}}}}), std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"cohort", "c.csv"}, {"seed", "x"}}), std::invalid_argument);
}

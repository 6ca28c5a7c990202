#include <cdpred/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_models(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

struct OverrideFlags {
    std::uint64_t seed = 0;
    std::string models;
    bool no_pca = false;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Override the run seed");
        cmd->add_option("--models", models, "Comma-separated model list (xbnet,mlp,xgboost,rf,mews)");
        cmd->add_flag("--no-pca", no_pca, "Skip the PCA variants");
        cmd->add_option("--out", out, "Override the output directory");
    }

    cdpred::PipelineConfig resolve(CLI::App* cmd, const std::string& config_path) const {
        cdpred::PipelineConfig c = cdpred::load_config(config_path);
        cdpred::Overrides o;
        if (cmd->count("--seed")) o.seed = seed;
        if (cmd->count("--models")) o.models = split_models(models);
        o.no_pca = no_pca;
        if (cmd->count("--out")) o.out_dir = out;
        o.apply(c);
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clinical deterioration prediction toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort CSV");
    std::size_t n = 10000;
    std::uint64_t synth_seed = 7;
    std::string synth_out = "cohort.csv";
    synth->add_option("--n", n, "Number of stays")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output CSV path");

    std::string config_path;
    OverrideFlags run_flags, scree_flags, grid_flags;
    auto* run = app.add_subcommand("run", "Cross-validate every configured model and write the report");
    run->add_option("config", config_path, "Pipeline config JSON")->required();
    run_flags.attach(run);
    auto* scree = app.add_subcommand("pca-scree", "Write the explained-variance table of the full cohort");
    scree->add_option("config", config_path, "Pipeline config JSON")->required();
    scree_flags.attach(scree);
    auto* grid = app.add_subcommand("grid-search", "Cross-validate every grid point of the config's grid section");
    grid->add_option("config", config_path, "Pipeline config JSON")->required();
    grid_flags.attach(grid);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            cdpred::cmd_synth(n, synth_seed, synth_out);
        } else if (*run) {
            const auto c = run_flags.resolve(run, config_path);
            cdpred::cmd_run(c);
            std::cout << "report written to " << c.out_dir << "\n";
        } else if (*scree) {
            cdpred::cmd_pca_scree(scree_flags.resolve(scree, config_path));
        } else if (*grid) {
            const auto g = cdpred::cmd_grid_search(grid_flags.resolve(grid, config_path));
            std::cout << "best point: " << g.best_point.dump() << " (objective " << g.table[g.best].objective << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

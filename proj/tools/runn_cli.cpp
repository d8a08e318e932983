#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>

#include "runn/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Ritz-Uzawa network experiment harness"};
    app.get_formatter()->column_width(34);

    std::string experiment;
    std::string out_dir;
    std::string config_path;
    std::uint64_t seed = 0;
    double alpha = -1.0;

    app.add_option("--experiment", experiment, "experiment tag (see --list)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--config", config_path, "JSON config file; flags override its fields");
    app.add_option("--alpha", alpha, "NCPSD tail threshold in (0, 0.5)");
    bool list_tags = false;
    app.add_flag("--list", list_tags, "print known experiment tags and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (list_tags) {
        for (const auto& tag : runn::experiment_tags()) std::printf("%s\n", tag.c_str());
        return 0;
    }

    try {
        runn::ExperimentConfig cfg;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                std::fprintf(stderr, "error: cannot read config file '%s'\n", config_path.c_str());
                return 2;
            }
            cfg = runn::config_from_json(nlohmann::json::parse(f));
        }
        if (!experiment.empty()) cfg.experiment = experiment;
        if (app.count("--seed") > 0) cfg.seed = seed;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (alpha > 0.0) cfg.alpha = alpha;
        if (cfg.experiment.empty()) {
            std::fprintf(stderr, "error: no experiment given (use --experiment or --config)\n");
            return 2;
        }
        return runn::run_experiment(cfg);
    } catch (const runn::ConfigError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "usage error: bad config JSON: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

#include <cstring>
#include <iostream>

#include <CLI11.hpp>

#include "distreg/data_table.hpp"
#include "distreg/error.hpp"
#include "distreg/run.hpp"
#include "distreg/synth.hpp"

namespace {

int exit_code(const distreg::Error& e) {
    const char* c = e.category();
    if (!std::strcmp(c, "config")) return 2;
    if (!std::strcmp(c, "data")) return 3;
    if (!std::strcmp(c, "formula")) return 4;
    if (!std::strcmp(c, "numerical")) return 5;
    return 1;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Distributional regression: fit, predict and summarize models"};
    app.require_subcommand(1);

    std::string config, newdata, out, run_dir, kind;
    std::size_t n = 500, p = 6;
    std::uint64_t seed = 1;

    auto* fit = app.add_subcommand("fit", "Run the optimizer/sampler pipeline of a config");
    fit->add_option("config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    fit->add_option("-o,--out", out, "Output directory (default from the config and $" +
                                         std::string(distreg::output_root_env) + ")");

    auto* pred = app.add_subcommand("predict", "Predict new data from a finished run");
    pred->add_option("config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    pred->add_option("--newdata", newdata, "CSV with the covariates")->required()->check(CLI::ExistingFile);
    pred->add_option("-o,--out", out, "Output CSV");

    auto* sum = app.add_subcommand("summary", "Print the summary of a finished run");
    sum->add_option("run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* sim = app.add_subcommand("simulate", "Write a synthetic data set");
    sim->add_option("kind", kind, "gamart, linear, ztnb or growth")->required();
    sim->add_option("-n", n, "Number of rows");
    sim->add_option("-p", p, "Number of coefficients (linear)");
    sim->add_option("--seed", seed, "Random seed");
    sim->add_option("-o,--out", out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*fit) {
            distreg::RunConfig cfg = distreg::load_config(config);
            std::string dir = distreg::run_fit(cfg, out.empty() ? distreg::output_dir(cfg) : out);
            std::cout << distreg::run_summary(dir);
            std::cout << "output: " << dir << "\n";
        } else if (*pred) {
            distreg::RunConfig cfg = distreg::load_config(config);
            std::cout << distreg::run_predict(cfg, newdata, out) << "\n";
        } else if (*sum) {
            std::cout << distreg::run_summary(run_dir);
        } else if (*sim) {
            distreg::write_csv(distreg::simulate(kind, n, seed, p), out);
        }
    } catch (const distreg::Error& e) {
        std::cerr << "error [" << e.category() << "]: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distreg/data_table.hpp"
#include "distreg/design.hpp"
#include "distreg/diagnostics.hpp"
#include "distreg/engine.hpp"
#include "distreg/predict.hpp"
#include "distreg/sampler.hpp"

namespace distreg {

/// Environment variable naming the default root directory for run outputs.
inline constexpr const char* output_root_env = "DISTREG_OUTPUT_ROOT";

struct SimulationSpec {
    std::string kind;
    std::size_t n = 500;
    std::uint64_t seed = 1;
    std::size_t p = 6;
};

struct PredictionSpec {
    std::string name;
    std::string newdata;        ///< CSV path; empty for the training data or a grid
    std::string grid_variable;  ///< evaluate over an equally spaced grid of this covariate
    int grid_n = 100;
    PredictionRequest request;
};

struct DiagnosticOptions {
    bool residuals = true;
    bool crps = false;
    bool rootogram = false;
    bool acf = true;
    bool waic = true;
    int max_count = 50;
    int max_lag = 40;
};

/** Declarative description of one run, read from a JSON file. */
struct RunConfig {
    std::string source;  ///< path of the config file, if any
    std::string base_dir = ".";
    std::string data;
    std::optional<SimulationSpec> simulate;
    std::vector<std::string> formula;
    std::string family = "gaussian";
    std::string optimizer = "bfit";
    std::string sampler = "gmcmc";
    std::uint64_t seed = 1;
    BackfitOptions bfit;
    BoostOptions boost;
    McmcOptions mcmc;
    GibbsOptions gibbs;
    double prior_m = 0.0;
    double prior_M = 1e5;
    double prior_a = 1.0;
    double prior_b = 1e-4;
    StartValues start;
    std::string output;
    DiagnosticOptions diagnostics;
    std::vector<PredictionSpec> predictions;
    std::string json;  ///< the parsed document, re-serialized
};

RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// $DISTREG_OUTPUT_ROOT, or "runs" when unset.
std::string default_output_root();
/// Output directory of a run: absolute `output`, `output` under the root, or root/<config stem>.
std::string output_dir(const RunConfig& cfg);

/** A fitted model: frame plus optional mode and posterior draws. */
struct Model {
    ModelFrame frame;
    std::optional<FitState> fit;
    std::optional<SampleMatrix> samples;
    std::optional<SampleStats> stats;
    std::optional<Waic> waic;
};

DataTable load_data(const RunConfig& cfg);
ModelFrame make_frame(const RunConfig& cfg, const DataTable& data);
/// Runs optimizer and sampler as configured; no file output.
Model fit_model(const RunConfig& cfg, const DataTable& data);

/// Text report: coefficient tables, sampler and optimizer summaries.
std::string summarize(const Model& model, const RunConfig& cfg);

/// Full pipeline with artifacts; returns the run directory.
std::string run_fit(const RunConfig& cfg, const std::string& out_dir);
/// Reloads a finished run (frame, mode and samples) from its directory.
Model load_run(const std::string& run_dir, RunConfig* cfg_out = nullptr);
/// Predicts for new data from a finished run and writes a CSV; returns its path.
std::string run_predict(const RunConfig& cfg, const std::string& newdata_path, const std::string& out_path = {});
/// Summary text of a finished run.
std::string run_summary(const std::string& run_dir);

/// Evaluation table over an equally spaced grid of one covariate; other columns are held
/// at their mean (numeric) or first level (categorical).
DataTable covariate_grid(const ModelFrame& frame, const DataTable& data, const std::string& variable, int n);

}

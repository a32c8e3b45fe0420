#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/data_table.hpp"
#include "distreg/design.hpp"
#include "distreg/engine.hpp"
#include "distreg/sampler.hpp"

namespace distreg {

enum class PredictTarget { link, parameter, term };
enum class Functional { mean, c95, identity };

struct PredictionRequest {
    PredictTarget target = PredictTarget::parameter;
    /// Term labels to include; empty means all terms.
    std::vector<std::string> terms;
    bool intercept = true;
    Functional functional = Functional::mean;
    /// Restrict to these parameters; empty means all.
    std::vector<std::string> params;
};

struct ParamPrediction {
    std::string param;
    /// mean: one column; c95: (2.5%, mean, 97.5%); identity: one column per draw.
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;
};

/** Posterior (or mode) prediction on new data. Exactly one of `fit` and `samples` is used;
 * samples win when both are given.
 */
std::vector<ParamPrediction> predict(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                                     const DataTable& newdata, const PredictionRequest& req);

/// Predictors for one coefficient set on new data, limited to the selected terms.
std::vector<Eigen::VectorXd> predict_eta(const ModelFrame& frame, const Coefficients& coefs,
                                         const DataTable& newdata, const std::vector<std::string>& terms = {},
                                         bool intercept = true);

/// P(Y >= threshold) per row, from posterior-mean parameters.
Eigen::VectorXd prob_exceed(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                            const DataTable& newdata, double threshold);
Eigen::VectorXd prob_exceed(const Family& family, const ParamValues& par, double threshold);

void write_predictions_csv(const std::vector<ParamPrediction>& preds, const std::string& path);

}

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "notesurv/autodiff.hpp"
#include "notesurv/dataset.hpp"
#include "notesurv/encoder.hpp"
#include "notesurv/preprocess.hpp"

namespace notesurv {

// mean of -[y ln p + (1-y) ln(1-p)], probs clipped to [1e-12, 1-1e-12]
double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels);

// average negative log partial likelihood; risk sets by >=, stable
// log-sum-exp. Throws without observed events.
double pll_loss(const std::vector<double>& risks, const std::vector<double>& times,
                const std::vector<double>& events);

struct CoxParams {
    std::vector<double> beta;
    FeatureSchema schema;

    std::vector<double> endogenous_weights() const;  // tau
    std::vector<double> exogenous_weights() const;   // gamma
    double linear_predictor(const SurvivalRecord& r) const;
};

struct CoxSeparationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CoxConvergenceError : std::runtime_error {
    CoxConvergenceError(const std::string& msg, std::vector<double> beta)
        : std::runtime_error(msg), last_beta(std::move(beta)) {}
    std::vector<double> last_beta;
};

// Newton maximization of the log partial likelihood minus ridge*|beta|^2/2,
// with step halving. Detects monotone-likelihood separation.
CoxParams fit_cox(const SurvivalDataset& dataset, double ridge = 0.0,
                  std::size_t max_iter = 100, double tol = 1e-9);

// log partial likelihood (with optional ridge) at beta; exposed for tests
double cox_log_partial_likelihood(const SurvivalDataset& dataset,
                                  const std::vector<double>& beta, double ridge = 0.0);
std::vector<double> cox_gradient(const SurvivalDataset& dataset,
                                 const std::vector<double>& beta, double ridge = 0.0);

// Step function of the cumulative baseline hazard over distinct event times.
struct BaselineHazard {
    std::vector<double> times;    // sorted distinct event times
    std::vector<double> cumhaz;   // nondecreasing, value at each step

    double value(double t) const;  // right-continuous, 0 before first time
};

BaselineHazard breslow(const std::vector<double>& times, const std::vector<double>& events,
                       const std::vector<double>& risks);

struct SurvivalCurve {
    std::vector<double> times;
    std::vector<double> survival;    // S(t)
    std::vector<double> mortality;   // F(t) = 1 - S(t)
    std::vector<double> cum_hazard;  // H(t)
};

// H(t) = H0(t) exp(log_risk); S = exp(-H); F = 1 - S
SurvivalCurve survival_curve(const BaselineHazard& base, double log_risk,
                             const std::vector<double>& grid);

// p(T, delta) = h(T)^delta S(T), with h(T) the step increment of H per unit
// time under the piecewise-constant convention. Diagnostics only.
double likelihood(const BaselineHazard& base, double log_risk, double time, int event);

enum class TaskMode { mortality, survival };
enum class TextFeatures { none, tfidf, attention };

TaskMode task_from_string(const std::string& s);
std::string to_string(TaskMode m);
TextFeatures text_features_from_string(const std::string& s);
std::string to_string(TextFeatures t);

struct ModelConfig {
    TaskMode mode = TaskMode::survival;
    TextFeatures text = TextFeatures::none;
    std::vector<std::size_t> hidden = {64, 64};  // feed-forward widths
    ad::Activation act = ad::Activation::selu;
    double dropout = 0.1;
    EncoderConfig encoder;  // attention text features only
};

struct TrainConfig {
    std::size_t batch = 24;
    std::size_t epochs = 4;
    double lr = 1e-2;
    std::uint64_t seed = 0;
};

// Fitted text transformers, trained on the training split only.
struct TextArtifacts {
    std::optional<Vocabulary> vocab;   // attention
    std::optional<TfidfModel> tfidf;   // tfidf
    std::unordered_set<std::string> stopwords = default_stopwords();
};

// Feed-forward (optionally encoder-fed) scalar log-risk model h(x).
struct NeuralSurvModel {
    ModelConfig cfg;
    ad::ParamStore params;
    std::size_t n_meas = 0;
    std::size_t text_dim = 0;
    TextArtifacts text;
    std::optional<BaselineHazard> baseline;  // survival mode, from training data
    std::vector<double> train_loss;          // per-epoch mean loss
};

// Trains on a preprocessed (imputed + standardized) dataset. Mortality mode
// minimizes BCE over shuffled minibatches; survival mode minimizes the
// within-batch PLL with each batch sorted by time. Deterministic given
// train.seed.
NeuralSurvModel fit_neural(const SurvivalDataset& dataset, const ModelConfig& cfg,
                           const TrainConfig& train, TextArtifacts text);

// Probability of death in mortality mode, log-risk in survival mode.
double predict(const NeuralSurvModel& model, const SurvivalRecord& record);
std::vector<double> predict_all(const NeuralSurvModel& model, const SurvivalDataset& dataset);

// Attention weights for one record (attention text features only).
AttentionDump attention_for_record(const NeuralSurvModel& model, const SurvivalRecord& record);

}  // namespace notesurv

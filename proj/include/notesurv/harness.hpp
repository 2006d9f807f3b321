#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "notesurv/metrics.hpp"
#include "notesurv/survival.hpp"

namespace notesurv {

enum class ModelKind { neural, cox };

// One experiment: task, model, text features, Table-style hyperparameters,
// split/CV settings and paths. Defaults mirror the survival profile.
struct ExperimentConfig {
    TaskMode task = TaskMode::survival;
    ModelKind model = ModelKind::neural;
    TextFeatures encoder = TextFeatures::none;

    std::size_t batch = 24;
    std::size_t seq_len = 512;
    std::size_t epochs = 4;
    double dropout = 0.1;
    double lr = 1e-2;
    ad::Activation activation = ad::Activation::selu;
    std::vector<std::size_t> hidden = {64, 64};

    std::size_t enc_layers = 2;
    std::size_t enc_heads = 4;
    std::size_t enc_d_model = 64;

    std::size_t vocab_max = 8000;
    double ridge = 0.0;
    double split_fraction = 0.7;
    std::size_t folds = 5;
    bool stratify = true;
    std::uint64_t seed = 0;

    std::string data_path;
    std::string stopwords_path;
    std::string out_dir = ".";

    static ExperimentConfig defaults_survival();
    static ExperimentConfig defaults_mortality();
    // key = value lines, '#' comments; `profile = defaults_survival|
    // defaults_mortality` loads a profile first, later keys override
    static ExperimentConfig from_file(const std::string& path);
    void set_key(const std::string& key, const std::string& value);

    void validate() const;
    std::string canonical() const;   // stable key=value dump
    std::string config_hash() const; // FNV-1a of canonical()
    ModelConfig model_config() const;
    TrainConfig train_config() const;
};

// Uniform random split, deterministic by seed; train size is exactly
// ceil(fraction * n). Stratified by event flag when requested (largest
// remainder allocation keeps the exact total).
std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& dataset,
                                                  double fraction, std::uint64_t seed,
                                                  bool stratify = true);

// k (train, validation) pairs; validation folds partition the dataset and
// sizes differ by at most one.
std::vector<std::pair<SurvivalDataset, SurvivalDataset>> kfold(const SurvivalDataset& dataset,
                                                               std::size_t k,
                                                               std::uint64_t seed,
                                                               bool stratify = true);

// Everything fitted on one training split.
struct FittedBundle {
    ExperimentConfig config;
    FeatureSchema schema;
    Imputer imputer;
    Standardizer standardizer;
    std::optional<NeuralSurvModel> neural;
    std::optional<CoxParams> cox;
    std::optional<BaselineHazard> cox_baseline;

    double risk_score(const SurvivalRecord& raw) const;  // preprocesses internally
};

FittedBundle fit_bundle(const ExperimentConfig& config, const SurvivalDataset& train);
EvalReport evaluate_bundle(const FittedBundle& bundle, const SurvivalDataset& test);

void save_checkpoint(const FittedBundle& bundle, const std::string& path);
FittedBundle load_checkpoint(const std::string& path);

struct CvReport {
    std::vector<EvalReport> folds;
    double mean_metric = 0.0;  // AUC (mortality) or C-index (survival)
    double std_metric = 0.0;
    // elementwise mean of fold confusion matrices (mortality)
    std::optional<std::array<double, 4>> mean_confusion;  // tn, fp, fn, tp

    std::string to_json_string() const;
};

CvReport cross_validate(const ExperimentConfig& config, const SurvivalDataset& dataset);

struct GridCell {
    std::map<std::string, std::string> overrides;
    std::optional<CvReport> report;  // empty when the cell failed
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t best = 0;  // index into cells
    ExperimentConfig best_config;

    std::string to_json_string() const;
};

// grid: parameter name -> candidate values, expanded in deterministic order;
// ties broken by first-in-grid order. Failing cells are recorded, not fatal.
GridResult grid_search(const ExperimentConfig& base,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
                       const SurvivalDataset& dataset);

// ingest -> preprocess (fit on train only) -> fit -> evaluate -> emit.
// Writes metrics.json, checkpoint.json, manifest.json and, task permitting,
// curves.csv and attention.json under config.out_dir.
struct PipelineResult {
    FittedBundle bundle;
    EvalReport report;
    std::vector<std::size_t> train_indices, test_indices;
    std::map<std::string, std::string> artifacts;  // name -> path
};

PipelineResult run_pipeline(const ExperimentConfig& config);

// curve CSV (`patient_id,time,survival,mortality,cum_hazard`) for every
// record in `data`, on the grid of baseline event times
void write_curves_csv(const FittedBundle& bundle, const SurvivalDataset& data,
                      const std::string& path);

}  // namespace notesurv

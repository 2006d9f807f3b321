// Command-line front end: simulate, preprocess, fit, evaluate, curves,
// attention, cv, grid. All outputs land under --out-dir with a manifest.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "notesurv/harness.hpp"

namespace fs = std::filesystem;
using namespace notesurv;

namespace {

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

// "sepsis=1.5,stable=-1.0"
std::map<std::string, double> parse_signal(const std::string& s) {
    std::map<std::string, double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--signal expects token=effect pairs");
        out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    }
    return out;
}

// "lr=0.01,0.04;dropout=0.1,0.2"
std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid(const std::string& s) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) {
        if (part.empty()) continue;
        auto eq = part.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--grid expects key=v1,v2;key2=v3,...");
        std::vector<std::string> values;
        std::stringstream vs(part.substr(eq + 1));
        std::string v;
        while (std::getline(vs, v, ','))
            if (!v.empty()) values.push_back(v);
        out.emplace_back(part.substr(0, eq), values);
    }
    return out;
}

ExperimentConfig load_config(const std::string& config_path, const std::string& data,
                             const std::string& out_dir, bool seed_set, std::uint64_t seed) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig() : ExperimentConfig::from_file(config_path);
    if (!data.empty()) cfg.data_path = data;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"survival analysis over clinical notes and measurements"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, checkpoint_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        cmd->add_option("--data", data_path, "dataset CSV");
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "RNG seed");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    std::size_t sim_n = 2000;
    std::string sim_beta = "1,-1,0";
    double sim_rate = 0.01, sim_horizon = 200.0, sim_missing = 0.0;
    std::string sim_signal = "sepsis=1.2,bleeding=0.8,stable=-1.0";
    std::string sim_out = "synthetic.csv", sim_truth;
    sim->add_option("--n", sim_n, "record count");
    sim->add_option("--beta", sim_beta, "true coefficients, comma separated");
    sim->add_option("--rate", sim_rate, "baseline hazard rate (1/hours)");
    sim->add_option("--horizon", sim_horizon, "censoring horizon (hours)");
    sim->add_option("--signal", sim_signal, "token=effect pairs");
    sim->add_option("--missing-rate", sim_missing, "fraction of cells knocked out");
    sim->add_option("--out", sim_out, "output CSV path");
    sim->add_option("--truth", sim_truth, "optional true log-risk CSV");
    sim->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "RNG seed");

    auto* pre = app.add_subcommand("preprocess", "fit and apply the preprocessing stack");
    add_common(pre);

    auto* fit = app.add_subcommand("fit", "run the full pipeline and save artifacts");
    add_common(fit);

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();

    auto* curves = app.add_subcommand("curves", "emit survival curves for a dataset");
    add_common(curves);
    curves->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();

    auto* attn = app.add_subcommand("attention", "dump attention weights for one record");
    add_common(attn);
    attn->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();
    std::size_t attn_index = 0;
    attn->add_option("--index", attn_index, "record index in the dataset");

    auto* cv = app.add_subcommand("cv", "k-fold cross validation");
    add_common(cv);

    auto* grid = app.add_subcommand("grid", "grid search over hyperparameters");
    add_common(grid);
    std::string grid_spec;
    grid->add_option("--grid", grid_spec, "key=v1,v2;key2=v3,... value lists")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            SimulationResult res = simulate(sim_n, parse_doubles(sim_beta), sim_rate,
                                            sim_horizon, parse_signal(sim_signal),
                                            seed_set ? seed : 0);
            if (sim_missing > 0.0)
                knock_out(res.data, sim_missing, Rng::mix(seed_set ? seed : 0, 99));
            save_dataset(res.data, sim_out);
            if (!sim_truth.empty()) {
                std::ostringstream ss;
                ss << "patient_id,true_log_risk\n";
                for (std::size_t i = 0; i < res.data.size(); ++i)
                    ss << res.data.records[i].patient_id << ',' << res.true_log_risk[i] << '\n';
                write_text(sim_truth, ss.str());
            }
            std::cout << "wrote " << res.data.size() << " records to " << sim_out << "\n";
        } else if (pre->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("preprocess: --data required");
            fs::create_directories(cfg.out_dir);
            FeatureSchema schema = read_schema(cfg.data_path);
            SurvivalDataset ds = load_dataset(cfg.data_path, schema);
            SurvivalDataset cohort = filter_missing(ds, 0.4);
            auto [imputer, imputed] = fit_impute(cohort, 10, Rng::mix(cfg.seed, 21));
            Standardizer st = fit_standardize(imputed);
            SurvivalDataset out = apply_standardize(st, imputed);
            save_dataset(out, (fs::path(cfg.out_dir) / "preprocessed.csv").string());

            auto stopwords = cfg.stopwords_path.empty() ? default_stopwords()
                                                        : load_stopwords(cfg.stopwords_path);
            std::vector<std::vector<std::string>> corpus;
            for (const auto& r : cohort.records)
                corpus.push_back(clean_text(r.note_text, stopwords));
            Vocabulary vocab = build_vocab(corpus, cfg.vocab_max);
            write_vocab_csv(vocab, (fs::path(cfg.out_dir) / "vocab.csv").string());

            nlohmann::json stats;
            stats["records_in"] = ds.size();
            stats["records_kept"] = cohort.size();
            stats["imputer"] = {{"column_mean", imputer.column_mean}};
            stats["standardizer"] = {{"mean", st.mean}, {"stddev", st.stddev}};
            stats["vocab_size"] = vocab.size();
            write_text((fs::path(cfg.out_dir) / "preprocess_stats.json").string(),
                       stats.dump(2));
            std::cout << "kept " << cohort.size() << "/" << ds.size() << " records\n";
        } else if (fit->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            PipelineResult res = run_pipeline(cfg);
            std::cout << "artifacts under " << cfg.out_dir << "\n";
            for (const auto& [name, path] : res.artifacts)
                std::cout << "  " << name << ": " << path << "\n";
        } else if (eval->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("evaluate: --data required");
            FittedBundle bundle = load_checkpoint(checkpoint_path);
            SurvivalDataset ds = load_dataset(cfg.data_path, bundle.schema);
            EvalReport report = evaluate_bundle(bundle, ds);
            fs::create_directories(cfg.out_dir);
            std::string path = (fs::path(cfg.out_dir) / "metrics.json").string();
            write_text(path, report.to_json_string());
            std::cout << "wrote " << path << "\n";
        } else if (curves->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("curves: --data required");
            FittedBundle bundle = load_checkpoint(checkpoint_path);
            SurvivalDataset ds = load_dataset(cfg.data_path, bundle.schema);
            fs::create_directories(cfg.out_dir);
            std::string path = (fs::path(cfg.out_dir) / "curves.csv").string();
            write_curves_csv(bundle, ds, path);
            std::cout << "wrote " << path << "\n";
        } else if (attn->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("attention: --data required");
            FittedBundle bundle = load_checkpoint(checkpoint_path);
            if (!bundle.neural || bundle.neural->cfg.text != TextFeatures::attention)
                throw std::runtime_error("attention: checkpoint has no attention encoder");
            SurvivalDataset ds = load_dataset(cfg.data_path, bundle.schema);
            if (attn_index >= ds.size()) throw std::runtime_error("attention: index out of range");
            SurvivalDataset one;
            one.schema = ds.schema;
            one.records.push_back(ds.records[attn_index]);
            SurvivalDataset processed =
                apply_standardize(bundle.standardizer, apply_impute(bundle.imputer, one));
            AttentionDump dump = attention_for_record(*bundle.neural, processed.records[0]);
            fs::create_directories(cfg.out_dir);
            std::string path = (fs::path(cfg.out_dir) / "attention.json").string();
            dump_attention(dump, path);
            std::cout << "wrote " << path << "\n";
        } else if (cv->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("cv: --data required");
            FeatureSchema schema = read_schema(cfg.data_path);
            SurvivalDataset ds = filter_missing(load_dataset(cfg.data_path, schema), 0.4);
            CvReport report = cross_validate(cfg, ds);
            fs::create_directories(cfg.out_dir);
            std::string path = (fs::path(cfg.out_dir) / "cv_report.json").string();
            write_text(path, report.to_json_string());
            std::cout << "mean metric " << report.mean_metric << " (std "
                      << report.std_metric << "), report at " << path << "\n";
        } else if (grid->parsed()) {
            ExperimentConfig cfg = load_config(config_path, data_path, out_dir, seed_set, seed);
            if (cfg.data_path.empty()) throw std::runtime_error("grid: --data required");
            FeatureSchema schema = read_schema(cfg.data_path);
            SurvivalDataset ds = filter_missing(load_dataset(cfg.data_path, schema), 0.4);
            GridResult result = grid_search(cfg, parse_grid(grid_spec), ds);
            fs::create_directories(cfg.out_dir);
            std::string path = (fs::path(cfg.out_dir) / "grid_report.json").string();
            write_text(path, result.to_json_string());
            std::string best = (fs::path(cfg.out_dir) / "best_config.txt").string();
            write_text(best, result.best_config.canonical());
            std::cout << "best cell " << result.best << ", report at " << path << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

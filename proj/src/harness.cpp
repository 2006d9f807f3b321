#include "notesurv/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace notesurv {

namespace {

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_survival() {
    ExperimentConfig c;
    c.task = TaskMode::survival;
    c.batch = 24;
    c.seq_len = 512;
    c.epochs = 4;
    c.dropout = 0.1;
    c.lr = 1e-2;
    c.activation = ad::Activation::selu;
    return c;
}

ExperimentConfig ExperimentConfig::defaults_mortality() {
    ExperimentConfig c;
    c.task = TaskMode::mortality;
    c.batch = 16;
    c.seq_len = 512;
    c.epochs = 4;
    c.dropout = 0.1;
    c.lr = 4e-2;
    c.activation = ad::Activation::relu;
    return c;
}

void ExperimentConfig::set_key(const std::string& key, const std::string& value) {
    if (key == "profile") {
        std::string keep_data = data_path, keep_stop = stopwords_path, keep_out = out_dir;
        if (value == "defaults_survival")
            *this = defaults_survival();
        else if (value == "defaults_mortality")
            *this = defaults_mortality();
        else
            throw std::invalid_argument("config: unknown profile " + value);
        data_path = keep_data;
        stopwords_path = keep_stop;
        out_dir = keep_out;
    } else if (key == "task") {
        task = task_from_string(value);
    } else if (key == "model") {
        if (value == "neural")
            model = ModelKind::neural;
        else if (value == "cox")
            model = ModelKind::cox;
        else
            throw std::invalid_argument("config: unknown model " + value);
    } else if (key == "encoder") {
        encoder = text_features_from_string(value);
    } else if (key == "batch") {
        batch = std::stoull(value);
    } else if (key == "seq_len") {
        seq_len = std::stoull(value);
    } else if (key == "epochs") {
        epochs = std::stoull(value);
    } else if (key == "dropout") {
        dropout = std::stod(value);
    } else if (key == "lr") {
        lr = std::stod(value);
    } else if (key == "activation") {
        activation = ad::activation_from_string(value);
    } else if (key == "hidden") {
        hidden = parse_sizes(value);
    } else if (key == "enc_layers") {
        enc_layers = std::stoull(value);
    } else if (key == "enc_heads") {
        enc_heads = std::stoull(value);
    } else if (key == "enc_d_model") {
        enc_d_model = std::stoull(value);
    } else if (key == "vocab_max") {
        vocab_max = std::stoull(value);
    } else if (key == "ridge") {
        ridge = std::stod(value);
    } else if (key == "split_fraction") {
        split_fraction = std::stod(value);
    } else if (key == "folds") {
        folds = std::stoull(value);
    } else if (key == "stratify") {
        stratify = value == "1" || value == "true" || value == "on";
    } else if (key == "seed") {
        seed = std::stoull(value);
    } else if (key == "data") {
        data_path = value;
    } else if (key == "stopwords") {
        stopwords_path = value;
    } else if (key == "out_dir") {
        out_dir = value;
    } else {
        throw std::invalid_argument("config: unknown key " + key);
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not key = value");
        c.set_key(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return c;
}

void ExperimentConfig::validate() const {
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("config: dropout must be in [0,1)");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw std::invalid_argument("config: split_fraction must be in (0,1)");
    if (batch == 0) throw std::invalid_argument("config: batch must be >= 1");
    if (seq_len < 2) throw std::invalid_argument("config: seq_len must be >= 2");
    if (encoder == TextFeatures::attention && enc_d_model % enc_heads != 0)
        throw std::invalid_argument("config: enc_d_model must divide evenly by enc_heads");
    if (model == ModelKind::cox && task != TaskMode::survival)
        throw std::invalid_argument("config: the cox model supports the survival task only");
    if (model == ModelKind::cox && encoder != TextFeatures::none)
        throw std::invalid_argument("config: the cox model takes measurements only");
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream ss;
    ss << "task = " << to_string(task) << '\n';
    ss << "model = " << (model == ModelKind::neural ? "neural" : "cox") << '\n';
    ss << "encoder = " << to_string(encoder) << '\n';
    ss << "batch = " << batch << '\n';
    ss << "seq_len = " << seq_len << '\n';
    ss << "epochs = " << epochs << '\n';
    ss << "dropout = " << format_double(dropout) << '\n';
    ss << "lr = " << format_double(lr) << '\n';
    ss << "activation = " << ad::to_string(activation) << '\n';
    ss << "hidden = " << join_sizes(hidden) << '\n';
    ss << "enc_layers = " << enc_layers << '\n';
    ss << "enc_heads = " << enc_heads << '\n';
    ss << "enc_d_model = " << enc_d_model << '\n';
    ss << "vocab_max = " << vocab_max << '\n';
    ss << "ridge = " << format_double(ridge) << '\n';
    ss << "split_fraction = " << format_double(split_fraction) << '\n';
    ss << "folds = " << folds << '\n';
    ss << "stratify = " << (stratify ? "1" : "0") << '\n';
    ss << "seed = " << seed << '\n';
    ss << "data = " << data_path << '\n';
    ss << "stopwords = " << stopwords_path << '\n';
    ss << "out_dir = " << out_dir << '\n';
    return ss.str();
}

std::string ExperimentConfig::config_hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ModelConfig ExperimentConfig::model_config() const {
    ModelConfig m;
    m.mode = task;
    m.text = encoder;
    m.hidden = hidden;
    m.act = activation;
    m.dropout = dropout;
    m.encoder.layers = enc_layers;
    m.encoder.heads = enc_heads;
    m.encoder.d_model = enc_d_model;
    m.encoder.max_len = seq_len;
    m.encoder.dropout = dropout;
    m.encoder.act = activation;
    return m;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.batch = batch;
    t.epochs = epochs;
    t.lr = lr;
    t.seed = Rng::mix(seed, 31);
    return t;
}

namespace {

// stratified index split with the exact ceil(fraction * n) training size
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const SurvivalDataset& ds, double fraction, std::uint64_t seed, bool stratify) {
    const std::size_t n = ds.size();
    if (n < 2) throw std::invalid_argument("split: need at least two records");
    Rng rng(seed);

    std::vector<std::vector<std::size_t>> strata;
    if (stratify) {
        strata.resize(2);
        for (std::size_t i = 0; i < n; ++i) strata[ds.records[i].event].push_back(i);
        if (strata[0].empty() || strata[1].empty()) {
            strata.erase(std::remove_if(strata.begin(), strata.end(),
                                        [](const auto& s) { return s.empty(); }),
                         strata.end());
        }
    } else {
        strata.emplace_back(n);
        std::iota(strata[0].begin(), strata[0].end(), 0);
    }
    for (auto& s : strata) rng.shuffle(s);

    const std::size_t total_train =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    // floor per stratum, then largest remainders take the leftover
    std::vector<std::size_t> take(strata.size());
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        double want = fraction * static_cast<double>(strata[s].size());
        take[s] = static_cast<std::size_t>(std::floor(want));
        take[s] = std::min(take[s], strata[s].size());
        assigned += take[s];
        rema.emplace_back(want - std::floor(want), s);
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::size_t left = total_train > assigned ? total_train - assigned : 0;
    for (const auto& [frac, s] : rema) {
        if (left == 0) break;
        if (take[s] < strata[s].size()) {
            ++take[s];
            --left;
        }
    }

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        for (std::size_t i = 0; i < strata[s].size(); ++i)
            (i < take[s] ? train_idx : test_idx).push_back(strata[s][i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    if (train_idx.empty() || test_idx.empty())
        throw std::runtime_error("split: a side came out empty; adjust fraction");
    return {train_idx, test_idx};
}

SurvivalDataset subset(const SurvivalDataset& ds, const std::vector<std::size_t>& idx) {
    SurvivalDataset out;
    out.schema = ds.schema;
    for (std::size_t i : idx) out.records.push_back(ds.records[i]);
    return out;
}

}  // namespace

std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& dataset,
                                                  double fraction, std::uint64_t seed,
                                                  bool stratify) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split: fraction must be in (0,1)");
    auto [train_idx, test_idx] = split_indices(dataset, fraction, seed, stratify);
    return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

std::vector<std::pair<SurvivalDataset, SurvivalDataset>> kfold(const SurvivalDataset& dataset,
                                                               std::size_t k,
                                                               std::uint64_t seed,
                                                               bool stratify) {
    const std::size_t n = dataset.size();
    if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
    if (k > n) throw std::invalid_argument("kfold: k exceeds the record count");
    Rng rng(seed);

    // stratified ordering, then deal positions round-robin so validation
    // fold sizes differ by at most one
    std::vector<std::size_t> ordering;
    if (stratify) {
        for (int cls = 0; cls <= 1; ++cls) {
            std::vector<std::size_t> s;
            for (std::size_t i = 0; i < n; ++i)
                if (dataset.records[i].event == cls) s.push_back(i);
            rng.shuffle(s);
            ordering.insert(ordering.end(), s.begin(), s.end());
        }
    } else {
        ordering.resize(n);
        std::iota(ordering.begin(), ordering.end(), 0);
        rng.shuffle(ordering);
    }

    std::vector<std::vector<std::size_t>> val_idx(k);
    for (std::size_t p = 0; p < n; ++p) val_idx[p % k].push_back(ordering[p]);

    std::vector<std::pair<SurvivalDataset, SurvivalDataset>> out;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> vi = val_idx[f];
        std::sort(vi.begin(), vi.end());
        std::vector<std::uint8_t> in_val(n, 0);
        for (std::size_t i : vi) in_val[i] = 1;
        std::vector<std::size_t> ti;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_val[i]) ti.push_back(i);
        out.emplace_back(subset(dataset, ti), subset(dataset, vi));
    }
    return out;
}

double FittedBundle::risk_score(const SurvivalRecord& raw) const {
    SurvivalDataset one;
    one.schema = schema;
    one.records.push_back(raw);
    SurvivalDataset processed = apply_standardize(standardizer, apply_impute(imputer, one));
    if (neural) return predict(*neural, processed.records[0]);
    return cox->linear_predictor(processed.records[0]);
}

FittedBundle fit_bundle(const ExperimentConfig& config, const SurvivalDataset& train) {
    config.validate();
    FittedBundle b;
    b.config = config;
    b.schema = train.schema;

    auto [imputer, train_imp] = fit_impute(train, 10, Rng::mix(config.seed, 21));
    b.imputer = std::move(imputer);
    b.standardizer = fit_standardize(train_imp);
    SurvivalDataset train_std = apply_standardize(b.standardizer, train_imp);

    if (config.model == ModelKind::cox) {
        b.cox = fit_cox(train_std, config.ridge);
        std::vector<double> risks, times, events;
        for (const auto& r : train_std.records) {
            risks.push_back(b.cox->linear_predictor(r));
            times.push_back(r.event_time);
            events.push_back(static_cast<double>(r.event));
        }
        b.cox_baseline = breslow(times, events, risks);
        return b;
    }

    TextArtifacts text;
    text.stopwords = config.stopwords_path.empty() ? default_stopwords()
                                                   : load_stopwords(config.stopwords_path);
    if (config.encoder != TextFeatures::none) {
        std::vector<std::vector<std::string>> corpus;
        for (const auto& r : train.records)
            corpus.push_back(clean_text(r.note_text, text.stopwords));
        if (config.encoder == TextFeatures::tfidf)
            text.tfidf = fit_tfidf(corpus);
        else
            text.vocab = build_vocab(corpus, config.vocab_max);
    }
    b.neural = fit_neural(train_std, config.model_config(), config.train_config(),
                          std::move(text));
    return b;
}

EvalReport evaluate_bundle(const FittedBundle& bundle, const SurvivalDataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    SurvivalDataset processed =
        apply_standardize(bundle.standardizer, apply_impute(bundle.imputer, test));

    std::vector<double> labels, times, events;
    for (const auto& r : test.records) {
        labels.push_back(static_cast<double>(r.event));
        times.push_back(r.event_time);
        events.push_back(static_cast<double>(r.event));
    }

    EvalReport report;
    if (bundle.config.task == TaskMode::mortality) {
        std::vector<double> probs = predict_all(*bundle.neural, processed);
        RocCurve roc = roc_auc(probs, labels);
        report.auc = roc.auc;
        report.roc_points = roc.points;
        report.conf = confusion(probs, labels, 0.5);
        report.train_loss = bundle.neural->train_loss;
    } else {
        std::vector<double> risks;
        if (bundle.neural) {
            risks = predict_all(*bundle.neural, processed);
            report.train_loss = bundle.neural->train_loss;
        } else {
            for (const auto& r : processed.records) risks.push_back(bundle.cox->linear_predictor(r));
        }
        report.cindex = c_index(risks, times, events);
    }
    return report;
}

namespace {

nlohmann::json schema_to_json(const FeatureSchema& s) {
    nlohmann::json names = s.names;
    nlohmann::json groups = nlohmann::json::array();
    for (auto g : s.group) groups.push_back(g == FeatureGroup::endogenous ? "endo" : "exo");
    return {{"names", names}, {"groups", groups}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema s;
    s.names = j.at("names").get<std::vector<std::string>>();
    for (const auto& g : j.at("groups"))
        s.group.push_back(g.get<std::string>() == "endo" ? FeatureGroup::endogenous
                                                         : FeatureGroup::exogenous);
    s.validate();
    return s;
}

nlohmann::json baseline_to_json(const BaselineHazard& b) {
    return {{"times", b.times}, {"cumhaz", b.cumhaz}};
}

BaselineHazard baseline_from_json(const nlohmann::json& j) {
    BaselineHazard b;
    b.times = j.at("times").get<std::vector<double>>();
    b.cumhaz = j.at("cumhaz").get<std::vector<double>>();
    return b;
}

nlohmann::json vocab_to_json(const Vocabulary& v) {
    return nlohmann::json(v.tokens());
}

Vocabulary vocab_from_json(const nlohmann::json& j) {
    Vocabulary v;
    auto tokens = j.get<std::vector<std::string>>();
    for (std::size_t i = 4; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
}

}  // namespace

void save_checkpoint(const FittedBundle& bundle, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = bundle.config.canonical();
    j["config_hash"] = bundle.config.config_hash();
    j["schema"] = schema_to_json(bundle.schema);
    j["imputer"] = {{"column_mean", bundle.imputer.column_mean},
                    {"coef", bundle.imputer.coef},
                    {"iterations", bundle.imputer.iterations},
                    {"seed", bundle.imputer.seed}};
    std::vector<int> cflags(bundle.standardizer.constant_flag.begin(),
                            bundle.standardizer.constant_flag.end());
    j["standardizer"] = {{"mean", bundle.standardizer.mean},
                         {"stddev", bundle.standardizer.stddev},
                         {"constant", cflags}};
    if (bundle.neural) {
        const NeuralSurvModel& m = *bundle.neural;
        nlohmann::json n;
        n["mode"] = to_string(m.cfg.mode);
        n["text"] = to_string(m.cfg.text);
        n["hidden"] = m.cfg.hidden;
        n["activation"] = ad::to_string(m.cfg.act);
        n["dropout"] = m.cfg.dropout;
        n["encoder"] = {{"layers", m.cfg.encoder.layers},
                        {"heads", m.cfg.encoder.heads},
                        {"d_model", m.cfg.encoder.d_model},
                        {"max_len", m.cfg.encoder.max_len},
                        {"dropout", m.cfg.encoder.dropout},
                        {"activation", ad::to_string(m.cfg.encoder.act)}};
        n["n_meas"] = m.n_meas;
        n["text_dim"] = m.text_dim;
        n["train_loss"] = m.train_loss;
        n["params"] = nlohmann::json::parse(ad::params_to_json_string(m.params));
        if (m.baseline) n["baseline"] = baseline_to_json(*m.baseline);
        if (m.text.vocab) n["vocab"] = vocab_to_json(*m.text.vocab);
        if (m.text.tfidf)
            n["tfidf"] = {{"vocab", vocab_to_json(m.text.tfidf->vocab)},
                          {"doc_freq", m.text.tfidf->doc_freq},
                          {"n_docs", m.text.tfidf->n_docs}};
        std::vector<std::string> stop(m.text.stopwords.begin(), m.text.stopwords.end());
        std::sort(stop.begin(), stop.end());
        n["stopwords"] = stop;
        j["neural"] = n;
    }
    if (bundle.cox) {
        j["cox"] = {{"beta", bundle.cox->beta},
                    {"baseline", baseline_to_json(*bundle.cox_baseline)}};
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

FittedBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("load_checkpoint: unsupported format version");

    FittedBundle b;
    {
        std::istringstream cfg(j.at("config").get<std::string>());
        std::string line;
        while (std::getline(cfg, line)) {
            std::string t = trim(line);
            if (t.empty()) continue;
            std::size_t eq = t.find('=');
            b.config.set_key(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
    }
    b.schema = schema_from_json(j.at("schema"));
    b.imputer.column_mean = j.at("imputer").at("column_mean").get<std::vector<double>>();
    b.imputer.coef = j.at("imputer").at("coef").get<std::vector<std::vector<double>>>();
    b.imputer.iterations = j.at("imputer").at("iterations").get<std::size_t>();
    b.imputer.seed = j.at("imputer").at("seed").get<std::uint64_t>();
    b.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    b.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    for (int f : j.at("standardizer").at("constant").get<std::vector<int>>())
        b.standardizer.constant_flag.push_back(static_cast<std::uint8_t>(f));

    if (j.contains("neural")) {
        const auto& n = j.at("neural");
        NeuralSurvModel m;
        m.cfg.mode = task_from_string(n.at("mode").get<std::string>());
        m.cfg.text = text_features_from_string(n.at("text").get<std::string>());
        m.cfg.hidden = n.at("hidden").get<std::vector<std::size_t>>();
        m.cfg.act = ad::activation_from_string(n.at("activation").get<std::string>());
        m.cfg.dropout = n.at("dropout").get<double>();
        const auto& e = n.at("encoder");
        m.cfg.encoder.layers = e.at("layers").get<std::size_t>();
        m.cfg.encoder.heads = e.at("heads").get<std::size_t>();
        m.cfg.encoder.d_model = e.at("d_model").get<std::size_t>();
        m.cfg.encoder.max_len = e.at("max_len").get<std::size_t>();
        m.cfg.encoder.dropout = e.at("dropout").get<double>();
        m.cfg.encoder.act = ad::activation_from_string(e.at("activation").get<std::string>());
        m.n_meas = n.at("n_meas").get<std::size_t>();
        m.text_dim = n.at("text_dim").get<std::size_t>();
        m.train_loss = n.at("train_loss").get<std::vector<double>>();
        m.params = ad::params_from_json_string(n.at("params").dump());
        if (n.contains("baseline")) m.baseline = baseline_from_json(n.at("baseline"));
        if (n.contains("vocab")) m.text.vocab = vocab_from_json(n.at("vocab"));
        if (n.contains("tfidf")) {
            TfidfModel tf;
            tf.vocab = vocab_from_json(n.at("tfidf").at("vocab"));
            tf.doc_freq = n.at("tfidf").at("doc_freq").get<std::vector<double>>();
            tf.n_docs = n.at("tfidf").at("n_docs").get<std::size_t>();
            m.text.tfidf = std::move(tf);
        }
        m.text.stopwords.clear();
        for (const auto& s : n.at("stopwords")) m.text.stopwords.insert(s.get<std::string>());
        b.neural = std::move(m);
    }
    if (j.contains("cox")) {
        CoxParams cox;
        cox.beta = j.at("cox").at("beta").get<std::vector<double>>();
        cox.schema = b.schema;
        b.cox = std::move(cox);
        b.cox_baseline = baseline_from_json(j.at("cox").at("baseline"));
    }
    return b;
}

std::string CvReport::to_json_string() const {
    nlohmann::json j;
    nlohmann::json fold_list = nlohmann::json::array();
    for (const auto& f : folds) fold_list.push_back(nlohmann::json::parse(f.to_json_string()));
    j["folds"] = fold_list;
    j["mean_metric"] = mean_metric;
    j["std_metric"] = std_metric;
    if (mean_confusion) {
        j["mean_confusion"] = {{"tn", (*mean_confusion)[0]},
                               {"fp", (*mean_confusion)[1]},
                               {"fn", (*mean_confusion)[2]},
                               {"tp", (*mean_confusion)[3]}};
    } else {
        j["mean_confusion"] = nullptr;
    }
    return j.dump(2);
}

CvReport cross_validate(const ExperimentConfig& config, const SurvivalDataset& dataset) {
    config.validate();
    auto folds = kfold(dataset, config.folds, Rng::mix(config.seed, 77), config.stratify);
    CvReport report;
    std::vector<double> metrics;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        ExperimentConfig fold_cfg = config;
        fold_cfg.seed = Rng::mix(config.seed, 1000 + f);
        FittedBundle bundle = fit_bundle(fold_cfg, folds[f].first);
        EvalReport er = evaluate_bundle(bundle, folds[f].second);
        metrics.push_back(config.task == TaskMode::mortality ? *er.auc : *er.cindex);
        report.folds.push_back(std::move(er));
    }
    double mean = 0.0;
    for (double m : metrics) mean += m;
    mean /= static_cast<double>(metrics.size());
    double var = 0.0;
    for (double m : metrics) var += (m - mean) * (m - mean);
    report.mean_metric = mean;
    report.std_metric = std::sqrt(var / static_cast<double>(metrics.size()));
    if (config.task == TaskMode::mortality) {
        std::array<double, 4> acc{0, 0, 0, 0};
        for (const auto& f : report.folds) {
            acc[0] += static_cast<double>(f.conf->tn);
            acc[1] += static_cast<double>(f.conf->fp);
            acc[2] += static_cast<double>(f.conf->fn);
            acc[3] += static_cast<double>(f.conf->tp);
        }
        for (double& x : acc) x /= static_cast<double>(report.folds.size());
        report.mean_confusion = acc;
    }
    return report;
}

std::string GridResult::to_json_string() const {
    nlohmann::json j;
    nlohmann::json cell_list = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json jc;
        jc["overrides"] = c.overrides;
        if (c.report) {
            jc["mean_metric"] = c.report->mean_metric;
            jc["std_metric"] = c.report->std_metric;
            jc["report"] = nlohmann::json::parse(c.report->to_json_string());
        } else {
            jc["error"] = c.error;
        }
        cell_list.push_back(jc);
    }
    j["cells"] = cell_list;
    j["best"] = best;
    j["best_config"] = best_config.canonical();
    return j.dump(2);
}

GridResult grid_search(const ExperimentConfig& base,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
                       const SurvivalDataset& dataset) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    for (const auto& [key, values] : grid)
        if (values.empty())
            throw std::invalid_argument("grid_search: no values for " + key);

    // Cartesian product in declaration order
    std::vector<std::map<std::string, std::string>> cells(1);
    for (const auto& [key, values] : grid) {
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& cell : cells)
            for (const auto& v : values) {
                auto c = cell;
                c[key] = v;
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }

    GridResult result;
    bool have_best = false;
    double best_metric = 0.0;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        GridCell cell;
        cell.overrides = cells[ci];
        ExperimentConfig cfg = base;
        try {
            for (const auto& [k, v] : cells[ci]) cfg.set_key(k, v);
            cfg.seed = Rng::mix(base.seed, 5000 + ci);
            cell.report = cross_validate(cfg, dataset);
            if (!have_best || cell.report->mean_metric > best_metric) {
                have_best = true;
                best_metric = cell.report->mean_metric;
                result.best = result.cells.size();
                result.best_config = cfg;
            }
        } catch (const std::exception& e) {
            cell.report.reset();
            cell.error = e.what();
        }
        result.cells.push_back(std::move(cell));
    }
    if (!have_best) throw std::runtime_error("grid_search: every grid cell failed");
    return result;
}

void write_curves_csv(const FittedBundle& bundle, const SurvivalDataset& data,
                      const std::string& path) {
    if (bundle.config.task != TaskMode::survival)
        throw std::invalid_argument("curves require a survival-task model");
    const BaselineHazard& base =
        bundle.neural ? *bundle.neural->baseline : *bundle.cox_baseline;
    SurvivalDataset processed =
        apply_standardize(bundle.standardizer, apply_impute(bundle.imputer, data));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_curves_csv: cannot open " + path);
    out << "patient_id,time,survival,mortality,cum_hazard\n";
    for (std::size_t i = 0; i < processed.size(); ++i) {
        double risk = bundle.neural ? predict(*bundle.neural, processed.records[i])
                                    : bundle.cox->linear_predictor(processed.records[i]);
        SurvivalCurve curve = survival_curve(base, risk, base.times);
        for (std::size_t t = 0; t < curve.times.size(); ++t) {
            out << data.records[i].patient_id << ',' << format_double(curve.times[t]) << ','
                << format_double(curve.survival[t]) << ','
                << format_double(curve.mortality[t]) << ','
                << format_double(curve.cum_hazard[t]) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_curves_csv: write failed for " + path);
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
    config.validate();
    if (config.data_path.empty()) throw std::invalid_argument("pipeline: data path not set");

    FeatureSchema schema = read_schema(config.data_path);
    SurvivalDataset raw = load_dataset(config.data_path, schema);
    SurvivalDataset cohort = filter_missing(raw, 0.4);

    PipelineResult result;
    auto [train_idx, test_idx] =
        split_indices(cohort, config.split_fraction, Rng::mix(config.seed, 11), config.stratify);
    result.train_indices = train_idx;
    result.test_indices = test_idx;
    SurvivalDataset train = subset(cohort, train_idx);
    SurvivalDataset test = subset(cohort, test_idx);

    result.bundle = fit_bundle(config, train);
    result.report = evaluate_bundle(result.bundle, test);

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    auto out_path = [&](const std::string& name) {
        return (fs::path(config.out_dir) / name).string();
    };

    {
        std::ofstream mj(out_path("metrics.json"), std::ios::binary);
        if (!mj) throw std::runtime_error("pipeline: cannot write metrics.json");
        mj << result.report.to_json_string() << '\n';
        result.artifacts["metrics"] = out_path("metrics.json");
    }
    save_checkpoint(result.bundle, out_path("checkpoint.json"));
    result.artifacts["checkpoint"] = out_path("checkpoint.json");

    if (config.task == TaskMode::survival) {
        write_curves_csv(result.bundle, test, out_path("curves.csv"));
        result.artifacts["curves"] = out_path("curves.csv");
    }
    if (config.encoder == TextFeatures::attention && !test.records.empty()) {
        AttentionDump dump =
            attention_for_record(*result.bundle.neural, test.records.front());
        dump_attention(dump, out_path("attention.json"));
        result.artifacts["attention"] = out_path("attention.json");
    }

    nlohmann::json manifest;
    manifest["config_hash"] = config.config_hash();
    manifest["artifacts"] = result.artifacts;
    std::ofstream mf(out_path("manifest.json"), std::ios::binary);
    if (!mf) throw std::runtime_error("pipeline: cannot write manifest.json");
    mf << manifest.dump(2) << '\n';
    result.artifacts["manifest"] = out_path("manifest.json");

    return result;
}

}  // namespace notesurv

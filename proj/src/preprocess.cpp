#include "notesurv/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "notesurv/kernels.hpp"

namespace notesurv {

SurvivalDataset filter_missing(const SurvivalDataset& dataset, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("filter_missing: threshold must be in [0,1]");
    SurvivalDataset out;
    out.schema = dataset.schema;
    const double k = static_cast<double>(dataset.schema.size());
    for (const auto& r : dataset.records) {
        double frac = k > 0 ? static_cast<double>(r.missing_count()) / k : 0.0;
        if (frac > threshold) continue;  // strictly greater is removed
        out.records.push_back(r);
    }
    if (out.records.empty())
        throw std::runtime_error("filter_missing: no records left below threshold");
    return out;
}

namespace {

// dense value matrix + observed mask from a dataset
struct Matrixed {
    std::size_t n = 0, k = 0;
    std::vector<double> x;             // n x k
    std::vector<std::uint8_t> obs;     // n x k
};

Matrixed to_matrix(const SurvivalDataset& ds) {
    Matrixed m;
    m.n = ds.size();
    m.k = ds.schema.size();
    m.x.resize(m.n * m.k);
    m.obs.resize(m.n * m.k);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t f = 0; f < m.k; ++f) {
            m.x[i * m.k + f] = ds.records[i].measurements[f];
            m.obs[i * m.k + f] = ds.records[i].observed[f];
        }
    return m;
}

// least squares of column f on all other columns (with intercept) over the
// rows where f is observed; returns empty on degenerate systems
std::vector<double> regress_feature(const Matrixed& m, std::size_t f) {
    const std::size_t p = m.k;  // intercept + (k-1) predictors
    std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
    std::size_t rows = 0;
    double tmin = 0.0, tmax = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        if (!m.obs[i * m.k + f]) continue;
        double target = m.x[i * m.k + f];
        if (rows == 0) tmin = tmax = target;
        tmin = std::min(tmin, target);
        tmax = std::max(tmax, target);
        ++rows;
        std::vector<double> row(p);
        row[0] = 1.0;
        std::size_t c = 1;
        for (std::size_t g = 0; g < m.k; ++g) {
            if (g == f) continue;
            row[c++] = m.x[i * m.k + g];
        }
        for (std::size_t a = 0; a < p; ++a) {
            xty[a] += row[a] * target;
            for (std::size_t b = 0; b < p; ++b) xtx[a * p + b] += row[a] * row[b];
        }
    }
    if (rows < p || tmin == tmax) return {};  // fall back to the column mean
    std::vector<double> beta = xty;
    if (!kern::solve_linear(xtx, beta, p)) return {};
    return beta;
}

double predict_feature(const std::vector<double>& coef, const double* row, std::size_t k,
                       std::size_t f) {
    double y = coef[0];
    std::size_t c = 1;
    for (std::size_t g = 0; g < k; ++g) {
        if (g == f) continue;
        y += coef[c++] * row[g];
    }
    return y;
}

SurvivalDataset from_matrix(const SurvivalDataset& ds, const Matrixed& m) {
    SurvivalDataset out = ds;
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t f = 0; f < m.k; ++f) {
            out.records[i].measurements[f] = m.x[i * m.k + f];
            out.records[i].observed[f] = 1;
        }
    }
    return out;
}

}  // namespace

std::pair<Imputer, SurvivalDataset> fit_impute(const SurvivalDataset& dataset,
                                               std::size_t iterations, std::uint64_t seed) {
    const std::size_t k = dataset.schema.size();
    Matrixed m = to_matrix(dataset);

    Imputer imp;
    imp.iterations = iterations;
    imp.seed = seed;
    imp.column_mean.assign(k, 0.0);
    imp.coef.assign(k, {});

    std::vector<bool> has_missing(k, false);
    for (std::size_t f = 0; f < k; ++f) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < m.n; ++i) {
            if (m.obs[i * k + f]) {
                sum += m.x[i * k + f];
                ++cnt;
            } else {
                has_missing[f] = true;
            }
        }
        if (cnt == 0)
            throw std::runtime_error("fit_impute: feature '" + dataset.schema.names[f] +
                                     "' has no observed values");
        imp.column_mean[f] = sum / static_cast<double>(cnt);
    }

    // initialize missing cells to column means
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t f = 0; f < k; ++f)
            if (!m.obs[i * k + f]) m.x[i * k + f] = imp.column_mean[f];

    for (std::size_t sweep = 0; sweep < iterations; ++sweep) {
        for (std::size_t f = 0; f < k; ++f) {  // schema-order visiting
            if (!has_missing[f]) continue;
            std::vector<double> beta = regress_feature(m, f);
            imp.coef[f] = beta;
            for (std::size_t i = 0; i < m.n; ++i) {
                if (m.obs[i * k + f]) continue;
                m.x[i * k + f] = beta.empty()
                                     ? imp.column_mean[f]
                                     : predict_feature(beta, &m.x[i * k], k, f);
            }
        }
    }
    return {std::move(imp), from_matrix(dataset, m)};
}

SurvivalDataset apply_impute(const Imputer& imputer, const SurvivalDataset& dataset) {
    const std::size_t k = dataset.schema.size();
    if (imputer.column_mean.size() != k)
        throw std::invalid_argument("apply_impute: imputer does not match schema");
    Matrixed m = to_matrix(dataset);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t f = 0; f < k; ++f)
            if (!m.obs[i * k + f]) m.x[i * k + f] = imputer.column_mean[f];
    for (std::size_t sweep = 0; sweep < imputer.iterations; ++sweep) {
        for (std::size_t f = 0; f < k; ++f) {
            const auto& beta = imputer.coef[f];
            for (std::size_t i = 0; i < m.n; ++i) {
                if (m.obs[i * k + f]) continue;
                m.x[i * k + f] = beta.empty()
                                     ? imputer.column_mean[f]
                                     : predict_feature(beta, &m.x[i * k], k, f);
            }
        }
    }
    return from_matrix(dataset, m);
}

Standardizer fit_standardize(const SurvivalDataset& dataset) {
    const std::size_t k = dataset.schema.size();
    const std::size_t n = dataset.size();
    if (n == 0) throw std::invalid_argument("fit_standardize: empty dataset");
    Standardizer st;
    st.mean.assign(k, 0.0);
    st.stddev.assign(k, 1.0);
    st.constant_flag.assign(k, 0);
    for (const auto& r : dataset.records)
        for (std::size_t f = 0; f < k; ++f) {
            if (!r.observed[f])
                throw std::runtime_error("fit_standardize: missing cells present; impute first");
            st.mean[f] += r.measurements[f];
        }
    for (std::size_t f = 0; f < k; ++f) st.mean[f] /= static_cast<double>(n);
    std::vector<double> ss(k, 0.0);
    for (const auto& r : dataset.records)
        for (std::size_t f = 0; f < k; ++f) {
            double d = r.measurements[f] - st.mean[f];
            ss[f] += d * d;
        }
    for (std::size_t f = 0; f < k; ++f) {
        double var = ss[f] / static_cast<double>(n);  // population variance
        if (var > 0.0) {
            st.stddev[f] = std::sqrt(var);
        } else {
            st.stddev[f] = 1.0;
            st.constant_flag[f] = 1;
        }
    }
    return st;
}

SurvivalDataset apply_standardize(const Standardizer& st, const SurvivalDataset& dataset) {
    const std::size_t k = dataset.schema.size();
    if (st.mean.size() != k)
        throw std::invalid_argument("apply_standardize: standardizer does not match schema");
    SurvivalDataset out = dataset;
    for (auto& r : out.records)
        for (std::size_t f = 0; f < k; ++f) {
            if (!r.observed[f])
                throw std::runtime_error("apply_standardize: missing cells present; impute first");
            r.measurements[f] = (r.measurements[f] - st.mean[f]) / st.stddev[f];
        }
    return out;
}

std::vector<std::string> clean_text(const std::string& note,
                                    const std::unordered_set<std::string>& stopwords) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            if (stopwords.find(cur) == stopwords.end()) out.push_back(cur);
            cur.clear();
        }
    };
    for (unsigned char c : note) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

const std::unordered_set<std::string>& default_stopwords() {
    // the classic 33-word English list plus the clinical additions
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "and",   "are",  "as",    "at",   "be",   "but",  "by",
        "for",  "if",   "in",    "into", "is",    "it",   "no",   "not",  "of",
        "on",   "or",   "such",  "that", "the",   "their", "then", "there",
        "these", "they", "this", "to",   "was",   "will", "with",
        "doctor", "nurse", "measurement"};
    return words;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_stopwords: cannot open " + path);
    std::unordered_set<std::string> words = default_stopwords();
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

Vocabulary::Vocabulary() {
    tokens_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (int i = 0; i < 4; ++i) ids_[tokens_[i]] = i;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw std::out_of_range("Vocabulary: id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::add(const std::string& token) {
    if (ids_.count(token)) return;
    ids_[token] = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t max_size) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    if (max_size < 4) throw std::invalid_argument("build_vocab: max_size must be >= 4");
    std::map<std::string, std::size_t> counts;  // ordered for the tie-break
    for (const auto& doc : corpus)
        for (const auto& tok : doc) counts[tok] += 1;
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    const std::size_t room = max_size - 4;
    for (std::size_t i = 0; i < ranked.size() && i < room; ++i) vocab.add(ranked[i].first);
    return vocab;
}

void write_vocab_csv(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_vocab_csv: cannot open " + path);
    out << "token,id\n";
    for (std::size_t i = 0; i < vocab.size(); ++i)
        out << vocab.token(static_cast<int>(i)) << ',' << i << '\n';
}

EncodedNote encode_note(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                        std::size_t max_len) {
    if (max_len < 2) throw std::invalid_argument("encode_note: max_len must be >= 2");
    EncodedNote enc;
    enc.ids.assign(max_len, Vocabulary::kPad);
    enc.mask.assign(max_len, 0);
    const std::size_t body = std::min(tokens.size(), max_len - 2);  // keep head
    enc.ids[0] = Vocabulary::kCls;
    for (std::size_t i = 0; i < body; ++i) enc.ids[1 + i] = vocab.id(tokens[i]);
    enc.ids[1 + body] = Vocabulary::kSep;
    enc.valid_len = body + 2;
    for (std::size_t i = 0; i < enc.valid_len; ++i) enc.mask[i] = 1;
    return enc;
}

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("fit_tfidf: empty corpus");
    TfidfModel model;
    model.vocab = build_vocab(corpus, static_cast<std::size_t>(-1));
    model.n_docs = corpus.size();
    model.doc_freq.assign(model.vocab.size(), 0.0);
    for (const auto& doc : corpus) {
        std::unordered_set<int> seen;
        for (const auto& tok : doc) {
            int id = model.vocab.id(tok);
            if (id != Vocabulary::kUnk) seen.insert(id);
        }
        for (int id : seen) model.doc_freq[static_cast<std::size_t>(id)] += 1.0;
    }
    return model;
}

std::vector<std::pair<int, double>> tfidf_vector(const TfidfModel& model,
                                                 const std::vector<std::string>& tokens) {
    std::map<int, double> tf;
    for (const auto& tok : tokens) {
        int id = model.vocab.id(tok);
        if (id == Vocabulary::kUnk) continue;
        if (model.doc_freq[static_cast<std::size_t>(id)] <= 0.0) continue;
        tf[id] += 1.0;
    }
    std::vector<std::pair<int, double>> out;
    out.reserve(tf.size());
    const double n = static_cast<double>(model.n_docs);
    for (const auto& [id, count] : tf) {
        double idf = std::log(n / model.doc_freq[static_cast<std::size_t>(id)]);
        out.emplace_back(id, count * idf);
    }
    return out;
}

std::vector<double> tfidf_dense(const TfidfModel& model,
                                const std::vector<std::string>& tokens) {
    std::vector<double> out(model.vocab.size(), 0.0);
    for (const auto& [id, w] : tfidf_vector(model, tokens))
        out[static_cast<std::size_t>(id)] = w;
    return out;
}

}  // namespace notesurv

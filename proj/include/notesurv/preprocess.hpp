#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "notesurv/dataset.hpp"

namespace notesurv {

// Drop records whose missing fraction is strictly greater than threshold.
SurvivalDataset filter_missing(const SurvivalDataset& dataset, double threshold = 0.4);

// Deterministic chained-equation imputation: missing cells start at column
// means; each sweep regresses every incomplete feature on the others (least
// squares over rows where that feature is observed) and overwrites its
// missing cells with predictions. No posterior draws, so the seed is only
// recorded.
struct Imputer {
    std::vector<double> column_mean;
    // per feature: [intercept, coefficients over the other features in schema
    // order]; empty when the mean fallback applies
    std::vector<std::vector<double>> coef;
    std::size_t iterations = 10;
    std::uint64_t seed = 0;
};

std::pair<Imputer, SurvivalDataset> fit_impute(const SurvivalDataset& dataset,
                                               std::size_t iterations = 10,
                                               std::uint64_t seed = 0);
SurvivalDataset apply_impute(const Imputer& imputer, const SurvivalDataset& dataset);

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;               // 1 for constant features
    std::vector<std::uint8_t> constant_flag;  // warning flag per feature
};

Standardizer fit_standardize(const SurvivalDataset& dataset);
SurvivalDataset apply_standardize(const Standardizer& st, const SurvivalDataset& dataset);

// Lowercase, split on non-alphanumeric runs, drop stopwords.
std::vector<std::string> clean_text(const std::string& note,
                                    const std::unordered_set<std::string>& stopwords);

// Common English stopwords plus the clinical additions doctor/nurse/measurement.
const std::unordered_set<std::string>& default_stopwords();
// One token per line, UTF-8; merged with the defaults.
std::unordered_set<std::string> load_stopwords(const std::string& path);

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;

    Vocabulary();

    int id(const std::string& token) const;  // kUnk when absent
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    void add(const std::string& token);
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_;
};

// Most frequent tokens up to max_size - 4 after the reserved ids; frequency
// ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t max_size);

void write_vocab_csv(const Vocabulary& vocab, const std::string& path);

struct EncodedNote {
    std::vector<int> ids;                // exactly max_len long
    std::vector<std::uint8_t> mask;      // 1 on the non-[PAD] prefix
    std::size_t valid_len = 0;
};

// [CLS] + ids + [SEP], truncated from the tail, padded with [PAD].
EncodedNote encode_note(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                        std::size_t max_len);

struct TfidfModel {
    Vocabulary vocab;
    std::vector<double> doc_freq;  // indexed by token id
    std::size_t n_docs = 0;
};

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& corpus);

// weight = tf * ln(N / df) with raw term counts; unseen tokens contribute
// nothing. Sparse (id, weight) pairs sorted by id.
std::vector<std::pair<int, double>> tfidf_vector(const TfidfModel& model,
                                                 const std::vector<std::string>& tokens);
std::vector<double> tfidf_dense(const TfidfModel& model,
                                const std::vector<std::string>& tokens);

}  // namespace notesurv

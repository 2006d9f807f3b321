#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "notesurv/preprocess.hpp"

using namespace notesurv;

namespace {

SurvivalDataset make_ds(std::size_t k, const std::vector<std::vector<double>>& rows,
                        const std::vector<std::vector<int>>& obs = {}) {
    SurvivalDataset ds;
    ds.schema = FeatureSchema::synthetic(k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        SurvivalRecord r;
        r.patient_id = "p" + std::to_string(i);
        r.event_time = 1.0 + static_cast<double>(i);
        r.event = 1;
        r.measurements = rows[i];
        if (obs.empty()) {
            r.observed.assign(k, 1);
        } else {
            for (int o : obs[i]) r.observed.push_back(static_cast<std::uint8_t>(o));
        }
        ds.records.push_back(r);
    }
    return ds;
}

}  // namespace

TEST_CASE("filter_missing: strict threshold boundary") {
    // 25 features: 13 missing (0.52) removed, 10 missing (0.40) kept
    const std::size_t k = 25;
    std::vector<std::vector<double>> rows(3, std::vector<double>(k, 1.0));
    std::vector<std::vector<int>> obs(3, std::vector<int>(k, 1));
    for (std::size_t f = 0; f < 13; ++f) obs[0][f] = 0;
    for (std::size_t f = 0; f < 10; ++f) obs[1][f] = 0;
    SurvivalDataset ds = make_ds(k, rows, obs);
    SurvivalDataset out = filter_missing(ds, 0.4);
    REQUIRE(out.size() == 2);
    CHECK(out.records[0].patient_id == "p1");  // exactly 0.40 stays
    CHECK(out.records[1].patient_id == "p2");

    // everything above threshold -> error
    std::vector<std::vector<int>> all_missing(1, std::vector<int>(k, 0));
    SurvivalDataset bad = make_ds(k, {std::vector<double>(k, 0.0)}, all_missing);
    CHECK_THROWS(filter_missing(bad, 0.4));
}

TEST_CASE("fit_impute: identity on complete data") {
    SurvivalDataset ds = make_ds(2, {{1, 2}, {3, 4}, {5, 6}});
    auto [imp, out] = fit_impute(ds, 10, 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(out.records[i].measurements == ds.records[i].measurements);
}

TEST_CASE("fit_impute: constant feature falls back to the mean") {
    SurvivalDataset ds = make_ds(2,
                                 {{7.0, 1.0}, {7.0, 2.0}, {0.0, 3.0}, {7.0, 4.0}},
                                 {{1, 1}, {1, 1}, {0, 1}, {1, 1}});
    auto [imp, out] = fit_impute(ds, 10, 1);
    CHECK(out.records[2].measurements[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("fit_impute: exact linear relation is recovered") {
    // x1 = 2 * x0 on observed rows; one missing x1
    SurvivalDataset ds = make_ds(2,
                                 {{1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}, {4.0, 0.0}, {5.0, 10.0}},
                                 {{1, 1}, {1, 1}, {1, 1}, {1, 0}, {1, 1}});
    auto [imp, out] = fit_impute(ds, 10, 1);
    CHECK(std::fabs(out.records[3].measurements[1] - 8.0) < 1e-6);
}

TEST_CASE("fit_impute: observed cells never change, errors on empty feature") {
    SurvivalDataset ds = make_ds(3,
                                 {{1.0, 5.0, 2.0}, {2.0, 0.0, 3.0}, {3.0, 7.0, 0.0}},
                                 {{1, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    auto [imp, out] = fit_impute(ds, 10, 9);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t f = 0; f < 3; ++f)
            if (ds.records[i].observed[f])
                CHECK(out.records[i].measurements[f] == ds.records[i].measurements[f]);

    SurvivalDataset empty_feature = make_ds(2, {{1.0, 0.0}, {2.0, 0.0}}, {{1, 0}, {1, 0}});
    CHECK_THROWS_WITH(std::ignore = fit_impute(empty_feature, 10, 1), doctest::Contains("x1"));
}

TEST_CASE("apply_impute matches fit-time output and is idempotent on complete data") {
    SurvivalDataset ds = make_ds(2,
                                 {{1.0, 2.1}, {2.0, 3.9}, {3.0, 6.2}, {4.0, 0.0}},
                                 {{1, 1}, {1, 1}, {1, 1}, {1, 0}});
    auto [imp, fitted] = fit_impute(ds, 10, 1);
    SurvivalDataset applied = apply_impute(imp, ds);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(applied.records[i].measurements == fitted.records[i].measurements);
    SurvivalDataset twice = apply_impute(imp, applied);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(twice.records[i].measurements == applied.records[i].measurements);
}

TEST_CASE("standardize: two-point case, constant flag, train stats on held-out data") {
    SurvivalDataset ds = make_ds(2, {{1.0, 5.0}, {3.0, 5.0}});
    Standardizer st = fit_standardize(ds);
    SurvivalDataset out = apply_standardize(st, ds);
    CHECK(out.records[0].measurements[0] == doctest::Approx(-1.0));
    CHECK(out.records[1].measurements[0] == doctest::Approx(1.0));
    CHECK(out.records[0].measurements[1] == 0.0);
    CHECK(st.constant_flag[1] == 1);
    CHECK(st.constant_flag[0] == 0);

    // held-out data is transformed with training statistics, not its own
    SurvivalDataset held = make_ds(2, {{10.0, 4.0}, {14.0, 6.0}, {0.0, 5.0}, {2.0, 5.0}});
    SurvivalDataset tr = apply_standardize(st, held);
    for (std::size_t i = 0; i < held.size(); ++i) {
        CHECK(tr.records[i].measurements[0] ==
              doctest::Approx((held.records[i].measurements[0] - st.mean[0]) / st.stddev[0]));
        CHECK(tr.records[i].measurements[1] ==
              doctest::Approx(held.records[i].measurements[1] - 5.0));
    }

    SurvivalDataset with_missing = make_ds(1, {{1.0}}, {{0}});
    CHECK_THROWS(fit_standardize(with_missing));
    CHECK_THROWS(apply_standardize(st, make_ds(2, {{1.0, 1.0}}, {{1, 0}})));
}

TEST_CASE("filter -> impute -> standardize on complete data is a pure standardization") {
    SurvivalDataset ds = make_ds(2, {{1, 10}, {2, 20}, {3, 30}, {4, 40}});
    SurvivalDataset f = filter_missing(ds, 0.4);
    auto [imp, imputed] = fit_impute(f, 10, 0);
    Standardizer st = fit_standardize(imputed);
    SurvivalDataset out = apply_standardize(st, imputed);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0, var = 0;
        for (const auto& r : out.records) mean += r.measurements[c];
        mean /= 4.0;
        for (const auto& r : out.records)
            var += (r.measurements[c] - mean) * (r.measurements[c] - mean);
        var /= 4.0;
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("clean_text: stopwords including the clinical additions") {
    auto tokens = clean_text("The nurse noted severe chest trauma.", default_stopwords());
    CHECK(tokens == std::vector<std::string>{"noted", "severe", "chest", "trauma"});
    CHECK(clean_text("", default_stopwords()).empty());
    CHECK(clean_text("4 cm above the carina", default_stopwords()) ==
          std::vector<std::string>{"4", "cm", "above", "carina"});
    CHECK(clean_text("doctor measurement DOCTOR", default_stopwords()).empty());
    // punctuation and symbol runs split tokens
    CHECK(clean_text("a+b (c)d--e", {}) ==
          std::vector<std::string>{"a", "b", "c", "d", "e"});
}

TEST_CASE("build_vocab: reserved ids, frequency order, ties, unknown tokens") {
    std::vector<std::vector<std::string>> corpus = {{"a", "a", "b"}, {"a"}};
    Vocabulary v = build_vocab(corpus, 6);
    CHECK(v.id("[PAD]") == 0);
    CHECK(v.id("[UNK]") == 1);
    CHECK(v.id("[CLS]") == 2);
    CHECK(v.id("[SEP]") == 3);
    CHECK(v.id("a") == 4);
    CHECK(v.id("b") == 5);
    CHECK(v.id("zebra") == Vocabulary::kUnk);

    // tie between a and b with room for one: lexicographic keeps a
    Vocabulary tied = build_vocab({{"b", "a"}, {"a", "b"}}, 5);
    CHECK(tied.id("a") == 4);
    CHECK(tied.id("b") == Vocabulary::kUnk);
    CHECK_THROWS(build_vocab({}, 10));
}

TEST_CASE("encode_note: padding, truncation, masks") {
    Vocabulary v = build_vocab({{"a", "b"}}, 10);
    EncodedNote e = encode_note(v, {"a"}, 4);
    CHECK(e.ids == std::vector<int>{Vocabulary::kCls, v.id("a"), Vocabulary::kSep,
                                    Vocabulary::kPad});
    CHECK(e.mask == std::vector<std::uint8_t>{1, 1, 1, 0});
    CHECK(e.valid_len == 3);

    EncodedNote empty = encode_note(v, {}, 5);
    CHECK(empty.ids == std::vector<int>{Vocabulary::kCls, Vocabulary::kSep, 0, 0, 0});

    std::vector<std::string> many(600, "a");
    EncodedNote t = encode_note(v, many, 512);
    CHECK(t.ids.size() == 512);
    CHECK(t.valid_len == 512);
    CHECK(t.ids[0] == Vocabulary::kCls);
    CHECK(t.ids[511] == Vocabulary::kSep);
    for (std::size_t i = 1; i <= 510; ++i) CHECK(t.ids[i] == v.id("a"));

    CHECK_THROWS(encode_note(v, {"a"}, 1));
}

TEST_CASE("tfidf: document frequency weighting and the worked example") {
    std::vector<std::vector<std::string>> corpus = {{"a", "a", "b"}, {"b"}};
    TfidfModel model = fit_tfidf(corpus);
    auto vec = tfidf_vector(model, corpus[0]);
    double wa = 0.0, wb = -1.0;
    for (auto [id, w] : vec) {
        if (id == model.vocab.id("a")) wa = w;
        if (id == model.vocab.id("b")) wb = w;
    }
    CHECK(wa == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(wb == 0.0);  // present in every document: ln 1

    CHECK(tfidf_vector(model, {}).empty());
    CHECK(tfidf_vector(model, {"unseen"}).empty());

    // linear in term counts
    auto once = tfidf_dense(model, {"a"});
    auto thrice = tfidf_dense(model, {"a", "a", "a"});
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(thrice[i] == doctest::Approx(3.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("stopword file merges with the defaults") {
    auto path = (std::filesystem::temp_directory_path() / "ns_stop.txt").string();
    {
        std::ofstream out(path);
        out << "ventilator\n\ncarina\n";
    }
    auto words = load_stopwords(path);
    CHECK(words.count("ventilator") == 1);
    CHECK(words.count("carina") == 1);
    CHECK(words.count("nurse") == 1);
    std::remove(path.c_str());
}

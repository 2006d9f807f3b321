#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "notesurv/dataset.hpp"
#include "oracles.hpp"

using namespace notesurv;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

SurvivalDataset tiny(const std::vector<double>& times, const std::vector<int>& events) {
    SurvivalDataset ds;
    ds.schema = FeatureSchema::synthetic(1);
    for (std::size_t i = 0; i < times.size(); ++i) {
        SurvivalRecord r;
        r.patient_id = "p" + std::to_string(i);
        r.event_time = times[i];
        r.event = events[i];
        r.measurements = {0.0};
        r.observed = {1};
        ds.records.push_back(r);
    }
    return ds;
}

}  // namespace

TEST_CASE("load_dataset: well-formed file, missing cells, note quoting") {
    auto path = temp_path("ns_load.csv");
    write_file(path,
               "patient_id,event_time,event,x0,x1,note\n"
               "a,10,1,1.5,2.5,\"hello, \"\"world\"\"\"\n"
               "b,5.5,0,,1.0,\"\"\n"
               "c,1,1,0.25,,\"line\"\n");
    SurvivalDataset ds = load_dataset(path, FeatureSchema::synthetic(2));
    REQUIRE(ds.size() == 3);
    CHECK(ds.records[0].note_text == "hello, \"world\"");
    CHECK(ds.records[1].observed[0] == 0);
    CHECK(ds.records[1].observed[1] == 1);
    CHECK(ds.records[1].measurements[1] == 1.0);
    CHECK(ds.records[2].observed[1] == 0);
    std::remove(path.c_str());
}

TEST_CASE("load_dataset: parse errors name row and column") {
    auto path = temp_path("ns_bad.csv");
    write_file(path,
               "patient_id,event_time,event,x0,note\n"
               "a,0,1,1.0,\"n\"\n");
    CHECK_THROWS_WITH(load_dataset(path, FeatureSchema::synthetic(1)),
                      doctest::Contains("row 1") && doctest::Contains("event_time"));

    write_file(path,
               "patient_id,event_time,event,x0,note\n"
               "a,3,1,zebra,\"n\"\n");
    CHECK_THROWS_WITH(load_dataset(path, FeatureSchema::synthetic(1)),
                      doctest::Contains("x0"));

    write_file(path,
               "patient_id,event_time,event,x0,note\n"
               "a,3,2,1.0,\"n\"\n");
    CHECK_THROWS_WITH(load_dataset(path, FeatureSchema::synthetic(1)),
                      doctest::Contains("event"));

    write_file(path, "patient_id,event_time,event,x0,note\na,3,1,1.0\n");
    CHECK_THROWS_WITH(load_dataset(path, FeatureSchema::synthetic(1)),
                      doctest::Contains("columns"));
    std::remove(path.c_str());
}

TEST_CASE("save/load round trip preserves values and the missingness mask") {
    SurvivalDataset ds;
    ds.schema = FeatureSchema::synthetic(3);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        SurvivalRecord r;
        r.patient_id = "p" + std::to_string(i);
        r.event_time = rng.exponential(0.05);
        r.event = rng.bernoulli(0.5) ? 1 : 0;
        for (int f = 0; f < 3; ++f) {
            r.measurements.push_back(rng.normal());
            r.observed.push_back(rng.bernoulli(0.8) ? 1 : 0);
        }
        r.note_text = i % 3 == 0 ? "some note, with \"quotes\"" : "";
        ds.records.push_back(r);
    }
    auto path = temp_path("ns_rt.csv");
    save_dataset(ds, path);
    SurvivalDataset back = load_dataset(path, ds.schema);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.records[i].patient_id == ds.records[i].patient_id);
        CHECK(back.records[i].event_time == ds.records[i].event_time);
        CHECK(back.records[i].event == ds.records[i].event);
        CHECK(back.records[i].observed == ds.records[i].observed);
        CHECK(back.records[i].note_text == ds.records[i].note_text);
        for (std::size_t f = 0; f < 3; ++f)
            if (ds.records[i].observed[f])
                CHECK(back.records[i].measurements[f] == ds.records[i].measurements[f]);
    }
    std::remove(path.c_str());
}

TEST_CASE("read_schema tags the default demographics as exogenous") {
    auto path = temp_path("ns_schema.csv");
    write_file(path, "patient_id,event_time,event,wbc,age,x9,note\n");
    FeatureSchema s = read_schema(path);
    REQUIRE(s.names == std::vector<std::string>{"wbc", "age", "x9"});
    CHECK(s.group[0] == FeatureGroup::endogenous);
    CHECK(s.group[1] == FeatureGroup::exogenous);
    CHECK(s.group[2] == FeatureGroup::endogenous);
    std::remove(path.c_str());
}

TEST_CASE("aggregate_admission: window mean, exclusion, note order") {
    FeatureSchema schema = FeatureSchema::synthetic(2);
    std::vector<RawAdmissionEvent> events;
    events.push_back({"p1", 1.0, RawMeasurement{"x0", 4.0}});
    events.push_back({"p1", 3.0, RawMeasurement{"x0", 6.0}});
    events.push_back({"p1", 5.0, RawMeasurement{"x1", 9.0}});  // outside [0, 4)
    events.push_back({"p1", 2.0, RawNote{"c"}});
    events.push_back({"p1", 1.0, RawNote{"a b"}});

    SurvivalRecord rec = aggregate_admission(events, 4.0, schema);
    CHECK(rec.measurements[0] == doctest::Approx(5.0));
    CHECK(rec.observed[0] == 1);
    CHECK(rec.observed[1] == 0);
    CHECK(rec.note_text == "a b c");

    // boundary: timestamp exactly at the window edge is excluded
    std::vector<RawAdmissionEvent> edge{{"p1", 4.0, RawMeasurement{"x0", 100.0}}};
    SurvivalRecord rec2 = aggregate_admission(edge, 4.0, schema);
    CHECK(rec2.observed[0] == 0);

    // empty list: all missing, empty note
    SurvivalRecord rec3 = aggregate_admission({}, 4.0, schema);
    CHECK(rec3.missing_count() == 2);
    CHECK(rec3.note_text.empty());
}

TEST_CASE("aggregate_admission is permutation invariant over measurements") {
    FeatureSchema schema = FeatureSchema::synthetic(1);
    std::vector<RawAdmissionEvent> events;
    Rng rng(6);
    for (int i = 0; i < 10; ++i)
        events.push_back({"p", rng.uniform() * 3.9, RawMeasurement{"x0", rng.normal()}});
    SurvivalRecord a = aggregate_admission(events, 4.0, schema);
    Rng shuffle_rng(1);
    shuffle_rng.shuffle(events);
    SurvivalRecord b = aggregate_admission(events, 4.0, schema);
    CHECK(a.measurements[0] == doctest::Approx(b.measurements[0]).epsilon(1e-12));
}

TEST_CASE("risk_set definition, self membership, monotonicity") {
    SurvivalDataset ds = tiny({1, 2, 3}, {1, 1, 1});
    CHECK(risk_set(ds, 1) == std::vector<std::size_t>{1, 2});
    CHECK(risk_set(ds, 2) == std::vector<std::size_t>{2});
    CHECK(risk_set(ds, 0) == std::vector<std::size_t>{0, 1, 2});

    SurvivalDataset ties = tiny({5, 5, 5}, {1, 0, 1});
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(risk_set(ties, i).size() == 3);

    // monotone: T_i <= T_j implies risk_set(j) subset of risk_set(i)
    Rng rng(12);
    std::vector<double> times;
    std::vector<int> events;
    for (int i = 0; i < 12; ++i) {
        times.push_back(1.0 + rng.below(5));
        events.push_back(1);
    }
    SurvivalDataset rnd = tiny(times, events);
    for (std::size_t i = 0; i < rnd.size(); ++i)
        for (std::size_t j = 0; j < rnd.size(); ++j) {
            if (rnd.records[i].event_time > rnd.records[j].event_time) continue;
            auto ri = risk_set(rnd, i);
            auto rj = risk_set(rnd, j);
            for (std::size_t m : rj)
                CHECK(std::find(ri.begin(), ri.end(), m) != ri.end());
        }
}

TEST_CASE("simulate: determinism, censoring limit, n = 0") {
    auto a = simulate(50, {1.0, -1.0}, 0.01, 100.0, {{"sepsis", 1.0}}, 42);
    auto b = simulate(50, {1.0, -1.0}, 0.01, 100.0, {{"sepsis", 1.0}}, 42);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a.data.records[i].event_time == b.data.records[i].event_time);
        CHECK(a.data.records[i].measurements == b.data.records[i].measurements);
        CHECK(a.data.records[i].note_text == b.data.records[i].note_text);
    }
    CHECK(a.true_log_risk == b.true_log_risk);

    auto c = simulate(40, {0.5}, 0.01, 1e-9, {}, 7);
    for (const auto& r : c.data.records) {
        CHECK(r.event == 0);
        CHECK(r.event_time > 0.0);
    }
    CHECK_THROWS_AS(simulate(0, {1.0}, 0.01, 10.0, {}, 1), std::invalid_argument);
}

TEST_CASE("simulate: event times follow the exponential law when beta = 0") {
    const double rate = 0.02;
    auto res = simulate(5000, {0.0, 0.0}, rate, 1e12, {}, 99);
    std::vector<double> times;
    for (const auto& r : res.data.records) {
        REQUIRE(r.event == 1);  // effectively no censoring at this horizon
        times.push_back(r.event_time);
    }
    double d = oracle::ks_exponential(times, rate);
    // KS critical value at the 1% level
    CHECK(d < 1.628 / std::sqrt(5000.0));
}

TEST_CASE("simulate: higher true risk shortens event times") {
    auto res = simulate(1500, {1.0, -1.0, 0.5}, 0.01, 1e12, {{"sepsis", 1.5}}, 3);
    std::vector<double> risk, time;
    for (std::size_t i = 0; i < res.data.size(); ++i) {
        if (res.data.records[i].event != 1) continue;
        risk.push_back(res.true_log_risk[i]);
        time.push_back(res.data.records[i].event_time);
    }
    CHECK(oracle::spearman(risk, time) < -0.5);
}

TEST_CASE("knock_out marks cells missing at roughly the requested rate") {
    auto res = simulate(500, {1.0, 1.0, 1.0, 1.0}, 0.01, 100.0, {}, 5);
    knock_out(res.data, 0.3, 11);
    std::size_t missing = 0;
    for (const auto& r : res.data.records) missing += r.missing_count();
    double frac = static_cast<double>(missing) / (500.0 * 4.0);
    CHECK(frac > 0.25);
    CHECK(frac < 0.35);
}

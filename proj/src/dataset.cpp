#include "notesurv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace notesurv {

void FeatureSchema::validate() const {
    if (names.size() != group.size())
        throw std::invalid_argument("FeatureSchema: names/group size mismatch");
    std::set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second)
            throw std::invalid_argument("FeatureSchema: duplicate feature name " + n);
}

FeatureSchema FeatureSchema::default_clinical() {
    FeatureSchema s;
    s.names = {"blood_pressure", "temperature", "respiratory_rate", "arterial_pao2",
               "hematocrit",     "wbc",         "creatinine",       "chloride",
               "lactic_acid",    "bun",         "sodium",           "glucose",
               "paco2",          "ph",          "gcs",              "heart_rate",
               "fio2",           "potassium",   "calcium",          "ptt",
               "inr",            "weight",      "gender",           "ethnicity",
               "age"};
    s.group.assign(21, FeatureGroup::endogenous);
    s.group.insert(s.group.end(), 4, FeatureGroup::exogenous);
    return s;
}

FeatureSchema FeatureSchema::synthetic(std::size_t k) {
    FeatureSchema s;
    for (std::size_t i = 0; i < k; ++i) {
        s.names.push_back("x" + std::to_string(i));
        s.group.push_back(FeatureGroup::endogenous);
    }
    return s;
}

std::size_t SurvivalRecord::missing_count() const {
    std::size_t n = 0;
    for (auto o : observed)
        if (!o) ++n;
    return n;
}

void SurvivalDataset::validate() const {
    schema.validate();
    for (const auto& r : records) {
        if (!(r.event_time > 0.0) || !std::isfinite(r.event_time))
            throw std::invalid_argument("record " + r.patient_id +
                                        ": event_time must be finite and positive");
        if (r.event != 0 && r.event != 1)
            throw std::invalid_argument("record " + r.patient_id + ": event must be 0 or 1");
        if (r.measurements.size() != schema.size() || r.observed.size() != schema.size())
            throw std::invalid_argument("record " + r.patient_id +
                                        ": measurement length does not match schema");
    }
}

namespace {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(std::size_t row, const std::string& column, const std::string& what) {
    throw ParseError("parse error at row " + std::to_string(row) + ", column '" + column +
                     "': " + what);
}

// RFC-4180-ish: quoted fields may contain commas, doubled quotes and newlines
std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                row.push_back(field);
                field.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty() || !row.empty()) {
                    row.push_back(field);
                    rows.push_back(row);
                }
                field.clear();
                row.clear();
                row_started = false;
                break;
            default:
                field += c;
                row_started = true;
                break;
        }
    }
    if (row_started || !field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

double parse_double(const std::string& s, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) fail(row, column, "not a number: '" + s + "'");
    return value;
}

std::string quote_csv(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

}  // namespace

SurvivalDataset load_dataset(const std::string& path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    auto rows = read_csv(in);
    if (rows.empty()) throw ParseError("parse error: empty file " + path);

    const std::size_t want_cols = 3 + schema.size() + 1;
    std::vector<std::string> header = {"patient_id", "event_time", "event"};
    header.insert(header.end(), schema.names.begin(), schema.names.end());
    header.push_back("note");
    if (rows[0] != header) throw ParseError("parse error: header does not match schema");

    SurvivalDataset ds;
    ds.schema = schema;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != want_cols)
            throw ParseError("parse error at row " + std::to_string(r) + ": expected " +
                             std::to_string(want_cols) + " columns, got " +
                             std::to_string(cells.size()));
        SurvivalRecord rec;
        rec.patient_id = cells[0];
        rec.event_time = parse_double(cells[1], r, "event_time");
        if (!(rec.event_time > 0.0) || !std::isfinite(rec.event_time))
            fail(r, "event_time", "must be finite and positive");
        double ev = parse_double(cells[2], r, "event");
        if (ev != 0.0 && ev != 1.0) fail(r, "event", "must be 0 or 1");
        rec.event = static_cast<int>(ev);
        rec.measurements.resize(schema.size(), 0.0);
        rec.observed.resize(schema.size(), 0);
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const std::string& cell = cells[3 + f];
            if (cell.empty()) continue;  // missing marker
            rec.measurements[f] = parse_double(cell, r, schema.names[f]);
            rec.observed[f] = 1;
        }
        rec.note_text = cells.back();
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_dataset(const SurvivalDataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    out << "patient_id,event_time,event";
    for (const auto& n : dataset.schema.names) out << ',' << n;
    out << ",note\n";
    for (const auto& r : dataset.records) {
        out << r.patient_id << ',' << format_double(r.event_time) << ',' << r.event;
        for (std::size_t f = 0; f < dataset.schema.size(); ++f) {
            out << ',';
            if (r.observed[f]) out << format_double(r.measurements[f]);
        }
        out << ',' << quote_csv(r.note_text) << '\n';
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

FeatureSchema read_schema(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_schema: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("parse error: empty file " + path);
    std::istringstream ss(line);
    auto rows = read_csv(ss);
    if (rows.empty() || rows[0].size() < 4 || rows[0][0] != "patient_id" ||
        rows[0][1] != "event_time" || rows[0][2] != "event" || rows[0].back() != "note")
        throw ParseError("parse error: header must be patient_id,event_time,event,...,note");
    FeatureSchema schema;
    const FeatureSchema clinical = FeatureSchema::default_clinical();
    for (std::size_t c = 3; c + 1 < rows[0].size(); ++c) {
        const std::string& name = rows[0][c];
        schema.names.push_back(name);
        FeatureGroup g = FeatureGroup::endogenous;
        for (std::size_t f = 0; f < clinical.size(); ++f)
            if (clinical.names[f] == name) g = clinical.group[f];
        schema.group.push_back(g);
    }
    schema.validate();
    return schema;
}

SurvivalRecord aggregate_admission(const std::vector<RawAdmissionEvent>& events,
                                   double window, const FeatureSchema& schema) {
    if (!(window > 0.0)) throw std::invalid_argument("aggregate_admission: window must be > 0");
    schema.validate();

    SurvivalRecord rec;
    rec.measurements.assign(schema.size(), 0.0);
    rec.observed.assign(schema.size(), 0);
    if (events.empty()) return rec;

    rec.patient_id = events.front().patient_id;
    for (const auto& e : events) {
        if (e.patient_id != rec.patient_id)
            throw std::invalid_argument("aggregate_admission: events span multiple patients");
        if (e.timestamp < 0.0)
            throw std::invalid_argument("aggregate_admission: negative timestamp");
    }

    std::vector<double> sum(schema.size(), 0.0);
    std::vector<std::size_t> count(schema.size(), 0);
    // stable order for notes with tied timestamps
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return events[a].timestamp < events[b].timestamp;
    });

    std::string note;
    for (std::size_t idx : order) {
        const auto& e = events[idx];
        if (e.timestamp >= window) continue;  // [0, window)
        if (const auto* m = std::get_if<RawMeasurement>(&e.payload)) {
            auto it = std::find(schema.names.begin(), schema.names.end(), m->feature);
            if (it == schema.names.end())
                throw std::invalid_argument("aggregate_admission: unknown feature " + m->feature);
            std::size_t f = static_cast<std::size_t>(it - schema.names.begin());
            sum[f] += m->value;
            count[f] += 1;
        } else {
            const auto& frag = std::get<RawNote>(e.payload).text;
            if (frag.empty()) continue;
            if (!note.empty()) note += ' ';
            note += frag;
        }
    }
    for (std::size_t f = 0; f < schema.size(); ++f) {
        if (count[f] > 0) {
            rec.measurements[f] = sum[f] / static_cast<double>(count[f]);
            rec.observed[f] = 1;
        }
    }
    rec.note_text = std::move(note);
    return rec;
}

std::vector<std::size_t> risk_set(const SurvivalDataset& dataset, std::size_t i) {
    if (i >= dataset.size()) throw std::out_of_range("risk_set: index out of range");
    const double ti = dataset.records[i].event_time;
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < dataset.size(); ++j)
        if (dataset.records[j].event_time >= ti) out.push_back(j);
    return out;
}

namespace {
// filler tokens for synthetic notes; none are stopwords or signal carriers
const std::vector<std::string>& filler_pool() {
    static const std::vector<std::string> pool = {
        "admitted", "ward",     "exam",   "fluids",  "monitor", "scan",
        "followup", "baseline", "tube",   "airway",  "chart",   "labs",
        "course",   "overnight", "review", "transfer"};
    return pool;
}
}  // namespace

SimulationResult simulate(std::size_t n, const std::vector<double>& beta,
                          double baseline_rate, double censor_horizon,
                          const std::map<std::string, double>& vocab_signal,
                          std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("simulate: n must be positive");
    if (!(baseline_rate > 0.0)) throw std::invalid_argument("simulate: baseline_rate must be > 0");
    if (!(censor_horizon > 0.0))
        throw std::invalid_argument("simulate: censor_horizon must be > 0");

    const std::size_t k = beta.size();
    SimulationResult out;
    out.data.schema = FeatureSchema::synthetic(k);
    out.data.records.resize(n);
    out.true_log_risk.resize(n);

    const auto& fillers = filler_pool();

#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        Rng rng(Rng::mix(seed, i));  // independent stream per record
        SurvivalRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "sim-%06zu", i);
        rec.patient_id = buf;
        rec.measurements.resize(k);
        rec.observed.assign(k, 1);
        double r = 0.0;
        for (std::size_t f = 0; f < k; ++f) {
            rec.measurements[f] = rng.normal();
            r += beta[f] * rec.measurements[f];
        }
        std::vector<std::string> tokens;
        std::size_t n_fillers = 3 + rng.below(4);
        for (std::size_t t = 0; t < n_fillers; ++t)
            tokens.push_back(fillers[rng.below(fillers.size())]);
        for (const auto& [token, effect] : vocab_signal) {
            if (rng.bernoulli(0.5)) {
                tokens.push_back(token);
                r += effect;
            }
        }
        rng.shuffle(tokens);
        std::string note;
        for (const auto& t : tokens) {
            if (!note.empty()) note += ' ';
            note += t;
        }
        rec.note_text = std::move(note);

        double event_t = rng.exponential(baseline_rate * std::exp(r));
        double censor_t = censor_horizon * rng.uniform_pos();  // (0, horizon]
        rec.event = event_t <= censor_t ? 1 : 0;
        rec.event_time = std::max(std::min(event_t, censor_t),
                                  std::numeric_limits<double>::min());

        out.data.records[i] = std::move(rec);
        out.true_log_risk[i] = r;
    }
    return out;
}

void knock_out(SurvivalDataset& dataset, double rate, std::uint64_t seed) {
    if (rate <= 0.0) return;
    Rng rng(seed);
    for (auto& rec : dataset.records)
        for (std::size_t f = 0; f < rec.observed.size(); ++f)
            if (rng.bernoulli(rate)) rec.observed[f] = 0;
}

}  // namespace notesurv

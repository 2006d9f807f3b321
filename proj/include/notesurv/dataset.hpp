#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "notesurv/rng.hpp"

namespace notesurv {

enum class FeatureGroup { endogenous, exogenous };

// Ordered feature names with endogenous/exogenous tags.
struct FeatureSchema {
    std::vector<std::string> names;
    std::vector<FeatureGroup> group;

    std::size_t size() const { return names.size(); }
    void validate() const;  // unique names, matching tag count

    // 21 endogenous clinical measurements + 4 exogenous demographics
    static FeatureSchema default_clinical();
    // synthetic schema x0..x{k-1}, all endogenous
    static FeatureSchema synthetic(std::size_t k);
};

// One admission. Missing measurements are an explicit mask, never sentinel
// numbers. event == 1 means death observed at event_time, 0 means censored
// (discharged) at event_time.
struct SurvivalRecord {
    std::string patient_id;
    double event_time = 0.0;  // hours since admission, > 0
    int event = 0;            // 0 or 1
    std::vector<double> measurements;      // values; meaningless where !observed
    std::vector<std::uint8_t> observed;    // missingness mask
    std::string note_text;

    std::size_t missing_count() const;
};

struct SurvivalDataset {
    FeatureSchema schema;
    std::vector<SurvivalRecord> records;

    std::size_t size() const { return records.size(); }
    void validate() const;  // all records conform to the schema
};

// Raw per-admission event stream: either a timestamped measurement or a note
// fragment.
struct RawMeasurement {
    std::string feature;
    double value;
};
struct RawNote {
    std::string text;
};
struct RawAdmissionEvent {
    std::string patient_id;
    double timestamp = 0.0;  // hours since admission, >= 0
    std::variant<RawMeasurement, RawNote> payload;
};

// CSV layout: header `patient_id,event_time,event,<feature names...>,note`;
// empty cell = missing; note is the final column, quoted.
SurvivalDataset load_dataset(const std::string& path, const FeatureSchema& schema);
void save_dataset(const SurvivalDataset& dataset, const std::string& path);

// Schema from the CSV header alone. The four default demographic columns are
// tagged exogenous when present; everything else is endogenous.
FeatureSchema read_schema(const std::string& path);

// Mean of each feature's values in [0, window); notes concatenated in
// timestamp order, single-space separated. Features with no in-window value
// are missing. event_time/event are left unset (zeroed) for the caller.
SurvivalRecord aggregate_admission(const std::vector<RawAdmissionEvent>& events,
                                   double window, const FeatureSchema& schema);

// R(T_i) = { j : T_j >= T_i }; always contains i.
std::vector<std::size_t> risk_set(const SurvivalDataset& dataset, std::size_t i);

// Synthetic ground-truth generator: features standard normal, note tokens
// shifting log-risk by their map value, exponential event times at rate
// baseline_rate * exp(true log-risk), uniform censoring on (0, horizon].
struct SimulationResult {
    SurvivalDataset data;
    std::vector<double> true_log_risk;
};

SimulationResult simulate(std::size_t n, const std::vector<double>& beta,
                          double baseline_rate, double censor_horizon,
                          const std::map<std::string, double>& vocab_signal,
                          std::uint64_t seed);

// Test/CLI helper: mark a fraction of measurement cells missing.
void knock_out(SurvivalDataset& dataset, double rate, std::uint64_t seed);

}  // namespace notesurv

#include "notesurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "notesurv/kernels.hpp"

namespace notesurv {

double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels) {
    ad::Tape t;
    ad::NodeId p = t.input(Tensor::column(probs));
    return t.value(t.bce_loss(p, labels)).v[0];
}

double pll_loss(const std::vector<double>& risks, const std::vector<double>& times,
                const std::vector<double>& events) {
    ad::Tape t;
    ad::NodeId r = t.input(Tensor::column(risks));
    return t.value(t.pll_loss(r, times, events)).v[0];
}

std::vector<double> CoxParams::endogenous_weights() const {
    std::vector<double> out;
    for (std::size_t f = 0; f < beta.size(); ++f)
        if (schema.group[f] == FeatureGroup::endogenous) out.push_back(beta[f]);
    return out;
}

std::vector<double> CoxParams::exogenous_weights() const {
    std::vector<double> out;
    for (std::size_t f = 0; f < beta.size(); ++f)
        if (schema.group[f] == FeatureGroup::exogenous) out.push_back(beta[f]);
    return out;
}

double CoxParams::linear_predictor(const SurvivalRecord& r) const {
    if (r.measurements.size() != beta.size())
        throw std::invalid_argument("CoxParams: record does not match schema");
    double s = 0.0;
    for (std::size_t f = 0; f < beta.size(); ++f) s += beta[f] * r.measurements[f];
    return s;
}

namespace {

struct CoxData {
    std::size_t n = 0, k = 0;
    std::vector<double> x;  // n x k
    std::vector<double> times, events;
    std::vector<std::size_t> order;  // descending time
};

CoxData cox_data(const SurvivalDataset& ds) {
    CoxData d;
    d.n = ds.size();
    d.k = ds.schema.size();
    if (d.n == 0) throw std::invalid_argument("fit_cox: empty dataset");
    d.x.resize(d.n * d.k);
    d.times.resize(d.n);
    d.events.resize(d.n);
    bool any_event = false;
    for (std::size_t i = 0; i < d.n; ++i) {
        const auto& r = ds.records[i];
        for (std::size_t f = 0; f < d.k; ++f) {
            if (!r.observed[f])
                throw std::runtime_error("fit_cox: missing cells present; impute first");
            d.x[i * d.k + f] = r.measurements[f];
        }
        d.times[i] = r.event_time;
        d.events[i] = static_cast<double>(r.event);
        any_event = any_event || r.event == 1;
    }
    if (!any_event) throw std::invalid_argument("fit_cox: at least one event is required");
    d.order.resize(d.n);
    std::iota(d.order.begin(), d.order.end(), 0);
    std::sort(d.order.begin(), d.order.end(), [&](std::size_t a, std::size_t b) {
        if (d.times[a] != d.times[b]) return d.times[a] > d.times[b];
        return a < b;
    });
    return d;
}

struct CoxEval {
    double ll = 0.0;
    std::vector<double> grad;
    std::vector<double> neg_hess;  // k x k, positive semidefinite
};

CoxEval cox_eval(const CoxData& d, const std::vector<double>& beta, double ridge,
                 bool derivs) {
    const std::size_t n = d.n, k = d.k;
    std::vector<double> eta(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < k; ++f) eta[i] += beta[f] * d.x[i * k + f];
    double m = *std::max_element(eta.begin(), eta.end());

    CoxEval ev;
    ev.grad.assign(derivs ? k : 0, 0.0);
    ev.neg_hess.assign(derivs ? k * k : 0, 0.0);

    double s0 = 0.0;
    std::vector<double> s1(k, 0.0), s2(k * k, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        const double t = d.times[d.order[i]];
        while (j < n && d.times[d.order[j]] == t) ++j;
        for (std::size_t q = i; q < j; ++q) {
            const std::size_t r = d.order[q];
            const double w = std::exp(eta[r] - m);
            s0 += w;
            if (derivs) {
                const double* xr = &d.x[r * k];
                for (std::size_t a = 0; a < k; ++a) {
                    s1[a] += w * xr[a];
                    for (std::size_t b = 0; b < k; ++b) s2[a * k + b] += w * xr[a] * xr[b];
                }
            }
        }
        for (std::size_t q = i; q < j; ++q) {
            const std::size_t r = d.order[q];
            if (d.events[r] == 0.0) continue;
            ev.ll += eta[r] - (std::log(s0) + m);
            if (derivs) {
                const double* xr = &d.x[r * k];
                for (std::size_t a = 0; a < k; ++a) {
                    const double xbar_a = s1[a] / s0;
                    ev.grad[a] += xr[a] - xbar_a;
                    for (std::size_t b = 0; b < k; ++b)
                        ev.neg_hess[a * k + b] += s2[a * k + b] / s0 - xbar_a * (s1[b] / s0);
                }
            }
        }
        i = j;
    }
    if (ridge > 0.0) {
        for (std::size_t f = 0; f < k; ++f) {
            ev.ll -= 0.5 * ridge * beta[f] * beta[f];
            if (derivs) {
                ev.grad[f] -= ridge * beta[f];
                ev.neg_hess[f * k + f] += ridge;
            }
        }
    }
    return ev;
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

double cox_log_partial_likelihood(const SurvivalDataset& dataset,
                                  const std::vector<double>& beta, double ridge) {
    CoxData d = cox_data(dataset);
    if (beta.size() != d.k) throw std::invalid_argument("beta size does not match schema");
    return cox_eval(d, beta, ridge, false).ll;
}

std::vector<double> cox_gradient(const SurvivalDataset& dataset,
                                 const std::vector<double>& beta, double ridge) {
    CoxData d = cox_data(dataset);
    if (beta.size() != d.k) throw std::invalid_argument("beta size does not match schema");
    return cox_eval(d, beta, ridge, true).grad;
}

CoxParams fit_cox(const SurvivalDataset& dataset, double ridge, std::size_t max_iter,
                  double tol) {
    CoxData d = cox_data(dataset);
    const std::size_t k = d.k;
    std::vector<double> beta(k, 0.0);
    constexpr double kEscapeNorm = 20.0;  // implausible on standardized features

    CoxEval ev = cox_eval(d, beta, ridge, true);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        if (inf_norm(ev.grad) < tol) {
            CoxParams out;
            out.beta = beta;
            out.schema = dataset.schema;
            return out;
        }
        // Newton direction: neg_hess * delta = grad
        std::vector<double> h = ev.neg_hess;
        std::vector<double> delta = ev.grad;
        if (!kern::solve_linear(h, delta, k)) {
            // singular information matrix: jitter once, then give up
            h = ev.neg_hess;
            delta = ev.grad;
            double scale = 0.0;
            for (std::size_t f = 0; f < k; ++f) scale = std::max(scale, h[f * k + f]);
            for (std::size_t f = 0; f < k; ++f) h[f * k + f] += 1e-10 * (scale > 0 ? scale : 1.0);
            if (!kern::solve_linear(h, delta, k))
                throw CoxSeparationError(
                    "fit_cox: singular information matrix; consider ridge > 0");
        }
        double step = 1.0;
        std::vector<double> cand(k);
        CoxEval cand_ev;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving) {
            for (std::size_t f = 0; f < k; ++f) cand[f] = beta[f] + step * delta[f];
            cand_ev = cox_eval(d, cand, ridge, true);
            if (std::isfinite(cand_ev.ll) && cand_ev.ll >= ev.ll - 1e-13) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw CoxConvergenceError("fit_cox: step halving failed to improve likelihood",
                                      beta);
        beta = cand;
        ev = cand_ev;
        if (inf_norm(beta) > kEscapeNorm && inf_norm(ev.grad) > tol)
            throw CoxSeparationError(
                "fit_cox: monotone partial likelihood (coefficients escaping); "
                "refit with ridge > 0");
    }
    if (inf_norm(ev.grad) < tol) {
        CoxParams out;
        out.beta = beta;
        out.schema = dataset.schema;
        return out;
    }
    throw CoxConvergenceError("fit_cox: no convergence in " + std::to_string(max_iter) +
                                  " iterations (grad inf-norm " +
                                  std::to_string(inf_norm(ev.grad)) + ")",
                              beta);
}

double BaselineHazard::value(double t) const {
    // right-continuous step function, 0 before the first event time
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumhaz[static_cast<std::size_t>(it - times.begin()) - 1];
}

BaselineHazard breslow(const std::vector<double>& times, const std::vector<double>& events,
                       const std::vector<double>& risks) {
    const std::size_t n = times.size();
    if (events.size() != n || risks.size() != n)
        throw std::invalid_argument("breslow: input length mismatch");
    double ne = 0.0;
    for (double e : events) ne += e;
    if (ne == 0.0) throw std::invalid_argument("breslow: at least one event is required");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) return times[a] > times[b];
        return a < b;
    });
    double m = *std::max_element(risks.begin(), risks.end());

    // walk descending time keeping the running risk-set sum; ties at one time
    // contribute one increment per tied event over the shared denominator
    struct Step {
        double time;
        double increment;
    };
    std::vector<Step> steps;
    double sexp = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        const double t = times[order[i]];
        while (j < n && times[order[j]] == t) ++j;
        for (std::size_t q = i; q < j; ++q) sexp += std::exp(risks[order[q]] - m);
        double d = 0.0;
        for (std::size_t q = i; q < j; ++q) d += events[order[q]];
        if (d > 0.0) steps.push_back({t, d / (sexp * std::exp(m))});
        i = j;
    }
    BaselineHazard base;
    double cum = 0.0;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {  // ascending time
        cum += it->increment;
        base.times.push_back(it->time);
        base.cumhaz.push_back(cum);
    }
    return base;
}

SurvivalCurve survival_curve(const BaselineHazard& base, double log_risk,
                             const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 0.0) throw std::invalid_argument("survival_curve: negative grid time");
        if (i > 0 && grid[i] < grid[i - 1])
            throw std::invalid_argument("survival_curve: grid must be sorted");
    }
    SurvivalCurve c;
    c.times = grid;
    const double r = std::exp(log_risk);
    for (double t : grid) {
        double h = base.value(t) * r;
        c.cum_hazard.push_back(h);
        c.survival.push_back(std::exp(-h));
        c.mortality.push_back(1.0 - std::exp(-h));
    }
    return c;
}

double likelihood(const BaselineHazard& base, double log_risk, double time, int event) {
    if (time < 0.0) throw std::invalid_argument("likelihood: negative time");
    const double surv = std::exp(-base.value(time) * std::exp(log_risk));
    if (event == 0) return surv;
    // hazard rate on (t_{k-1}, t_k] is the H increment over the interval width
    auto it = std::lower_bound(base.times.begin(), base.times.end(), time);
    if (it == base.times.end())
        throw std::runtime_error("likelihood: event beyond the last observed event time");
    std::size_t k = static_cast<std::size_t>(it - base.times.begin());
    double prev_time = k == 0 ? 0.0 : base.times[k - 1];
    double prev_haz = k == 0 ? 0.0 : base.cumhaz[k - 1];
    double rate = (base.cumhaz[k] - prev_haz) * std::exp(log_risk) /
                  (base.times[k] - prev_time);
    return rate * surv;
}

TaskMode task_from_string(const std::string& s) {
    if (s == "mortality") return TaskMode::mortality;
    if (s == "survival") return TaskMode::survival;
    throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(TaskMode m) {
    return m == TaskMode::mortality ? "mortality" : "survival";
}

TextFeatures text_features_from_string(const std::string& s) {
    if (s == "none") return TextFeatures::none;
    if (s == "tfidf") return TextFeatures::tfidf;
    if (s == "attention") return TextFeatures::attention;
    throw std::invalid_argument("unknown encoder: " + s);
}

std::string to_string(TextFeatures t) {
    switch (t) {
        case TextFeatures::none: return "none";
        case TextFeatures::tfidf: return "tfidf";
        default: return "attention";
    }
}

namespace {

// model inputs prepared once per dataset
struct Featurized {
    Tensor meas;                     // n x k standardized measurements
    std::vector<std::vector<double>> tfidf_rows;
    std::vector<EncodedNote> notes;  // attention
    std::vector<double> times, labels;
};

Featurized featurize(const NeuralSurvModel& model, const SurvivalDataset& ds) {
    Featurized f;
    const std::size_t n = ds.size();
    const std::size_t k = ds.schema.size();
    if (k != model.n_meas)
        throw std::invalid_argument("model/schema mismatch: expected " +
                                    std::to_string(model.n_meas) + " measurements, got " +
                                    std::to_string(k));
    f.meas = Tensor::zeros({n, k});
    f.times.resize(n);
    f.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = ds.records[i];
        for (std::size_t c = 0; c < k; ++c) {
            if (!r.observed[c])
                throw std::runtime_error("fit/predict: missing cells present; impute first");
            f.meas.at(i, c) = r.measurements[c];
        }
        f.times[i] = r.event_time;
        f.labels[i] = static_cast<double>(r.event);
    }
    if (model.cfg.text == TextFeatures::tfidf) {
        for (const auto& r : ds.records)
            f.tfidf_rows.push_back(
                tfidf_dense(*model.text.tfidf, clean_text(r.note_text, model.text.stopwords)));
    } else if (model.cfg.text == TextFeatures::attention) {
        for (const auto& r : ds.records) {
            auto tokens = clean_text(r.note_text, model.text.stopwords);
            f.notes.push_back(
                encode_note(*model.text.vocab, tokens, model.cfg.encoder.max_len));
        }
    }
    return f;
}

// batch forward to the scalar output column (B x 1)
ad::NodeId forward_scores(ad::Tape& tape, const NeuralSurvModel& model, const Featurized& f,
                          const std::vector<std::size_t>& batch, bool training,
                          Rng& drop_rng) {
    const std::size_t b = batch.size();
    const std::size_t k = model.n_meas;
    Tensor meas = Tensor::zeros({b, k});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t c = 0; c < k; ++c) meas.at(i, c) = f.meas.at(batch[i], c);
    ad::NodeId x = tape.input(std::move(meas));

    if (model.cfg.text == TextFeatures::tfidf) {
        const std::size_t v = model.text_dim;
        Tensor text = Tensor::zeros({b, v});
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t c = 0; c < v; ++c) text.at(i, c) = f.tfidf_rows[batch[i]][c];
        x = tape.concat_cols({tape.input(std::move(text)), x});
    } else if (model.cfg.text == TextFeatures::attention) {
        std::vector<ad::NodeId> cls_rows;
        for (std::size_t i : batch) {
            EncodeResult enc = encode(tape, f.notes[i], model.cfg.encoder,
                                      model.text.vocab->size(), training, drop_rng);
            cls_rows.push_back(enc.cls);
        }
        ad::NodeId cls = cls_rows.size() == 1 ? cls_rows[0] : tape.concat_rows(cls_rows);
        x = tape.concat_cols({cls, x});
    }

    for (std::size_t l = 0; l < model.cfg.hidden.size(); ++l) {
        const std::string key = "ffn." + std::to_string(l) + ".";
        x = tape.activation(
            tape.add(tape.matmul(x, tape.param(key + "w")), tape.param(key + "b")),
            model.cfg.act);
        x = tape.dropout(x, model.cfg.dropout, training, drop_rng);
    }
    return tape.add(tape.matmul(x, tape.param("out.w")), tape.param("out.b"));
}

void init_model_params(NeuralSurvModel& model, Rng& rng) {
    if (model.cfg.text == TextFeatures::attention)
        init_encoder_params(model.params, model.cfg.encoder, model.text.vocab->size(), rng);
    std::size_t in_dim = model.text_dim + model.n_meas;
    for (std::size_t l = 0; l < model.cfg.hidden.size(); ++l) {
        const std::string key = "ffn." + std::to_string(l) + ".";
        model.params.add(key + "w", ad::xavier_uniform(in_dim, model.cfg.hidden[l], rng));
        model.params.add(key + "b", Tensor::zeros({1, model.cfg.hidden[l]}));
        in_dim = model.cfg.hidden[l];
    }
    model.params.add("out.w", ad::xavier_uniform(in_dim, 1, rng));
    model.params.add("out.b", Tensor::zeros({1, 1}));
}

}  // namespace

NeuralSurvModel fit_neural(const SurvivalDataset& dataset, const ModelConfig& cfg,
                           const TrainConfig& train, TextArtifacts text) {
    if (dataset.size() == 0) throw std::invalid_argument("fit_neural: empty dataset");
    if (train.epochs == 0) throw std::invalid_argument("fit_neural: epochs must be >= 1");
    if (train.batch == 0) throw std::invalid_argument("fit_neural: batch must be >= 1");
    if (cfg.text == TextFeatures::tfidf && !text.tfidf)
        throw std::invalid_argument("fit_neural: tfidf features need a fitted TfidfModel");
    if (cfg.text == TextFeatures::attention && !text.vocab)
        throw std::invalid_argument("fit_neural: attention features need a Vocabulary");

    NeuralSurvModel model;
    model.cfg = cfg;
    model.text = std::move(text);
    model.n_meas = dataset.schema.size();
    model.text_dim = cfg.text == TextFeatures::tfidf      ? model.text.tfidf->vocab.size()
                     : cfg.text == TextFeatures::attention ? cfg.encoder.d_model
                                                            : 0;

    Featurized f = featurize(model, dataset);
    if (cfg.mode == TaskMode::survival) {
        double ne = 0.0;
        for (double e : f.labels) ne += e;
        if (ne == 0.0)
            throw std::invalid_argument("fit_neural: survival mode needs observed events");
    }

    Rng init_rng(Rng::mix(train.seed, 1));
    Rng shuffle_rng(Rng::mix(train.seed, 2));
    Rng drop_rng(Rng::mix(train.seed, 3));
    init_model_params(model, init_rng);

    ad::AdamState adam;
    adam.lr = train.lr;

    const std::size_t n = dataset.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        shuffle_rng.shuffle(idx);
        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t start = 0; start < n; start += train.batch) {
            std::vector<std::size_t> batch(
                idx.begin() + start,
                idx.begin() + std::min(n, start + train.batch));
            if (cfg.mode == TaskMode::survival) {
                std::sort(batch.begin(), batch.end(), [&](std::size_t a, std::size_t b) {
                    if (f.times[a] != f.times[b]) return f.times[a] > f.times[b];
                    return a < b;
                });
                bool any_event = false;
                for (std::size_t i : batch) any_event = any_event || f.labels[i] != 0.0;
                if (!any_event) continue;  // PLL undefined for this batch
            }
            ad::Tape tape(&model.params);
            ad::NodeId scores = forward_scores(tape, model, f, batch, true, drop_rng);
            ad::NodeId loss;
            if (cfg.mode == TaskMode::mortality) {
                std::vector<double> labels;
                for (std::size_t i : batch) labels.push_back(f.labels[i]);
                loss = tape.bce_loss(tape.sigmoid(scores), labels);
            } else {
                std::vector<double> times, events;
                for (std::size_t i : batch) {
                    times.push_back(f.times[i]);
                    events.push_back(f.labels[i]);
                }
                loss = tape.pll_loss(scores, times, events);
            }
            tape.backward(loss);
            ad::adam_step(adam, model.params);
            epoch_loss += tape.value(loss).v[0] * static_cast<double>(batch.size());
            epoch_count += batch.size();
        }
        if (epoch_count == 0)
            throw std::runtime_error(
                "fit_neural: every PLL batch lacked events; increase batch size");
        model.train_loss.push_back(epoch_loss / static_cast<double>(epoch_count));
    }

    if (cfg.mode == TaskMode::survival) {
        std::vector<double> risks = predict_all(model, dataset);
        model.baseline = breslow(f.times, f.labels, risks);
    }
    return model;
}

double predict(const NeuralSurvModel& model, const SurvivalRecord& record) {
    SurvivalDataset one;
    one.schema = FeatureSchema::synthetic(model.n_meas);  // names irrelevant here
    one.records.push_back(record);
    if (record.measurements.size() != model.n_meas)
        throw std::invalid_argument("predict: record does not match the model schema");
    return predict_all(model, one)[0];
}

std::vector<double> predict_all(const NeuralSurvModel& model, const SurvivalDataset& dataset) {
    Featurized f = featurize(model, dataset);
    Rng no_drop(0);  // eval mode: dropout disabled
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    ad::Tape tape(const_cast<ad::ParamStore*>(&model.params));
    ad::NodeId scores = forward_scores(tape, model, f, all, false, no_drop);
    std::vector<double> out = tape.value(scores).v;
    if (model.cfg.mode == TaskMode::mortality)
        for (double& x : out) x = 1.0 / (1.0 + std::exp(-x));
    return out;
}

AttentionDump attention_for_record(const NeuralSurvModel& model,
                                   const SurvivalRecord& record) {
    if (model.cfg.text != TextFeatures::attention)
        throw std::invalid_argument("attention_for_record: model has no attention encoder");
    auto tokens = clean_text(record.note_text, model.text.stopwords);
    EncodedNote note = encode_note(*model.text.vocab, tokens, model.cfg.encoder.max_len);
    std::vector<std::string> labels;
    labels.push_back("[CLS]");
    for (std::size_t i = 0; i + 2 < note.valid_len; ++i) labels.push_back(tokens[i]);
    labels.push_back("[SEP]");
    Rng no_drop(0);
    ad::Tape tape(const_cast<ad::ParamStore*>(&model.params));
    EncodeResult res = encode(tape, note, model.cfg.encoder, model.text.vocab->size(), false,
                              no_drop, labels);
    res.dump.note_id = record.patient_id;
    return res.dump;
}

}  // namespace notesurv

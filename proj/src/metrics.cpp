#include "notesurv/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace notesurv {

ConfusionMatrix confusion(const std::vector<double>& probs, const std::vector<double>& labels,
                          double threshold) {
    if (probs.empty()) throw std::invalid_argument("confusion: empty input");
    if (probs.size() != labels.size())
        throw std::invalid_argument("confusion: probs/labels length mismatch");
    ConfusionMatrix cm;
    cm.threshold = threshold;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        bool pred = probs[i] >= threshold;
        bool truth = labels[i] != 0.0;
        if (pred && truth)
            ++cm.tp;
        else if (pred && !truth)
            ++cm.fp;
        else if (!pred && truth)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("roc_auc: scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t npos = 0, nneg = 0;
    for (double y : labels) (y != 0.0 ? npos : nneg) += 1;
    if (npos == 0 || nneg == 0)
        throw std::invalid_argument("roc_auc: both classes must be present");

    // Mann-Whitney pair counting; O(n^2) is the reference implementation.
    // Per-index partials keep the result independent of thread count.
    std::vector<double> partial(n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        if (labels[i] == 0.0) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (labels[j] != 0.0) continue;
            if (scores[i] > scores[j])
                acc += 1.0;
            else if (scores[i] == scores[j])
                acc += 0.5;
        }
        partial[i] = acc;
    }
    double concordant = 0.0;
    for (double p : partial) concordant += p;

    RocCurve roc;
    roc.auc = concordant / (static_cast<double>(npos) * static_cast<double>(nneg));

    // threshold sweep over distinct scores, descending
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    roc.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t t = i; t < j; ++t) (labels[order[t]] != 0.0 ? tp : fp) += 1;
        roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(nneg),
                                static_cast<double>(tp) / static_cast<double>(npos));
        i = j;
    }
    return roc;
}

double c_index(const std::vector<double>& risks, const std::vector<double>& times,
               const std::vector<double>& events) {
    const std::size_t n = risks.size();
    if (times.size() != n || events.size() != n)
        throw std::invalid_argument("c_index: input length mismatch");

    std::vector<double> comp_partial(n, 0.0), conc_partial(n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        if (events[i] == 0.0) continue;
        double comp = 0.0, conc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            bool comparable = times[i] < times[j] ||
                              (times[i] == times[j] && events[j] == 0.0);
            if (!comparable) continue;
            comp += 1.0;
            if (risks[i] > risks[j])
                conc += 1.0;
            else if (risks[i] == risks[j])
                conc += 0.5;
        }
        comp_partial[i] = comp;
        conc_partial[i] = conc;
    }
    double comparable = 0.0, concordant = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        comparable += comp_partial[i];
        concordant += conc_partial[i];
    }
    if (comparable == 0.0) throw std::runtime_error("c_index: no comparable pairs");
    return concordant / comparable;
}

std::string EvalReport::to_json_string() const {
    nlohmann::json j;
    j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
    j["c_index"] = cindex ? nlohmann::json(*cindex) : nlohmann::json(nullptr);
    if (conf) {
        j["confusion"] = {{"tn", conf->tn},
                          {"fp", conf->fp},
                          {"fn", conf->fn},
                          {"tp", conf->tp},
                          {"threshold", conf->threshold}};
    } else {
        j["confusion"] = nullptr;
    }
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [fpr, tpr] : roc_points) pts.push_back({fpr, tpr});
    j["roc_points"] = pts;
    j["train_loss"] = train_loss;
    return j.dump(2);
}

}  // namespace notesurv

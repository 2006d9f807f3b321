#pragma once

#include <optional>
#include <string>
#include <vector>

namespace notesurv {

struct ConfusionMatrix {
    std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
    double threshold = 0.5;
    std::size_t total() const { return tn + fp + fn + tp; }
};

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
    double auc = 0.0;
};

// predict 1 iff prob >= threshold
ConfusionMatrix confusion(const std::vector<double>& probs, const std::vector<double>& labels,
                          double threshold = 0.5);

// AUC by pair counting with ties credited 0.5; curve from a threshold sweep
// over distinct scores. Requires both classes present.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<double>& labels);

// Harrell's concordance index. Comparable pairs: T_i < T_j with event_i = 1,
// or T_i = T_j with event_i = 1 and event_j = 0. Tied risks credit 0.5.
double c_index(const std::vector<double>& risks, const std::vector<double>& times,
               const std::vector<double>& events);

// Metrics bundle for one fitted model evaluation.
struct EvalReport {
    std::optional<double> auc;
    std::optional<double> cindex;
    std::optional<ConfusionMatrix> conf;
    std::vector<std::pair<double, double>> roc_points;
    std::vector<double> train_loss;  // per-epoch mean training loss

    std::string to_json_string() const;
};

}  // namespace notesurv

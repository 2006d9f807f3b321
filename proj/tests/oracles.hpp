#pragma once

// Brute-force reference implementations used only by tests. Each one follows
// the defining formula directly (explicit risk-set loops, exhaustive pair
// enumeration) and stays independent of the library code paths it checks.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

// average negative log partial likelihood, risk sets by >= written as loops
inline double pll_brute(const std::vector<double>& h, const std::vector<double>& times,
                        const std::vector<double>& events) {
    const std::size_t n = h.size();
    double sum = 0.0, ne = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] == 0.0) continue;
        ne += 1.0;
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (times[j] >= times[i]) denom += std::exp(h[j]);
        sum += h[i] - std::log(denom);
    }
    if (ne == 0.0) throw std::runtime_error("pll_brute: no events");
    return -sum / ne;
}

// cumulative baseline hazard evaluated at t: sum over events with T_i <= t of
// 1 / sum_{j : T_j >= T_i} exp(h_j)
inline double breslow_brute_at(double t, const std::vector<double>& times,
                               const std::vector<double>& events,
                               const std::vector<double>& h) {
    const std::size_t n = times.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] == 0.0 || times[i] > t) continue;
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (times[j] >= times[i]) denom += std::exp(h[j]);
        total += 1.0 / denom;
    }
    return total;
}

// exhaustive Harrell pairs
inline double cindex_brute(const std::vector<double>& risks, const std::vector<double>& times,
                           const std::vector<double>& events) {
    const std::size_t n = risks.size();
    double comparable = 0.0, concordant = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            bool ok = times[i] < times[j] || (times[i] == times[j] && events[j] == 0.0);
            if (!ok) continue;
            comparable += 1.0;
            if (risks[i] > risks[j])
                concordant += 1.0;
            else if (risks[i] == risks[j])
                concordant += 0.5;
        }
    }
    if (comparable == 0.0) throw std::runtime_error("cindex_brute: no comparable pairs");
    return concordant / comparable;
}

// exhaustive positive/negative pair counting
inline double auc_brute(const std::vector<double>& scores, const std::vector<double>& labels) {
    double pairs = 0.0, wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0.0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0.0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    if (pairs == 0.0) throw std::runtime_error("auc_brute: need both classes");
    return wins / pairs;
}

// Kolmogorov-Smirnov statistic against Exponential(rate)
inline double ks_exponential(std::vector<double> samples, double rate) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double cdf = 1.0 - std::exp(-rate * samples[i]);
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::fabs(cdf - lo), std::fabs(hi - cdf)));
    }
    return d;
}

// one Adam step on a single scalar, written independently
inline double adam_scalar_step(double theta, double grad, double lr, double beta1,
                               double beta2, double eps, double& m, double& v, int t) {
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad * grad;
    double mhat = m / (1 - std::pow(beta1, t));
    double vhat = v / (1 - std::pow(beta2, t));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
}

// Spearman rank correlation (average ranks for ties)
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& x) {
        const std::size_t n = x.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && x[order[j]] == x[order[i]]) ++j;
            double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
            for (std::size_t t = i; t < j; ++t) r[order[t]] = avg;
            i = j;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace oracle

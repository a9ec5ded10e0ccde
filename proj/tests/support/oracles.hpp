#pragma once

// Brute-force reference implementations used only by tests. These evaluate
// the defining formulas by direct summation, with no max-subtraction or
// other stabilization, so they are an independent check on the library path.

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

inline double naive_sim(const std::vector<Eigen::VectorXd>& reps, int i, int j, double tau,
                        bool include_self = false) {
    double denom = 0.0;
    for (int k = 0; k < static_cast<int>(reps.size()); ++k) {
        if (!include_self && k == i) continue;
        denom += std::exp(reps[i].dot(reps[k]) / tau);
    }
    return std::exp(reps[i].dot(reps[j]) / tau) / denom;
}

inline double naive_contrastive_loss(const std::vector<Eigen::VectorXd>& reps,
                                     const std::vector<std::pair<int, int>>& pairs,
                                     bool any_toxic, double tau, bool include_self = false) {
    if (pairs.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [i, j] : pairs) {
        acc += -std::log(naive_sim(reps, i, j, tau, include_self));
        acc += -std::log(naive_sim(reps, j, i, tau, include_self));
    }
    const double unweighted = acc / (2.0 * static_cast<double>(pairs.size()));
    return (any_toxic ? 1.5 : 1.0) * unweighted;
}

// Direct per-class summation of label-smoothed CE over selected rows.
inline double naive_ce_label_smoothed(const Eigen::MatrixXd& logits,
                                      const std::vector<int>& targets,
                                      const std::vector<uint8_t>& mask, double eps) {
    double sum = 0.0;
    std::size_t count = 0;
    const int V = static_cast<int>(logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        double z = 0.0;
        for (int v = 0; v < V; ++v) z += std::exp(logits(i, v));
        for (int v = 0; v < V; ++v) {
            const double q = (v == targets[static_cast<std::size_t>(i)] ? 1.0 - eps : 0.0) +
                             eps / static_cast<double>(V);
            sum -= q * std::log(std::exp(logits(i, v)) / z);
        }
        ++count;
    }
    return sum / static_cast<double>(count);
}

inline double naive_pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle

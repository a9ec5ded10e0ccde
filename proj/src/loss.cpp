#include "dbc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dbc {

PooledRepresentation ne_pool(const Eigen::MatrixXd& z, const std::vector<uint8_t>& mask) {
    if (z.rows() == 0) throw ValidationError("ne_pool: empty sequence");
    if (static_cast<std::size_t>(z.rows()) != mask.size()) {
        throw ValidationError("ne_pool: mask length " + std::to_string(mask.size()) +
                              " does not match " + std::to_string(z.rows()) + " tokens");
    }
    double total = 0.0;
    for (uint8_t m : mask) total += m ? 1.0 : 0.0;

    PooledRepresentation rep;
    rep.r = Eigen::VectorXd::Zero(z.cols());
    if (total == 0.0) {
        // Entity-free sequence: uniform mean over all tokens.
        for (Eigen::Index i = 0; i < z.rows(); ++i) rep.r += z.row(i).transpose();
        rep.r /= static_cast<double>(z.rows());
        return rep;
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) rep.r += z.row(i).transpose();
    }
    rep.r /= total;
    return rep;
}

Eigen::MatrixXd ne_pool_backward(const Eigen::VectorXd& d_r, const std::vector<uint8_t>& mask) {
    const Eigen::Index L = static_cast<Eigen::Index>(mask.size());
    Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(L, d_r.size());
    double total = 0.0;
    for (uint8_t m : mask) total += m ? 1.0 : 0.0;
    if (total == 0.0) {
        const double w = 1.0 / static_cast<double>(L);
        for (Eigen::Index i = 0; i < L; ++i) d_z.row(i) = w * d_r.transpose();
        return d_z;
    }
    const double w = 1.0 / total;
    for (Eigen::Index i = 0; i < L; ++i) {
        if (mask[static_cast<std::size_t>(i)]) d_z.row(i) = w * d_r.transpose();
    }
    return d_z;
}

namespace {

// Softmax over j in the denominator set of row i, with max subtraction.
// Excluded entries are exactly zero.
Eigen::VectorXd softmax_sim_row(const std::vector<Eigen::VectorXd>& reps, std::size_t i,
                                double tau, bool include_self) {
    const std::size_t n = reps.size();
    Eigen::VectorXd logits(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        if (!include_self && j == i) continue;
        logits(j) = reps[i].dot(reps[j]) / tau;
        mx = std::max(mx, logits(j));
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!include_self && j == i) continue;
        out(j) = std::exp(logits(j) - mx);
        sum += out(j);
    }
    out /= sum;
    return out;
}

// log sim(a, b) computed in the same stabilized fashion.
double log_sim(const std::vector<Eigen::VectorXd>& reps, std::size_t a, std::size_t b,
               double tau, bool include_self) {
    const std::size_t n = reps.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        if (!include_self && k == a) continue;
        mx = std::max(mx, reps[a].dot(reps[k]) / tau);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!include_self && k == a) continue;
        sum += std::exp(reps[a].dot(reps[k]) / tau - mx);
    }
    return (reps[a].dot(reps[b]) / tau - mx) - std::log(sum);
}

void check_pairs(const std::vector<Eigen::VectorXd>& reps,
                 const std::vector<std::pair<int, int>>& pairs) {
    const int n = static_cast<int>(reps.size());
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
            throw ValidationError("contrastive_loss: invalid pair (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") for " + std::to_string(n) +
                                  " representations");
        }
    }
}

}  // namespace

Eigen::VectorXd similarity_row(const std::vector<Eigen::VectorXd>& reps, std::size_t i,
                               double tau, bool include_self) {
    if (tau <= 0.0) throw ValidationError("similarity_row: tau must be > 0");
    if (reps.size() < 2) throw ValidationError("similarity_row: need at least 2 representations");
    if (i >= reps.size()) throw ValidationError("similarity_row: index out of range");
    return softmax_sim_row(reps, i, tau, include_self);
}

double toxic_weight(const std::vector<uint8_t>& toxic_flags) {
    for (uint8_t f : toxic_flags) {
        if (f) return 1.5;
    }
    return 1.0;
}

ContrastiveResult contrastive_loss(const std::vector<Eigen::VectorXd>& reps,
                                   const std::vector<std::pair<int, int>>& positive_pairs,
                                   const std::vector<uint8_t>& toxic_flags, double tau,
                                   bool include_self) {
    if (tau <= 0.0) throw ValidationError("contrastive_loss: tau must be > 0");
    check_pairs(reps, positive_pairs);

    ContrastiveResult result;
    result.n_pairs = positive_pairs.size();
    result.w_tox = toxic_weight(toxic_flags);
    if (positive_pairs.empty()) {
        result.value = 0.0;
        result.active = false;
        return result;
    }
    double acc = 0.0;
    for (const auto& [i, j] : positive_pairs) {
        acc -= log_sim(reps, static_cast<std::size_t>(i), static_cast<std::size_t>(j), tau,
                       include_self);
        acc -= log_sim(reps, static_cast<std::size_t>(j), static_cast<std::size_t>(i), tau,
                       include_self);
    }
    const double unweighted = acc / (2.0 * static_cast<double>(positive_pairs.size()));
    // Single final multiplication keeps the toxic/clean ratio exactly 1.5.
    result.value = result.w_tox * unweighted;
    result.active = true;
    return result;
}

std::vector<Eigen::VectorXd> contrastive_loss_backward(
    const std::vector<Eigen::VectorXd>& reps,
    const std::vector<std::pair<int, int>>& positive_pairs,
    const std::vector<uint8_t>& toxic_flags, double tau, bool include_self) {
    if (tau <= 0.0) throw ValidationError("contrastive_loss_backward: tau must be > 0");
    check_pairs(reps, positive_pairs);

    const std::size_t n = reps.size();
    std::vector<Eigen::VectorXd> grads(n);
    for (std::size_t i = 0; i < n; ++i) {
        grads[i] = Eigen::VectorXd::Zero(n == 0 ? 0 : reps[0].size());
    }
    if (positive_pairs.empty()) return grads;

    const double w = toxic_weight(toxic_flags);
    const double coeff = w / (2.0 * static_cast<double>(positive_pairs.size()));

    std::map<std::size_t, Eigen::VectorXd> row_cache;
    auto row = [&](std::size_t a) -> const Eigen::VectorXd& {
        auto it = row_cache.find(a);
        if (it == row_cache.end()) {
            it = row_cache.emplace(a, softmax_sim_row(reps, a, tau, include_self)).first;
        }
        return it->second;
    };

    auto add_ordered = [&](std::size_t a, std::size_t b) {
        const Eigen::VectorXd& p = row(a);
        // d(-log sim(a,b))/d r_a
        Eigen::VectorXd ga = -reps[b] / tau;
        for (std::size_t k = 0; k < n; ++k) {
            if (p(static_cast<Eigen::Index>(k)) == 0.0) continue;
            const double factor = (include_self && k == a) ? 2.0 : 1.0;
            ga += factor * p(static_cast<Eigen::Index>(k)) * reps[k] / tau;
        }
        grads[a] += coeff * ga;
        // denominator terms for every other representation
        for (std::size_t k = 0; k < n; ++k) {
            if (k == a || p(static_cast<Eigen::Index>(k)) == 0.0) continue;
            grads[k] += coeff * p(static_cast<Eigen::Index>(k)) * reps[a] / tau;
        }
        // numerator term for b
        grads[b] -= coeff * reps[a] / tau;
    };

    for (const auto& [i, j] : positive_pairs) {
        add_ordered(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        add_ordered(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
    }
    return grads;
}

std::pair<double, std::size_t> ce_label_smoothed_sum(const Eigen::MatrixXd& logits,
                                                     const std::vector<int>& targets,
                                                     const std::vector<uint8_t>& mask,
                                                     double eps) {
    if (eps < 0.0 || eps >= 1.0) {
        throw ValidationError("ce_label_smoothed: eps must be in [0,1)");
    }
    const std::size_t L = static_cast<std::size_t>(logits.rows());
    if (targets.size() != L || mask.size() != L) {
        throw ValidationError("ce_label_smoothed: targets/mask length mismatch");
    }
    const Eigen::Index V = logits.cols();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < L; ++i) {
        if (!mask[i]) continue;
        if (targets[i] < 0 || targets[i] >= V) {
            throw ValidationError("ce_label_smoothed: target id out of range at position " +
                                  std::to_string(i));
        }
        const auto x = logits.row(static_cast<Eigen::Index>(i));
        const double mx = x.maxCoeff();
        double z = 0.0;
        for (Eigen::Index v = 0; v < V; ++v) z += std::exp(x(v) - mx);
        const double lse = mx + std::log(z);
        // -sum_v q_v log p_v with q = (1-eps) onehot + eps/V
        const double log_p_target = x(targets[i]) - lse;
        const double sum_log_p = x.sum() - static_cast<double>(V) * lse;
        sum -= (1.0 - eps) * log_p_target + (eps / static_cast<double>(V)) * sum_log_p;
        ++count;
    }
    return {sum, count};
}

double ce_label_smoothed(const Eigen::MatrixXd& logits, const std::vector<int>& targets,
                         const std::vector<uint8_t>& mask, double eps) {
    const auto [sum, count] = ce_label_smoothed_sum(logits, targets, mask, eps);
    if (count == 0) {
        throw ValidationError("ce_label_smoothed: mask selects no positions");
    }
    return sum / static_cast<double>(count);
}

Eigen::MatrixXd ce_label_smoothed_backward(const Eigen::MatrixXd& logits,
                                           const std::vector<int>& targets,
                                           const std::vector<uint8_t>& mask, double eps,
                                           double scale) {
    const std::size_t L = static_cast<std::size_t>(logits.rows());
    const Eigen::Index V = logits.cols();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(logits.rows(), V);
    for (std::size_t i = 0; i < L; ++i) {
        if (!mask[i]) continue;
        const auto x = logits.row(static_cast<Eigen::Index>(i));
        const double mx = x.maxCoeff();
        Eigen::RowVectorXd p(V);
        double z = 0.0;
        for (Eigen::Index v = 0; v < V; ++v) {
            p(v) = std::exp(x(v) - mx);
            z += p(v);
        }
        p /= z;
        // d/dx of -sum q log softmax(x) is p - q.
        p.array() -= eps / static_cast<double>(V);
        p(targets[i]) -= 1.0 - eps;
        d.row(static_cast<Eigen::Index>(i)) = scale * p;
    }
    return d;
}

LossBreakdown combined_loss(double ce, double cl, double alpha) {
    if (!std::isfinite(ce) || !std::isfinite(cl)) {
        throw Error("combined_loss: non-finite inputs");
    }
    LossBreakdown out;
    out.ce = ce;
    out.cl = cl;
    out.alpha = alpha;
    out.total = ce + alpha * cl;
    return out;
}

}  // namespace dbc

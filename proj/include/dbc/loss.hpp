#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dbc/common.hpp"

namespace dbc {

// Entity-weighted pooled sequence embedding.
struct PooledRepresentation {
    Eigen::VectorXd r;
    int source_index = -1;
};

struct LossBreakdown {
    double ce = 0.0;
    double cl = 0.0;  // already includes w_tox
    double w_tox = 1.0;
    double alpha = 0.0;
    double total = 0.0;
    std::size_t n_pairs = 0;
    bool contrast_active = true;
};

// r = sum_i m_i z_i / sum_i m_i; an all-zero mask falls back to the uniform
// mean over all tokens so entity-free sequences still contribute.
PooledRepresentation ne_pool(const Eigen::MatrixXd& z, const std::vector<uint8_t>& mask);

// Gradient of the pooled representation w.r.t. the per-token embeddings.
Eigen::MatrixXd ne_pool_backward(const Eigen::VectorXd& d_r, const std::vector<uint8_t>& mask);

// Temperature-scaled similarity row: softmax over j != i of r_i . r_j / tau
// (the self term is excluded unless include_self is set), computed with
// max-subtraction. Entry i of the result is zero under self-exclusion.
Eigen::VectorXd similarity_row(const std::vector<Eigen::VectorXd>& reps, std::size_t i,
                               double tau, bool include_self = false);

// 1.5 when any sequence in the batch carries a toxic flag, else 1.0.
double toxic_weight(const std::vector<uint8_t>& toxic_flags);

struct ContrastiveResult {
    double value = 0.0;
    std::size_t n_pairs = 0;
    bool active = false;  // false when the batch has no positive pairs
    double w_tox = 1.0;
};

// Pairwise contrastive loss with both directions averaged per unordered
// pair:
//   L_cl = w_tox * (-sum_{(i,j) in P} [log sim(i,j) + log sim(j,i)]) / (2|P|)
// The toxic weight is applied as one final multiplication so the
// toxic/clean ratio is exactly 1.5.
ContrastiveResult contrastive_loss(const std::vector<Eigen::VectorXd>& reps,
                                   const std::vector<std::pair<int, int>>& positive_pairs,
                                   const std::vector<uint8_t>& toxic_flags, double tau,
                                   bool include_self = false);

// Gradient of the contrastive loss w.r.t. every representation.
std::vector<Eigen::VectorXd> contrastive_loss_backward(
    const std::vector<Eigen::VectorXd>& reps,
    const std::vector<std::pair<int, int>>& positive_pairs,
    const std::vector<uint8_t>& toxic_flags, double tau, bool include_self = false);

// Label-smoothed cross entropy over mask-selected positions:
// q = (1-eps) * onehot + eps / V, loss = mean over selected tokens of
// -sum_v q_v log softmax(logits)_v.
double ce_label_smoothed(const Eigen::MatrixXd& logits, const std::vector<int>& targets,
                         const std::vector<uint8_t>& mask, double eps);

// Sum/count form for batch-level normalization across sequences.
std::pair<double, std::size_t> ce_label_smoothed_sum(const Eigen::MatrixXd& logits,
                                                     const std::vector<int>& targets,
                                                     const std::vector<uint8_t>& mask, double eps);

// d(loss)/d(logits) where the loss is the *sum* over selected tokens scaled
// by `scale` (callers pass 1/N for a batch-wide mean).
Eigen::MatrixXd ce_label_smoothed_backward(const Eigen::MatrixXd& logits,
                                           const std::vector<int>& targets,
                                           const std::vector<uint8_t>& mask, double eps,
                                           double scale);

// total = ce + alpha * cl, evaluated exactly as written.
LossBreakdown combined_loss(double ce, double cl, double alpha);

}  // namespace dbc

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dbc/common.hpp"

namespace dbc {

enum class Precision { full, reduced };

std::string precision_name(Precision p);
Precision precision_from_name(const std::string& name);

struct ModelConfig {
    int vocab_size = 512;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int max_length = 256;
    int proj_hidden = 64;
    int proj_out = 32;
    Precision precision = Precision::full;
    uint64_t seed = 0;

    void validate() const;
};

// Contrastive projection head: h = GELU(x W1 + b1), z = normalize(h W2 + b2).
// Weights are stored input-major (in x out); biases are column matrices.
struct ProjectionHead {
    Eigen::MatrixXd w1;  // d_model x proj_hidden
    Eigen::MatrixXd b1;  // proj_hidden x 1
    Eigen::MatrixXd w2;  // proj_hidden x proj_out
    Eigen::MatrixXd b2;  // proj_out x 1
};

struct LayerParams {
    Eigen::MatrixXd ln1_g, ln1_b;
    Eigen::MatrixXd wq, bq, wk, bk, wv, bv, wo, bo;
    Eigen::MatrixXd ln2_g, ln2_b;
    Eigen::MatrixXd w_fc, b_fc;      // d_model x 4*d_model
    Eigen::MatrixXd w_proj, b_proj;  // 4*d_model x d_model
};

// Full parameter set of the desk-scale causal LM plus the projection head.
struct Parameters {
    ModelConfig config;
    Eigen::MatrixXd tok_emb;  // vocab x d_model
    Eigen::MatrixXd pos_emb;  // max_length x d_model
    std::vector<LayerParams> layers;
    Eigen::MatrixXd ln_f_g, ln_f_b;
    Eigen::MatrixXd w_out;  // d_model x vocab
    ProjectionHead head;
};

// Stable, named enumeration of every parameter matrix. The same order backs
// initialization, checkpointing, SGD updates and finite-difference probes.
std::vector<std::pair<std::string, Eigen::MatrixXd*>> parameter_list(Parameters& params);
std::vector<std::pair<std::string, const Eigen::MatrixXd*>> parameter_list(
    const Parameters& params);

Parameters init_model(const ModelConfig& config);
// Same shapes as init_model, all entries zero. Used as a gradient holder.
Parameters zeros_like(const Parameters& params);

// Reduced precision is simulated by rounding every parameter through float.
void round_to_reduced(Parameters& params);

struct ForwardOutput {
    Eigen::MatrixXd hidden;  // L x d_model, final-layer hidden states
    Eigen::MatrixXd logits;  // L x vocab
};

struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd rstd;
};

struct LayerCache {
    Eigen::MatrixXd x_in;
    LnCache ln1;
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> attn_probs;  // one L x L matrix per head
    Eigen::MatrixXd attn_concat;              // pre-Wo head concatenation
    Eigen::MatrixXd x_mid;                    // after attention residual
    LnCache ln2;
    Eigen::MatrixXd mlp_pre;  // pre-GELU
    Eigen::MatrixXd mlp_act;  // post-GELU
};

struct ForwardCache {
    std::vector<int> tokens;
    std::vector<LayerCache> layers;
    Eigen::MatrixXd x_last;
    LnCache ln_f;
    Eigen::MatrixXd hidden;
};

ForwardOutput forward(const Parameters& params, const std::vector<int>& tokens);
ForwardOutput forward_cached(const Parameters& params, const std::vector<int>& tokens,
                             ForwardCache& cache);

// Accumulates gradients of a scalar loss into `grads`, given the loss
// gradient w.r.t. logits and (optionally empty) an extra gradient flowing
// into the final hidden states from the projection-head path.
void backward(const Parameters& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_logits, const Eigen::MatrixXd& d_hidden_extra,
              Parameters& grads);

struct ProjectionCache {
    Eigen::MatrixXd input;  // the hidden states fed in
    Eigen::MatrixXd pre_act;
    Eigen::MatrixXd act;
    Eigen::MatrixXd pre_norm;
    Eigen::VectorXd norms;
};

// Token-wise projection to unit-norm embeddings. Near-zero pre-normalization
// vectors raise an Error under full precision; reduced precision adds a
// 1e-8 clamp to the norm instead.
Eigen::MatrixXd project(const ProjectionHead& head, const Eigen::MatrixXd& hidden,
                        Precision precision = Precision::full);
Eigen::MatrixXd project_cached(const ProjectionHead& head, const Eigen::MatrixXd& hidden,
                               Precision precision, ProjectionCache& cache);
// Returns d(hidden) and accumulates head gradients.
Eigen::MatrixXd project_backward(const ProjectionHead& head, const ProjectionCache& cache,
                                 const Eigen::MatrixXd& d_z, Precision precision,
                                 ProjectionHead& head_grads);

// Exact Gaussian-CDF GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

// In-place SGD step: params -= lr * grads.
void sgd_step(Parameters& params, const Parameters& grads, double lr);

// Versioned binary checkpoint; write/read round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Parameters& params, uint64_t step);
std::pair<Parameters, uint64_t> load_checkpoint(const std::string& path);

// Minimal surface a model must expose for inference-time substitution:
// final-layer hidden states and next-token logits. Pretrained trunks wrap
// this without exposing internals.
class CausalLmAdapter {
public:
    virtual ~CausalLmAdapter() = default;
    virtual ForwardOutput forward_tokens(const std::vector<int>& tokens) const = 0;
    virtual int vocab_size() const = 0;
    virtual int context_limit() const = 0;
};

class DeskModelAdapter final : public CausalLmAdapter {
public:
    explicit DeskModelAdapter(const Parameters& params) : params_(&params) {}
    ForwardOutput forward_tokens(const std::vector<int>& tokens) const override {
        return forward(*params_, tokens);
    }
    int vocab_size() const override { return params_->config.vocab_size; }
    int context_limit() const override { return params_->config.max_length; }

private:
    const Parameters* params_;
};

// Greedy continuation of the prompt; stops at eos or when the sequence
// reaches max_new_tokens / the model context limit.
std::vector<int> generate_greedy(const CausalLmAdapter& model, std::vector<int> prompt_tokens,
                                 int max_new_tokens, int eos_id);
std::vector<int> generate_greedy(const Parameters& params, std::vector<int> prompt_tokens,
                                 int max_new_tokens, int eos_id);

}  // namespace dbc

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbc/backends.hpp"
#include "dbc/batching.hpp"
#include "dbc/loss.hpp"
#include "dbc/model.hpp"

namespace dbc {

struct TrainConfig {
    ModelConfig model;
    double learning_rate = 5e-4;
    int epochs = 4;
    int warmup_steps = 5;
    std::string schedule = "linear";
    double alpha = 4.0;
    double tau = 1.0;
    double label_smoothing = 0.1;
    BatchConstraints batch_constraints;
    uint64_t seed = 0;
    std::string checkpoint_dir;
    // Ablation switch for the similarity denominator convention; the default
    // excludes the self term.
    bool similarity_include_self = false;

    void validate() const;
};

// Named presets mirroring the reference per-model training rows; the desk
// model dimensions stand in for the pretrained trunks.
TrainConfig train_preset(const std::string& name);

struct StepRecord {
    uint64_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct EpochSnapshot {
    int epoch = 0;
    double mean_total = 0.0;
    double mean_ce = 0.0;
    double mean_cl = 0.0;
    double wall_seconds = 0.0;
};

struct RunHistory {
    std::vector<StepRecord> steps;
    std::vector<EpochSnapshot> epochs;

    // One JSON object per step: {step, lr, ce, cl, w_tox, total}.
    std::string to_run_log() const;
};

// Linear warmup then linear decay to zero at total_steps.
double lr_at(int64_t step, double peak_lr, int64_t warmup, int64_t total_steps);

struct TrainState {
    Parameters params;
    uint64_t step = 0;
};

// Combined objective over one batch without touching the parameters:
// forward, projection, NE pooling, contrastive loss over P, label-smoothed
// CE over the shifted summary region.
LossBreakdown compute_batch_loss(const Parameters& params, const Batch& batch,
                                 const TrainConfig& config);

// Same forward pass plus gradient accumulation into `grads`.
LossBreakdown compute_batch_gradients(const Parameters& params, const Batch& batch,
                                      const TrainConfig& config, Parameters& grads);

// One optimizer step over a batch: forward, projection, pooling, contrastive
// and CE losses, combined objective, SGD update at the scheduled rate.
LossBreakdown train_step(TrainState& state, const Batch& batch, const TrainConfig& config,
                         int64_t total_steps);

struct TrainResult {
    Parameters params;
    RunHistory history;
};

TrainResult train(const TrainConfig& config, const std::vector<AugmentedSample>& dataset);

struct AblationRow {
    double alpha = 0.0;
    double toxicity = 0.0;
    double faithfulness = 0.0;
    std::string status;  // "ok" | "failed"
};

struct AblationTable {
    std::vector<AblationRow> rows;

    // Header "alpha,toxicity,faithfulness,status"; failed rows leave the
    // metric fields empty.
    std::string to_csv() const;
};

// Trains and evaluates once per alpha value with identical seeds. A failing
// run marks its row "failed" and the sweep continues.
AblationTable ablate_alpha(const TrainConfig& config, const std::vector<AugmentedSample>& dataset,
                           const std::vector<AugmentedSample>& eval_set,
                           const std::vector<double>& values, const BackendSuite& suite,
                           const GenParams& gen_params = {});

}  // namespace dbc

#include "dbc/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbc/eval.hpp"

namespace dbc {

void TrainConfig::validate() const {
    model.validate();
    batch_constraints.validate();
    if (learning_rate <= 0.0) throw ValidationError("TrainConfig: learning_rate must be > 0");
    if (epochs < 0) throw ValidationError("TrainConfig: epochs must be >= 0");
    if (warmup_steps < 0) throw ValidationError("TrainConfig: warmup_steps must be >= 0");
    if (schedule != "linear") {
        throw ValidationError("TrainConfig: unsupported schedule '" + schedule + "'");
    }
    if (alpha < 0.0) throw ValidationError("TrainConfig: alpha must be >= 0");
    if (tau <= 0.0) throw ValidationError("TrainConfig: tau must be > 0");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw ValidationError("TrainConfig: label_smoothing must be in [0,1)");
    }
    if (batch_constraints.max_length > model.max_length) {
        throw ValidationError("TrainConfig: batch max_length exceeds model max_length");
    }
}

TrainConfig train_preset(const std::string& name) {
    TrainConfig cfg;
    if (name == "gpt2") {
        cfg.learning_rate = 5e-4;
        cfg.model.precision = Precision::full;
        cfg.model.max_length = 512;
        cfg.batch_constraints.max_length = 512;
        cfg.batch_constraints.max_positives.reset();
        cfg.batch_constraints.max_negatives.reset();
        cfg.epochs = 4;
    } else if (name == "phi2") {
        cfg.learning_rate = 2e-5;
        cfg.model.precision = Precision::reduced;
        cfg.model.max_length = 340;
        cfg.batch_constraints.max_length = 340;
        cfg.batch_constraints.max_positives = 3;
        cfg.batch_constraints.max_negatives = 5;
        cfg.epochs = 3;
    } else if (name == "llama2_7b") {
        cfg.learning_rate = 2e-5;
        cfg.model.precision = Precision::reduced;
        cfg.model.max_length = 340;
        cfg.batch_constraints.max_length = 340;
        cfg.batch_constraints.max_positives = 2;
        cfg.batch_constraints.max_negatives = 3;
        cfg.epochs = 3;
    } else if (name == "desk") {
        // Commodity-CPU smoke scale: small context, SGD rate tuned so the
        // contrastive term keeps learning instead of collapsing under CE.
        cfg.learning_rate = 0.005;
        cfg.model.precision = Precision::full;
        cfg.model.max_length = 256;
        cfg.batch_constraints.max_length = 256;
        cfg.epochs = 4;
    } else {
        throw ValidationError("unknown training preset '" + name +
                              "' (expected gpt2|phi2|llama2_7b|desk)");
    }
    return cfg;
}

double lr_at(int64_t step, double peak_lr, int64_t warmup, int64_t total_steps) {
    if (warmup >= total_steps) {
        throw ValidationError("lr_at: warmup (" + std::to_string(warmup) +
                              ") must be < total_steps (" + std::to_string(total_steps) + ")");
    }
    if (step < 0 || step > total_steps) {
        throw ValidationError("lr_at: step " + std::to_string(step) + " outside [0, " +
                              std::to_string(total_steps) + "]");
    }
    if (step <= warmup) {
        if (warmup == 0) return peak_lr;
        return peak_lr * (static_cast<double>(step) / static_cast<double>(warmup));
    }
    return peak_lr * (static_cast<double>(total_steps - step) /
                      static_cast<double>(total_steps - warmup));
}

std::string RunHistory::to_run_log() const {
    std::ostringstream out;
    for (const StepRecord& s : steps) {
        nlohmann::json j{{"step", s.step}, {"lr", s.lr},         {"ce", s.loss.ce},
                         {"cl", s.loss.cl}, {"w_tox", s.loss.w_tox}, {"total", s.loss.total}};
        out << j.dump() << '\n';
    }
    return out.str();
}

namespace {

struct BatchForward {
    std::vector<ForwardCache> fwd_caches;
    std::vector<ProjectionCache> proj_caches;
    std::vector<Eigen::MatrixXd> logits;
    std::vector<std::vector<int>> targets;
    std::vector<std::vector<uint8_t>> shifted_mask;
    std::vector<Eigen::VectorXd> reps;
    std::size_t ce_count = 0;
    LossBreakdown breakdown;
};

BatchForward batch_forward(const Parameters& params, const Batch& batch,
                           const TrainConfig& config) {
    const std::size_t n = batch.size();
    if (n == 0) throw ValidationError("train_step: empty batch");

    BatchForward fwd;
    fwd.fwd_caches.resize(n);
    fwd.proj_caches.resize(n);
    fwd.logits.resize(n);
    fwd.targets.resize(n);
    fwd.shifted_mask.resize(n);
    fwd.reps.resize(n);

    double ce_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<int>& tokens = batch.sequences[i];
        const ForwardOutput out = forward_cached(params, tokens, fwd.fwd_caches[i]);
        fwd.logits[i] = out.logits;

        // Next-token targets: position t is scored when token t+1 lies in the
        // summary region.
        const std::size_t L = tokens.size();
        fwd.targets[i].assign(L, 0);
        fwd.shifted_mask[i].assign(L, 0);
        for (std::size_t t = 0; t + 1 < L; ++t) {
            fwd.targets[i][t] = tokens[t + 1];
            fwd.shifted_mask[i][t] = batch.ce_mask[i][t + 1];
        }
        const auto [seq_sum, seq_count] = ce_label_smoothed_sum(
            fwd.logits[i], fwd.targets[i], fwd.shifted_mask[i], config.label_smoothing);
        ce_sum += seq_sum;
        fwd.ce_count += seq_count;

        const Eigen::MatrixXd z = project_cached(params.head, out.hidden,
                                                 config.model.precision, fwd.proj_caches[i]);
        fwd.reps[i] = ne_pool(z, batch.entity_mask[i]).r;
    }
    if (fwd.ce_count == 0) throw ValidationError("train_step: batch selects no CE tokens");
    const double ce_mean = ce_sum / static_cast<double>(fwd.ce_count);

    const ContrastiveResult cl = contrastive_loss(fwd.reps, batch.positive_pairs,
                                                  batch.toxic_flags, config.tau,
                                                  config.similarity_include_self);

    fwd.breakdown = combined_loss(ce_mean, cl.value, config.alpha);
    fwd.breakdown.w_tox = cl.w_tox;
    fwd.breakdown.n_pairs = cl.n_pairs;
    fwd.breakdown.contrast_active = cl.active;

    if (!std::isfinite(fwd.breakdown.total)) {
        std::string ids;
        for (const std::string& g : batch.group_ids) {
            if (ids.find(g) == std::string::npos) {
                if (!ids.empty()) ids += ", ";
                ids += g;
            }
        }
        throw Error("train_step: non-finite loss (batch groups: " + ids + ")");
    }
    return fwd;
}

}  // namespace

LossBreakdown compute_batch_loss(const Parameters& params, const Batch& batch,
                                 const TrainConfig& config) {
    return batch_forward(params, batch, config).breakdown;
}

LossBreakdown compute_batch_gradients(const Parameters& params, const Batch& batch,
                                      const TrainConfig& config, Parameters& grads) {
    BatchForward fwd = batch_forward(params, batch, config);

    // CE flows through the logits; the alpha-scaled contrastive loss flows
    // through pooling and the projection head into the final hidden states.
    const std::vector<Eigen::VectorXd> d_reps = contrastive_loss_backward(
        fwd.reps, batch.positive_pairs, batch.toxic_flags, config.tau,
        config.similarity_include_self);
    const double ce_scale = 1.0 / static_cast<double>(fwd.ce_count);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Eigen::MatrixXd d_logits = ce_label_smoothed_backward(
            fwd.logits[i], fwd.targets[i], fwd.shifted_mask[i], config.label_smoothing,
            ce_scale);
        const Eigen::MatrixXd d_z =
            ne_pool_backward(config.alpha * d_reps[i], batch.entity_mask[i]);
        const Eigen::MatrixXd d_hidden = project_backward(params.head, fwd.proj_caches[i], d_z,
                                                          config.model.precision, grads.head);
        backward(params, fwd.fwd_caches[i], d_logits, d_hidden, grads);
    }
    return fwd.breakdown;
}

LossBreakdown train_step(TrainState& state, const Batch& batch, const TrainConfig& config,
                         int64_t total_steps) {
    Parameters grads = zeros_like(state.params);
    const LossBreakdown breakdown = compute_batch_gradients(state.params, batch, config, grads);
    const double lr = lr_at(static_cast<int64_t>(state.step), config.learning_rate,
                            config.warmup_steps, total_steps);
    sgd_step(state.params, grads, lr);
    ++state.step;
    return breakdown;
}

namespace {

void ensure_writable_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create checkpoint dir '" + dir + "': " + ec.message());
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw Error("checkpoint dir '" + dir + "' is not writable");
    }
    fs::remove(probe, ec);
}

std::string epoch_checkpoint_path(const std::string& dir, int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
    return (std::filesystem::path(dir) / buf).string();
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<AugmentedSample>& dataset) {
    config.validate();
    if (dataset.empty()) throw ValidationError("train: dataset must be non-empty");
    if (!config.checkpoint_dir.empty()) ensure_writable_dir(config.checkpoint_dir);

    ModelConfig model_cfg = config.model;
    model_cfg.seed = Rng::mix(config.seed, 0x696e6974ull);

    TrainResult result;
    result.params = init_model(model_cfg);
    if (config.epochs == 0) return result;

    const ByteTokenizer tokenizer;
    const BatchBuildResult first =
        build_batches(dataset, config.batch_constraints, tokenizer, Rng::mix(config.seed, 0));
    if (first.batches.empty()) {
        throw ValidationError("train: no trainable batches (all anchors skipped?)");
    }
    const int64_t steps_per_epoch = static_cast<int64_t>(first.batches.size());
    const int64_t total_steps = steps_per_epoch * config.epochs;
    if (config.warmup_steps >= total_steps) {
        throw ValidationError("train: warmup_steps (" + std::to_string(config.warmup_steps) +
                              ") must be < total steps (" + std::to_string(total_steps) + ")");
    }

    TrainState state{std::move(result.params), 0};
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const BatchBuildResult built =
            epoch == 0 ? first
                       : build_batches(dataset, config.batch_constraints, tokenizer,
                                       Rng::mix(config.seed, static_cast<uint64_t>(epoch)));
        double sum_total = 0.0, sum_ce = 0.0, sum_cl = 0.0;
        for (const Batch& batch : built.batches) {
            const double lr = lr_at(static_cast<int64_t>(state.step), config.learning_rate,
                                    config.warmup_steps, total_steps);
            const LossBreakdown loss = train_step(state, batch, config, total_steps);
            result.history.steps.push_back({state.step - 1, lr, loss});
            sum_total += loss.total;
            sum_ce += loss.ce;
            sum_cl += loss.cl;
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                          epoch_start)
                                .count();
        const double denom = static_cast<double>(built.batches.size());
        result.history.epochs.push_back(
            {epoch, sum_total / denom, sum_ce / denom, sum_cl / denom, wall});
        if (!config.checkpoint_dir.empty()) {
            save_checkpoint(epoch_checkpoint_path(config.checkpoint_dir, epoch + 1), state.params,
                            state.step);
        }
    }
    if (!config.checkpoint_dir.empty()) {
        save_checkpoint((std::filesystem::path(config.checkpoint_dir) / "final.ckpt").string(),
                        state.params, state.step);
        std::ofstream log(std::filesystem::path(config.checkpoint_dir) / "run_log.jsonl");
        log << result.history.to_run_log();
    }
    result.params = std::move(state.params);
    return result;
}

std::string AblationTable::to_csv() const {
    std::ostringstream out;
    out << "alpha,toxicity,faithfulness,status\n";
    for (const AblationRow& row : rows) {
        char alpha_buf[32];
        std::snprintf(alpha_buf, sizeof(alpha_buf), "%g", row.alpha);
        out << alpha_buf << ',';
        if (row.status == "ok") {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f", row.toxicity, row.faithfulness);
            out << buf;
        } else {
            out << ',';
        }
        out << ',' << row.status << '\n';
    }
    return out.str();
}

AblationTable ablate_alpha(const TrainConfig& config, const std::vector<AugmentedSample>& dataset,
                           const std::vector<AugmentedSample>& eval_set,
                           const std::vector<double>& values, const BackendSuite& suite,
                           const GenParams& gen_params) {
    if (values.empty()) throw ValidationError("ablate_alpha: values must be non-empty");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    const ByteTokenizer tokenizer;
    std::vector<std::string> sources;
    std::vector<std::string> ids;
    for (const AugmentedSample& s : eval_set) {
        sources.push_back(s.source);
        ids.push_back(s.id);
    }

    AblationTable table;
    for (double alpha : sorted) {
        TrainConfig run_cfg = config;
        run_cfg.alpha = alpha;
        if (!config.checkpoint_dir.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "alpha_%g", alpha);
            run_cfg.checkpoint_dir =
                (std::filesystem::path(config.checkpoint_dir) / buf).string();
        }
        AblationRow row;
        row.alpha = alpha;
        try {
            const TrainResult trained = train(run_cfg, dataset);
            const std::vector<std::string> outputs =
                generate_summaries(trained.params, tokenizer, sources, gen_params);
            const EvalReport report =
                evaluate(sources, outputs, *suite.toxicity, *suite.faithfulness, ids);
            row.toxicity = report.mean_toxicity;
            row.faithfulness = report.mean_faithfulness;
            row.status = "ok";
        } catch (const std::exception&) {
            row.toxicity = std::nan("");
            row.faithfulness = std::nan("");
            row.status = "failed";
        }
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace dbc

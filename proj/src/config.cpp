#include "dbc/config.hpp"

#include <filesystem>
#include <fstream>

namespace dbc {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_count(const nlohmann::json& j, const char* key, std::optional<int>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();  // null means unlimited
    } else {
        out = j.at(key).get<int>();
    }
}

nlohmann::json count_to_json(const std::optional<int>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["augment"] = {
        {"pivots", c.augment.pivots},
        {"bt_beam_width", c.augment.bt_beam_width},
        {"bt_temperature", c.augment.bt_temperature},
        {"lc_num_beams", c.augment.lc_num_beams},
        {"lc_lambda", c.augment.lc_lambda},
        {"lc_max_input", c.augment.lc_max_input},
        {"lc_max_output", c.augment.lc_max_output},
        {"lc_confidence_threshold", c.augment.lc_confidence_threshold},
        {"lc_return_sequences", c.augment.lc_return_sequences},
        {"lc_confidence_gate", c.augment.lc_confidence_gate},
        {"toxic_temperature", c.augment.toxic_temperature},
        {"toxic_top_p", c.augment.toxic_top_p},
        {"toxic_repetition_penalty", c.augment.toxic_repetition_penalty},
        {"toxic_max_new_tokens", c.augment.toxic_max_new_tokens},
        {"toxicity_threshold", c.augment.toxicity_threshold},
        {"min_words", c.augment.min_words},
        {"swap_max_variations", c.augment.swap_max_variations},
        {"swap_max_per_sample", c.augment.swap_max_per_sample},
        {"mask_ratio", c.augment.mask_ratio},
        {"mask_top_k", c.augment.mask_top_k},
        {"mask_temperature", c.augment.mask_temperature},
        {"mask_marker", c.augment.mask_marker},
        {"seed", c.augment.seed},
    };
    j["train"] = {
        {"model",
         {{"vocab_size", c.train.model.vocab_size},
          {"d_model", c.train.model.d_model},
          {"n_layers", c.train.model.n_layers},
          {"n_heads", c.train.model.n_heads},
          {"max_length", c.train.model.max_length},
          {"proj_hidden", c.train.model.proj_hidden},
          {"proj_out", c.train.model.proj_out},
          {"precision", precision_name(c.train.model.precision)},
          {"seed", c.train.model.seed}}},
        {"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"warmup_steps", c.train.warmup_steps},
        {"schedule", c.train.schedule},
        {"alpha", c.train.alpha},
        {"tau", c.train.tau},
        {"label_smoothing", c.train.label_smoothing},
        {"batch_constraints",
         {{"max_positives", count_to_json(c.train.batch_constraints.max_positives)},
          {"max_negatives", count_to_json(c.train.batch_constraints.max_negatives)},
          {"max_length", c.train.batch_constraints.max_length},
          {"batch_groups", c.train.batch_constraints.batch_groups}}},
        {"seed", c.train.seed},
        {"checkpoint_dir", c.train.checkpoint_dir},
        {"similarity_include_self", c.train.similarity_include_self},
    };
    j["backends"] = {
        {"generator", c.backends.generator},   {"translator", c.backends.translator},
        {"ner", c.backends.ner},               {"mask_filler", c.backends.mask_filler},
        {"toxicity", c.backends.toxicity},     {"faithfulness", c.backends.faithfulness},
        {"lexicon_path", c.backends.lexicon_path},
    };
    j["eval_gen"] = {
        {"temperature", c.eval_gen.temperature},
        {"top_p", c.eval_gen.top_p},
        {"repetition_penalty", c.eval_gen.repetition_penalty},
        {"num_beams", c.eval_gen.num_beams},
        {"length_penalty", c.eval_gen.length_penalty},
        {"max_new_tokens", c.eval_gen.max_new_tokens},
        {"max_input_length", c.eval_gen.max_input_length},
        {"num_return_sequences", c.eval_gen.num_return_sequences},
        {"seed", c.eval_gen.seed},
    };
    j["paths"] = {
        {"toxic_template", c.toxic_template_path},
        {"pattern_rules", c.pattern_rules_path},
    };
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        maybe(a, "pivots", c.augment.pivots);
        maybe(a, "bt_beam_width", c.augment.bt_beam_width);
        maybe(a, "bt_temperature", c.augment.bt_temperature);
        maybe(a, "lc_num_beams", c.augment.lc_num_beams);
        maybe(a, "lc_lambda", c.augment.lc_lambda);
        maybe(a, "lc_max_input", c.augment.lc_max_input);
        maybe(a, "lc_max_output", c.augment.lc_max_output);
        maybe(a, "lc_confidence_threshold", c.augment.lc_confidence_threshold);
        maybe(a, "lc_return_sequences", c.augment.lc_return_sequences);
        maybe(a, "lc_confidence_gate", c.augment.lc_confidence_gate);
        maybe(a, "toxic_temperature", c.augment.toxic_temperature);
        maybe(a, "toxic_top_p", c.augment.toxic_top_p);
        maybe(a, "toxic_repetition_penalty", c.augment.toxic_repetition_penalty);
        maybe(a, "toxic_max_new_tokens", c.augment.toxic_max_new_tokens);
        maybe(a, "toxicity_threshold", c.augment.toxicity_threshold);
        maybe(a, "min_words", c.augment.min_words);
        maybe(a, "swap_max_variations", c.augment.swap_max_variations);
        maybe(a, "swap_max_per_sample", c.augment.swap_max_per_sample);
        maybe(a, "mask_ratio", c.augment.mask_ratio);
        maybe(a, "mask_top_k", c.augment.mask_top_k);
        maybe(a, "mask_temperature", c.augment.mask_temperature);
        maybe(a, "mask_marker", c.augment.mask_marker);
        maybe(a, "seed", c.augment.seed);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("model")) {
            const auto& m = t.at("model");
            maybe(m, "vocab_size", c.train.model.vocab_size);
            maybe(m, "d_model", c.train.model.d_model);
            maybe(m, "n_layers", c.train.model.n_layers);
            maybe(m, "n_heads", c.train.model.n_heads);
            maybe(m, "max_length", c.train.model.max_length);
            maybe(m, "proj_hidden", c.train.model.proj_hidden);
            maybe(m, "proj_out", c.train.model.proj_out);
            if (m.contains("precision")) {
                c.train.model.precision = precision_from_name(m.at("precision").get<std::string>());
            }
            maybe(m, "seed", c.train.model.seed);
        }
        maybe(t, "learning_rate", c.train.learning_rate);
        maybe(t, "epochs", c.train.epochs);
        maybe(t, "warmup_steps", c.train.warmup_steps);
        maybe(t, "schedule", c.train.schedule);
        maybe(t, "alpha", c.train.alpha);
        maybe(t, "tau", c.train.tau);
        maybe(t, "label_smoothing", c.train.label_smoothing);
        if (t.contains("batch_constraints")) {
            const auto& b = t.at("batch_constraints");
            maybe_count(b, "max_positives", c.train.batch_constraints.max_positives);
            maybe_count(b, "max_negatives", c.train.batch_constraints.max_negatives);
            maybe(b, "max_length", c.train.batch_constraints.max_length);
            maybe(b, "batch_groups", c.train.batch_constraints.batch_groups);
        }
        maybe(t, "seed", c.train.seed);
        maybe(t, "checkpoint_dir", c.train.checkpoint_dir);
        maybe(t, "similarity_include_self", c.train.similarity_include_self);
    }
    if (j.contains("backends")) {
        const auto& b = j.at("backends");
        maybe(b, "generator", c.backends.generator);
        maybe(b, "translator", c.backends.translator);
        maybe(b, "ner", c.backends.ner);
        maybe(b, "mask_filler", c.backends.mask_filler);
        maybe(b, "toxicity", c.backends.toxicity);
        maybe(b, "faithfulness", c.backends.faithfulness);
        maybe(b, "lexicon_path", c.backends.lexicon_path);
    }
    if (j.contains("eval_gen")) {
        const auto& g = j.at("eval_gen");
        maybe(g, "temperature", c.eval_gen.temperature);
        maybe(g, "top_p", c.eval_gen.top_p);
        maybe(g, "repetition_penalty", c.eval_gen.repetition_penalty);
        maybe(g, "num_beams", c.eval_gen.num_beams);
        maybe(g, "length_penalty", c.eval_gen.length_penalty);
        maybe(g, "max_new_tokens", c.eval_gen.max_new_tokens);
        maybe(g, "max_input_length", c.eval_gen.max_input_length);
        maybe(g, "num_return_sequences", c.eval_gen.num_return_sequences);
        maybe(g, "seed", c.eval_gen.seed);
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        maybe(p, "toxic_template", c.toxic_template_path);
        maybe(p, "pattern_rules", c.pattern_rules_path);
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed config file " + path + ": " + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad config value in " + path + ": " + e.what());
    }
}

void override_seeds(RunConfig& config, uint64_t seed) {
    config.augment.seed = seed;
    config.train.seed = seed;
    config.eval_gen.seed = seed;
}

void echo_config(const RunConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const fs::path path = fs::path(out_dir) / "config.json";
    std::ofstream out(path);
    if (!out) throw Error("cannot write config echo: " + path.string());
    out << run_config_to_json(config).dump(2) << '\n';
}

}  // namespace dbc

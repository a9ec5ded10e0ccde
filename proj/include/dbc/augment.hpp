#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbc/backends.hpp"
#include "dbc/corpus.hpp"

namespace dbc {

// All augmentation knobs. Defaults are the reference hyperparameters for
// each strategy.
struct AugmentConfig {
    // Backtranslation
    std::vector<std::string> pivots = {"de", "fr", "es"};
    int bt_beam_width = 5;
    double bt_temperature = 0.8;
    // Low-confidence generation
    int lc_num_beams = 8;
    double lc_lambda = 2.0;
    int lc_max_input = 512;
    int lc_max_output = 128;
    double lc_confidence_threshold = 0.21;
    int lc_return_sequences = 3;
    // The confidence threshold is applied as a soft acceptance gate on the
    // selected candidate's geometric-mean token probability; disable to use
    // the raw beam-score argmin alone.
    bool lc_confidence_gate = true;
    // Adversarial toxic generation
    double toxic_temperature = 1.0;
    double toxic_top_p = 0.95;
    double toxic_repetition_penalty = 1.2;
    int toxic_max_new_tokens = 128;
    double toxicity_threshold = 0.4;
    // Shared filtering
    int min_words = 3;
    // Entity swap
    int swap_max_variations = 3;
    int swap_max_per_sample = 2;
    // Masked regeneration
    double mask_ratio = 0.15;
    int mask_top_k = 5;
    double mask_temperature = 0.7;
    std::string mask_marker = "<mask>";

    uint64_t seed = 0;

    void validate() const;
};

enum class RejectReason {
    too_short,
    below_toxicity_threshold,
    duplicate_of_source,
    backend_failure,
    no_entities,
};

std::string reject_reason_name(RejectReason reason);

struct RejectionRecord {
    std::string sample_id;
    std::string strategy;
    RejectReason reason;
    std::string detail;
};

using RejectionSink = std::vector<RejectionRecord>;

// Few-shot prompt for adversarial toxic generation; the resource text ends
// in an "[Input text]" slot ahead of the final "Toxic rewrite:" marker.
struct ToxicPromptTemplate {
    std::string text;

    static ToxicPromptTemplate load(const std::string& path);
    std::string render(const std::string& input) const;
};

struct BacktranslationResult {
    std::string text;
    std::string pivot;
};

// Round-trips the text through each pivot language. Candidates equal to the
// source (after whitespace normalization) are dropped, duplicates keep the
// earliest pivot. Throws only when every pivot fails.
std::vector<BacktranslationResult> backtranslate(const std::string& text,
                                                 const AugmentConfig& config,
                                                 TranslationBackend& translator,
                                                 RejectionSink& rejections,
                                                 const std::string& sample_id = "");

// Returns the text after the final "Toxic rewrite:" marker, trimmed; the
// trimmed input when no marker is present.
std::string strip_prompt_artifacts(const std::string& raw_generation);

// When raw_generation is given it receives the unstripped backend output,
// kept for audit since sampling backends may not be reproducible.
std::optional<NegativeVariant> generate_toxic(const std::string& text,
                                              const AugmentConfig& config,
                                              const ToxicPromptTemplate& prompt_template,
                                              GenerationBackend& generator,
                                              const ToxicityScorer& toxicity,
                                              RejectionSink& rejections,
                                              const std::string& sample_id = "",
                                              std::string* raw_generation = nullptr);

// log P(s) + lambda * length(s), evaluated literally.
double beam_score(double log_prob, int length, double lambda);

std::optional<std::string> low_confidence_generate(const std::string& prompt,
                                                   const AugmentConfig& config,
                                                   GenerationBackend& generator,
                                                   RejectionSink& rejections,
                                                   const std::string& sample_id = "");

// Replacement candidates per entity label plus corpus frequencies of entity
// texts, built once from the whole dataset.
struct EntityPool {
    std::map<std::string, std::vector<std::string>> by_label;
    std::map<std::string, std::size_t> frequency;

    static EntityPool build(const std::vector<AugmentedSample>& samples);
};

std::vector<std::string> entity_swap(const std::string& text,
                                     const std::vector<EntitySpan>& spans, const EntityPool& pool,
                                     const AugmentConfig& config, uint64_t seed,
                                     RejectionSink& rejections,
                                     const std::string& sample_id = "");

std::optional<std::string> mask_regenerate(const std::string& text,
                                           const std::vector<EntitySpan>& spans,
                                           const AugmentConfig& config,
                                           MaskFillBackend& mask_filler, uint64_t seed,
                                           RejectionSink& rejections,
                                           const std::string& sample_id = "",
                                           const EntityPool* pool = nullptr);

// Raw sampled generations, kept because real toxic-generation backends may
// be nondeterministic.
struct AuditRecord {
    std::string sample_id;
    std::string strategy;
    std::string raw;
};

struct AugmentResult {
    std::vector<AugmentedSample> samples;
    std::vector<RejectionRecord> rejections;
    std::vector<AuditRecord> audit;
};

// Full pipeline: entity annotation, positives (reference + backtranslations)
// and the four negative strategies, with per-sample failure isolation.
AugmentResult augment_dataset(const std::vector<AugmentedSample>& samples,
                              const AugmentConfig& config, const ToxicPromptTemplate& toxic_prompt,
                              const BackendSuite& suite);

}  // namespace dbc

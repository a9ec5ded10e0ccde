#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbc/common.hpp"

namespace dbc {

class NerBackend;

// Character-offset entity annotation over one text. Spans within a document
// are non-overlapping and sorted by start.
struct EntitySpan {
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // exclusive
    std::string label;
    std::string text;

    bool operator==(const EntitySpan&) const = default;
};

struct PositiveVariant {
    std::string text;
    std::string strategy;  // "original" | "backtranslation"
    nlohmann::json meta = nlohmann::json::object();

    bool operator==(const PositiveVariant&) const = default;
};

struct NegativeVariant {
    std::string text;
    std::string strategy;  // "toxic" | "low_confidence" | "entity_swap" | "mask_entity"
    bool toxic = false;
    double toxicity_score = 0.0;

    bool operator==(const NegativeVariant&) const = default;
};

// One source text with its reference summary and augmentation variants.
struct AugmentedSample {
    std::string id;
    std::string source;
    std::string summary;
    std::vector<EntitySpan> entities;  // over summary
    std::vector<PositiveVariant> positives;
    std::vector<NegativeVariant> negatives;
    // Unknown top-level JSON fields, preserved across save/load.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const AugmentedSample&) const = default;
};

struct DatasetStats {
    std::size_t n_samples = 0;
    double pct_with_entities = 0.0;   // rounded to 2 decimals
    double pct_toxic_negatives = 0.0; // rounded to 2 decimals
    double positives_per_sample = 0.0;
    bool no_negatives = false;
};

struct StatsOptions {
    // The with-entities percentage is computed over summaries by default;
    // set source_ner to count sources with at least one entity instead.
    const NerBackend* source_ner = nullptr;
};

// Checks all type invariants; throws ValidationError naming the sample id
// and offending field.
void validate_sample(const AugmentedSample& sample);

// JSON Lines persistence. One object per line, UTF-8; unknown fields are
// kept in AugmentedSample::extra and written back on save.
std::vector<AugmentedSample> load_dataset(const std::string& path);
void save_dataset(const std::vector<AugmentedSample>& samples, const std::string& path);

nlohmann::json sample_to_json(const AugmentedSample& sample);
AugmentedSample sample_from_json(const nlohmann::json& j);

// Replaces the sample's entities with the backend's output over the summary,
// normalized to sorted non-overlapping spans (longer span wins on overlap,
// ties to the earlier start).
AugmentedSample annotate_entities(const AugmentedSample& sample, const NerBackend& ner);

std::vector<EntitySpan> normalize_spans(std::vector<EntitySpan> spans);

DatasetStats compute_stats(const std::vector<AugmentedSample>& samples,
                           const StatsOptions& options = {});

}  // namespace dbc

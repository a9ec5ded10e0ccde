#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbc/corpus.hpp"
#include "dbc/tokenizer.hpp"

namespace dbc {

enum class Role { anchor, positive, negative };

std::string role_name(Role role);

// Per-model batch composition limits. Unset counts mean unlimited.
struct BatchConstraints {
    std::optional<int> max_positives;
    std::optional<int> max_negatives;
    int max_length = 256;
    int batch_groups = 4;  // source samples per batch

    void validate() const;
};

// Tokenized training batch. Sequences are source + SEP + variant + EOS;
// ce_mask marks summary-region token positions (variant tokens plus EOS) and
// entity_mask marks the subset of those covered by an entity mention.
struct Batch {
    std::vector<std::vector<int>> sequences;
    std::vector<Role> roles;
    std::vector<std::string> group_ids;
    std::vector<std::vector<uint8_t>> entity_mask;
    std::vector<std::vector<uint8_t>> ce_mask;
    std::vector<uint8_t> toxic_flags;
    // Unordered index pairs (i < j) over anchor/positive members of one group.
    std::vector<std::pair<int, int>> positive_pairs;

    std::size_t size() const { return sequences.size(); }
};

struct SkipRecord {
    std::string sample_id;
    std::string reason;  // "anchor_too_long" | "variant_too_long"
    std::string detail;
};

struct BatchBuildResult {
    std::vector<Batch> batches;
    std::vector<SkipRecord> skipped;
};

// Pure function of (samples, constraints, tokenizer, seed). Overlong anchors
// skip the whole sample; overlong variants are dropped whole rather than
// truncated mid-text.
BatchBuildResult build_batches(const std::vector<AugmentedSample>& samples,
                               const BatchConstraints& constraints, const Tokenizer& tokenizer,
                               uint64_t seed);

}  // namespace dbc

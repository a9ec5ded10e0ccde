#include "dbc/batching.hpp"

#include <algorithm>

namespace dbc {

std::string role_name(Role role) {
    switch (role) {
        case Role::anchor: return "anchor";
        case Role::positive: return "positive";
        case Role::negative: return "negative";
    }
    return "?";
}

void BatchConstraints::validate() const {
    if (max_length <= 0) throw ValidationError("BatchConstraints: max_length must be > 0");
    if (batch_groups <= 0) throw ValidationError("BatchConstraints: batch_groups must be >= 1");
    if (max_positives && *max_positives < 1) {
        throw ValidationError("BatchConstraints: max_positives must be >= 1 when bounded");
    }
    if (max_negatives && *max_negatives < 1) {
        throw ValidationError("BatchConstraints: max_negatives must be >= 1 when bounded");
    }
}

namespace {

// Character ranges of entity mentions inside a variant text. The anchor uses
// the stored spans directly; other variants get every occurrence of each
// stored entity's text.
std::vector<std::pair<std::size_t, std::size_t>> entity_ranges(
    const std::string& variant_text, const std::vector<EntitySpan>& entities, bool is_anchor) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    if (is_anchor) {
        for (const EntitySpan& s : entities) ranges.emplace_back(s.start, s.end);
        return ranges;
    }
    for (const EntitySpan& s : entities) {
        if (s.text.empty()) continue;
        std::size_t pos = 0;
        while ((pos = variant_text.find(s.text, pos)) != std::string::npos) {
            ranges.emplace_back(pos, pos + s.text.size());
            pos += s.text.size();
        }
    }
    std::sort(ranges.begin(), ranges.end());
    return ranges;
}

struct BuiltSequence {
    std::vector<int> tokens;
    std::vector<uint8_t> entity_mask;
    std::vector<uint8_t> ce_mask;
};

// Assembles source + SEP + variant + EOS together with the summary-region
// masks. Returns nullopt when the result would exceed max_length.
std::optional<BuiltSequence> build_sequence(const AugmentedSample& sample,
                                            const std::string& variant_text, bool is_anchor,
                                            const Tokenizer& tok, int max_length) {
    BuiltSequence seq;
    seq.tokens = tok.encode(sample.source);
    seq.tokens.push_back(tok.sep_id());
    const std::size_t summary_begin = seq.tokens.size();

    const std::vector<int> variant_tokens = tok.encode(variant_text);
    const std::vector<TokenOffset> offsets = tok.offsets(variant_text);
    seq.tokens.insert(seq.tokens.end(), variant_tokens.begin(), variant_tokens.end());
    seq.tokens.push_back(tok.eos_id());

    if (static_cast<int>(seq.tokens.size()) > max_length) return std::nullopt;

    seq.entity_mask.assign(seq.tokens.size(), 0);
    seq.ce_mask.assign(seq.tokens.size(), 0);
    for (std::size_t i = summary_begin; i < seq.tokens.size(); ++i) seq.ce_mask[i] = 1;

    const auto ranges = entity_ranges(variant_text, sample.entities, is_anchor);
    for (std::size_t t = 0; t < offsets.size(); ++t) {
        const auto [cb, ce] = offsets[t];
        for (const auto& [rb, re] : ranges) {
            if (cb < re && rb < ce) {
                seq.entity_mask[summary_begin + t] = 1;
                break;
            }
        }
    }
    return seq;
}

// Uniform draw of k indices out of n, returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    if (k >= n) return all;
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.bounded(n - i);
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

BatchBuildResult build_batches(const std::vector<AugmentedSample>& samples,
                               const BatchConstraints& constraints, const Tokenizer& tokenizer,
                               uint64_t seed) {
    constraints.validate();
    BatchBuildResult result;
    Batch current;
    int groups_in_batch = 0;

    auto flush = [&]() {
        if (!current.sequences.empty()) {
            result.batches.push_back(std::move(current));
            current = Batch{};
        }
        groups_in_batch = 0;
    };

    for (std::size_t s = 0; s < samples.size(); ++s) {
        const AugmentedSample& sample = samples[s];
        Rng rng(Rng::mix(seed, fnv1a(sample.id)));

        auto anchor = build_sequence(sample, sample.summary, /*is_anchor=*/true, tokenizer,
                                     constraints.max_length);
        if (!anchor) {
            result.skipped.push_back({sample.id, "anchor_too_long",
                                      "source+summary exceeds max_length=" +
                                          std::to_string(constraints.max_length)});
            continue;
        }

        // Candidate variants; the reference itself is realized as the anchor.
        std::vector<const PositiveVariant*> positives;
        for (const PositiveVariant& p : sample.positives) {
            if (p.strategy == "original" || p.text == sample.summary) continue;
            positives.push_back(&p);
        }
        std::vector<const NegativeVariant*> negatives;
        for (const NegativeVariant& n : sample.negatives) negatives.push_back(&n);

        if (constraints.max_positives &&
            positives.size() > static_cast<std::size_t>(*constraints.max_positives)) {
            std::vector<const PositiveVariant*> chosen;
            for (std::size_t i :
                 sample_indices(positives.size(),
                                static_cast<std::size_t>(*constraints.max_positives), rng)) {
                chosen.push_back(positives[i]);
            }
            positives = std::move(chosen);
        }
        if (constraints.max_negatives &&
            negatives.size() > static_cast<std::size_t>(*constraints.max_negatives)) {
            std::vector<const NegativeVariant*> chosen;
            for (std::size_t i :
                 sample_indices(negatives.size(),
                                static_cast<std::size_t>(*constraints.max_negatives), rng)) {
                chosen.push_back(negatives[i]);
            }
            negatives = std::move(chosen);
        }

        const int base = static_cast<int>(current.sequences.size());
        std::vector<int> pair_members;  // anchor + positives, batch-local

        auto push_sequence = [&](BuiltSequence&& seq, Role role, bool toxic) {
            current.sequences.push_back(std::move(seq.tokens));
            current.entity_mask.push_back(std::move(seq.entity_mask));
            current.ce_mask.push_back(std::move(seq.ce_mask));
            current.roles.push_back(role);
            current.group_ids.push_back(sample.id);
            current.toxic_flags.push_back(toxic ? 1 : 0);
        };

        push_sequence(std::move(*anchor), Role::anchor, false);
        pair_members.push_back(base);

        for (const PositiveVariant* p : positives) {
            auto seq = build_sequence(sample, p->text, false, tokenizer, constraints.max_length);
            if (!seq) {
                result.skipped.push_back({sample.id, "variant_too_long",
                                          "positive (" + p->strategy + ") dropped"});
                continue;
            }
            pair_members.push_back(static_cast<int>(current.sequences.size()));
            push_sequence(std::move(*seq), Role::positive, false);
        }
        for (const NegativeVariant* n : negatives) {
            auto seq = build_sequence(sample, n->text, false, tokenizer, constraints.max_length);
            if (!seq) {
                result.skipped.push_back({sample.id, "variant_too_long",
                                          "negative (" + n->strategy + ") dropped"});
                continue;
            }
            push_sequence(std::move(*seq), Role::negative, n->toxic);
        }

        for (std::size_t i = 0; i < pair_members.size(); ++i) {
            for (std::size_t j = i + 1; j < pair_members.size(); ++j) {
                current.positive_pairs.emplace_back(pair_members[i], pair_members[j]);
            }
        }

        if (++groups_in_batch >= constraints.batch_groups) flush();
    }
    flush();
    return result;
}

}  // namespace dbc

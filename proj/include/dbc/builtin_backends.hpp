#pragma once

#include <map>
#include <string>
#include <vector>

#include "dbc/backends.hpp"

namespace dbc {

// Rule-based entity tagger. Tags maximal runs of capitalized tokens as
// PERSON (a single sentence-initial capitalized token does not count),
// $-amounts as MONEY and bare integers as CARDINAL.
std::vector<EntitySpan> heuristic_ner(const std::string& text);

class HeuristicNer final : public NerBackend {
public:
    std::vector<EntitySpan> tag(const std::string& text) const override {
        return heuristic_ner(text);
    }
    std::string name() const override { return "heuristic"; }
};

// Severity-weighted word list. score = 1 - prod(1 - severity) over matched
// occurrences, so repeated or combined hits compose monotonically.
class LexiconToxicity final : public ToxicityScorer {
public:
    // File format: one "word<TAB>severity" per line; '#' comments allowed,
    // the first comment conventionally carries the lexicon version.
    static LexiconToxicity from_file(const std::string& path);
    explicit LexiconToxicity(std::map<std::string, double> entries);

    double score(const std::string& text) const override;
    std::string name() const override { return "lexicon"; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, double> entries_;  // lowercased word -> severity in (0,1]
};

// Entity-overlap faithfulness with a content-word Jaccard fallback for
// entity-free summaries.
class EntityOverlapFaithfulness final : public FaithfulnessScorer {
public:
    explicit EntityOverlapFaithfulness(std::shared_ptr<NerBackend> ner) : ner_(std::move(ner)) {}

    double score(const std::string& source, const std::string& summary) const override;
    std::string name() const override { return "entity_overlap"; }

private:
    std::shared_ptr<NerBackend> ner_;
};

// Word-substitution pseudo-translator. Each language applies its own table;
// the return leg maps pivot forms onto English synonyms, so round trips
// paraphrase instead of echoing. Texts with no table hits come back
// unchanged and are dropped upstream as duplicates.
class RuleTranslator final : public TranslationBackend {
public:
    std::string translate(const std::string& text, const std::string& src_lang,
                          const std::string& tgt_lang) override;
    std::string name() const override { return "builtin"; }
};

// Deterministic stand-in generator. Prompts carrying a "Toxic rewrite:"
// marker get a templated insult built from lexicon vocabulary; beam-style
// requests get degenerate low-confidence summary candidates with synthetic
// log-probabilities.
class TemplateGenerator final : public GenerationBackend {
public:
    std::vector<ScoredSequence> generate(const std::string& prompt,
                                         const GenParams& params) override;
    std::string name() const override { return "builtin"; }
};

// Replaces each mask marker with a deterministic draw from a small
// replacement vocabulary keyed on (seed, marker position, top_k).
class WordListMaskFiller final : public MaskFillBackend {
public:
    explicit WordListMaskFiller(std::string marker = "<mask>") : marker_(std::move(marker)) {}

    std::string fill(const std::string& text_with_masks, int top_k, double temperature,
                     uint64_t seed) override;
    std::string name() const override { return "builtin"; }

private:
    std::string marker_;
};

}  // namespace dbc

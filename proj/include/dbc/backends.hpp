#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dbc/common.hpp"
#include "dbc/corpus.hpp"

namespace dbc {

// Generation knobs shared by every generation-capable backend.
struct GenParams {
    double temperature = 1.0;
    double top_p = 1.0;
    double repetition_penalty = 1.0;
    int num_beams = 1;
    double length_penalty = 0.0;
    int max_new_tokens = 128;
    int max_input_length = 512;
    int num_return_sequences = 1;
    uint64_t seed = 0;

    void validate() const;
};

struct ScoredSequence {
    std::string text;
    double log_prob = 0.0;  // <= 0
    int length = 0;         // token count, >= 1 for non-empty text
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::vector<ScoredSequence> generate(const std::string& prompt,
                                                 const GenParams& params) = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    // Whether one instance may be shared across workers.
    virtual bool thread_safe() const { return true; }
};

class TranslationBackend {
public:
    virtual ~TranslationBackend() = default;
    virtual std::string translate(const std::string& text, const std::string& src_lang,
                                  const std::string& tgt_lang) = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    virtual bool thread_safe() const { return true; }
};

class NerBackend {
public:
    virtual ~NerBackend() = default;
    virtual std::vector<EntitySpan> tag(const std::string& text) const = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    virtual bool thread_safe() const { return true; }
};

class MaskFillBackend {
public:
    virtual ~MaskFillBackend() = default;
    virtual std::string fill(const std::string& text_with_masks, int top_k, double temperature,
                             uint64_t seed) = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    virtual bool thread_safe() const { return true; }
};

class ToxicityScorer {
public:
    virtual ~ToxicityScorer() = default;
    virtual double score(const std::string& text) const = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    virtual bool thread_safe() const { return true; }
};

class FaithfulnessScorer {
public:
    virtual ~FaithfulnessScorer() = default;
    virtual double score(const std::string& source, const std::string& summary) const = 0;
    virtual bool healthy() const { return true; }
    virtual std::string name() const = 0;
    virtual bool thread_safe() const { return true; }
};

// Every external model the pipeline touches, behind one bundle.
struct BackendSuite {
    std::shared_ptr<GenerationBackend> generator;
    std::shared_ptr<TranslationBackend> translator;
    std::shared_ptr<NerBackend> ner;
    std::shared_ptr<MaskFillBackend> mask_filler;
    std::shared_ptr<ToxicityScorer> toxicity;
    std::shared_ptr<FaithfulnessScorer> faithfulness;

    // Probes every member; throws Error naming the first unhealthy backend.
    void health_check() const;
};

struct BackendSelection {
    std::string generator = "builtin";
    std::string translator = "builtin";
    std::string ner = "heuristic";
    std::string mask_filler = "builtin";
    std::string toxicity = "lexicon";
    std::string faithfulness = "entity_overlap";
    std::string lexicon_path = "data/toxicity_lexicon.tsv";
    // Mask token the filler expects; must match the pipeline's mask_marker.
    std::string mask_marker = "<mask>";
};

// Resolves names to backend instances. Builtin names are listed above;
// "external:<adapter-id>" is reserved for adapter registration and fails
// with a ValidationError until such an adapter is linked in.
BackendSuite make_suite(const BackendSelection& selection);

}  // namespace dbc

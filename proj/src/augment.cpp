#include "dbc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dbc {

void AugmentConfig::validate() const {
    if (pivots.empty()) throw ValidationError("AugmentConfig: pivots must be non-empty");
    if (bt_beam_width < 1) throw ValidationError("AugmentConfig: bt_beam_width must be >= 1");
    if (lc_num_beams < 1) throw ValidationError("AugmentConfig: lc_num_beams must be >= 1");
    if (lc_return_sequences < 1 || lc_return_sequences > lc_num_beams) {
        throw ValidationError("AugmentConfig: lc_return_sequences must be in [1, lc_num_beams]");
    }
    if (toxicity_threshold < 0.0 || toxicity_threshold > 1.0) {
        throw ValidationError("AugmentConfig: toxicity_threshold must be in [0,1]");
    }
    if (min_words < 1) throw ValidationError("AugmentConfig: min_words must be >= 1");
    if (swap_max_variations < 1 || swap_max_per_sample < 1) {
        throw ValidationError("AugmentConfig: swap limits must be >= 1");
    }
    if (mask_ratio <= 0.0 || mask_ratio >= 1.0) {
        throw ValidationError("AugmentConfig: mask_ratio must be in (0,1)");
    }
    if (mask_top_k < 1) throw ValidationError("AugmentConfig: mask_top_k must be >= 1");
    if (mask_marker.empty()) throw ValidationError("AugmentConfig: mask_marker must be non-empty");
}

std::string reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::too_short: return "too_short";
        case RejectReason::below_toxicity_threshold: return "below_toxicity_threshold";
        case RejectReason::duplicate_of_source: return "duplicate_of_source";
        case RejectReason::backend_failure: return "backend_failure";
        case RejectReason::no_entities: return "no_entities";
    }
    return "?";
}

ToxicPromptTemplate ToxicPromptTemplate::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open toxic prompt template: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    ToxicPromptTemplate tpl{buf.str()};
    if (tpl.text.find("[Input text]") == std::string::npos) {
        throw ValidationError("toxic prompt template lacks the [Input text] slot: " + path);
    }
    if (tpl.text.find("Toxic rewrite:") == std::string::npos) {
        throw ValidationError("toxic prompt template lacks the Toxic rewrite: marker: " + path);
    }
    return tpl;
}

std::string ToxicPromptTemplate::render(const std::string& input) const {
    std::string out = text;
    const std::size_t slot = out.find("[Input text]");
    out.replace(slot, 12, input);
    return out;
}

std::vector<BacktranslationResult> backtranslate(const std::string& text,
                                                 const AugmentConfig& config,
                                                 TranslationBackend& translator,
                                                 RejectionSink& rejections,
                                                 const std::string& sample_id) {
    const std::string source_norm = normalize_whitespace(text);
    std::vector<BacktranslationResult> results;
    std::set<std::string> seen;
    std::size_t failures = 0;
    for (const std::string& pivot : config.pivots) {
        std::string round_trip;
        try {
            const std::string there = translator.translate(text, "en", pivot);
            round_trip = translator.translate(there, pivot, "en");
        } catch (const std::exception& e) {
            ++failures;
            rejections.push_back({sample_id, "backtranslation", RejectReason::backend_failure,
                                  "pivot " + pivot + ": " + e.what()});
            continue;
        }
        const std::string norm = normalize_whitespace(round_trip);
        if (norm == source_norm) {
            rejections.push_back({sample_id, "backtranslation", RejectReason::duplicate_of_source,
                                  "pivot " + pivot + " round-trip equals source"});
            continue;
        }
        if (seen.insert(norm).second) {
            results.push_back({round_trip, pivot});
        }
    }
    if (failures == config.pivots.size()) {
        throw Error("backtranslation failed for every pivot" +
                    (sample_id.empty() ? std::string() : " (sample '" + sample_id + "')"));
    }
    return results;
}

std::string strip_prompt_artifacts(const std::string& raw_generation) {
    static const std::string marker = "Toxic rewrite:";
    const std::size_t pos = raw_generation.rfind(marker);
    if (pos == std::string::npos) return trim(raw_generation);
    return trim(raw_generation.substr(pos + marker.size()));
}

std::optional<NegativeVariant> generate_toxic(const std::string& text,
                                              const AugmentConfig& config,
                                              const ToxicPromptTemplate& prompt_template,
                                              GenerationBackend& generator,
                                              const ToxicityScorer& toxicity,
                                              RejectionSink& rejections,
                                              const std::string& sample_id,
                                              std::string* raw_generation) {
    GenParams params;
    params.temperature = config.toxic_temperature;
    params.top_p = config.toxic_top_p;
    params.repetition_penalty = config.toxic_repetition_penalty;
    params.max_new_tokens = config.toxic_max_new_tokens;
    params.num_beams = 1;
    params.num_return_sequences = 1;
    params.seed = Rng::mix(config.seed, fnv1a(text));

    const std::string prompt = prompt_template.render(text);
    std::vector<ScoredSequence> generations;
    try {
        generations = generator.generate(prompt, params);
    } catch (const std::exception& e) {
        rejections.push_back({sample_id, "toxic", RejectReason::backend_failure, e.what()});
        return std::nullopt;
    }
    if (generations.empty()) {
        rejections.push_back({sample_id, "toxic", RejectReason::backend_failure,
                              "generator returned no sequences"});
        return std::nullopt;
    }
    if (raw_generation != nullptr) *raw_generation = generations.front().text;

    const std::string candidate = strip_prompt_artifacts(generations.front().text);
    if (word_count(candidate) < static_cast<std::size_t>(config.min_words)) {
        rejections.push_back({sample_id, "toxic", RejectReason::too_short,
                              "only " + std::to_string(word_count(candidate)) + " words"});
        return std::nullopt;
    }
    const double score = toxicity.score(candidate);
    if (score < config.toxicity_threshold) {
        std::ostringstream detail;
        detail << "score " << score << " < threshold " << config.toxicity_threshold;
        rejections.push_back({sample_id, "toxic", RejectReason::below_toxicity_threshold,
                              detail.str()});
        return std::nullopt;
    }
    return NegativeVariant{candidate, "toxic", true, score};
}

double beam_score(double log_prob, int length, double lambda) {
    return log_prob + lambda * static_cast<double>(length);
}

std::optional<std::string> low_confidence_generate(const std::string& prompt,
                                                   const AugmentConfig& config,
                                                   GenerationBackend& generator,
                                                   RejectionSink& rejections,
                                                   const std::string& sample_id) {
    GenParams params;
    params.num_beams = config.lc_num_beams;
    params.num_return_sequences = config.lc_return_sequences;
    params.length_penalty = config.lc_lambda;
    params.max_input_length = config.lc_max_input;
    params.max_new_tokens = config.lc_max_output;
    params.seed = Rng::mix(config.seed, fnv1a(prompt));

    std::vector<ScoredSequence> candidates;
    try {
        candidates = generator.generate(prompt, params);
    } catch (const std::exception& e) {
        rejections.push_back({sample_id, "low_confidence", RejectReason::backend_failure,
                              e.what()});
        return std::nullopt;
    }
    if (candidates.empty()) {
        rejections.push_back({sample_id, "low_confidence", RejectReason::backend_failure,
                              "generator returned no sequences"});
        return std::nullopt;
    }

    // Inverse beam search: ascending beam score, ties keep input order.
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return beam_score(candidates[a].log_prob, candidates[a].length, config.lc_lambda) <
               beam_score(candidates[b].log_prob, candidates[b].length, config.lc_lambda);
    });

    std::vector<std::size_t> eligible;
    for (std::size_t i : order) {
        if (word_count(candidates[i].text) >= static_cast<std::size_t>(config.min_words)) {
            eligible.push_back(i);
        }
    }
    if (eligible.empty()) {
        rejections.push_back({sample_id, "low_confidence", RejectReason::too_short,
                              "all candidates below min_words"});
        return std::nullopt;
    }
    if (config.lc_confidence_gate) {
        for (std::size_t i : eligible) {
            const double mean_token_prob =
                std::exp(candidates[i].log_prob / std::max(1, candidates[i].length));
            if (mean_token_prob <= config.lc_confidence_threshold) {
                return candidates[i].text;
            }
        }
        // No candidate passes the gate: fall back to the lowest beam score.
    }
    return candidates[eligible.front()].text;
}

EntityPool EntityPool::build(const std::vector<AugmentedSample>& samples) {
    EntityPool pool;
    std::map<std::string, std::set<std::string>> seen;
    for (const AugmentedSample& s : samples) {
        for (const EntitySpan& e : s.entities) {
            ++pool.frequency[e.text];
            if (seen[e.label].insert(e.text).second) {
                pool.by_label[e.label].push_back(e.text);
            }
        }
    }
    return pool;
}

std::vector<std::string> entity_swap(const std::string& text,
                                     const std::vector<EntitySpan>& spans, const EntityPool& pool,
                                     const AugmentConfig& config, uint64_t seed,
                                     RejectionSink& rejections, const std::string& sample_id) {
    auto alternatives = [&](const EntitySpan& span) {
        std::vector<std::string> alts;
        auto it = pool.by_label.find(span.label);
        if (it == pool.by_label.end()) return alts;
        for (const std::string& cand : it->second) {
            if (cand != span.text) alts.push_back(cand);
        }
        return alts;
    };

    std::vector<std::size_t> swappable;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (!alternatives(spans[i]).empty()) swappable.push_back(i);
    }
    if (spans.empty() || swappable.empty()) {
        rejections.push_back({sample_id, "entity_swap", RejectReason::no_entities,
                              spans.empty() ? "no entity spans" : "pool has no alternatives"});
        return {};
    }

    Rng rng(Rng::mix(seed, fnv1a(text)));
    // Choose which spans to swap, then draw replacements per variation.
    std::vector<std::size_t> chosen = swappable;
    if (chosen.size() > static_cast<std::size_t>(config.swap_max_per_sample)) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(config.swap_max_per_sample); ++i) {
            const std::size_t j = i + rng.bounded(chosen.size() - i);
            std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(static_cast<std::size_t>(config.swap_max_per_sample));
        std::sort(chosen.begin(), chosen.end());
    }

    std::vector<std::string> variants;
    std::set<std::string> seen;
    const int attempts = config.swap_max_variations * 4;
    for (int a = 0; a < attempts &&
                    variants.size() < static_cast<std::size_t>(config.swap_max_variations);
         ++a) {
        std::string variant = text;
        // Replace right-to-left so earlier offsets stay valid.
        for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) {
            const EntitySpan& span = spans[*it];
            const std::vector<std::string> alts = alternatives(span);
            const std::string& repl = alts[rng.bounded(alts.size())];
            variant.replace(span.start, span.end - span.start, repl);
        }
        if (variant != text && seen.insert(variant).second) {
            variants.push_back(std::move(variant));
        }
    }
    return variants;
}

namespace {

struct WordRange {
    std::size_t begin;
    std::size_t end;
};

std::vector<WordRange> word_ranges(const std::string& text) {
    std::vector<WordRange> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.push_back({i, j});
        i = j;
    }
    return out;
}

}  // namespace

std::optional<std::string> mask_regenerate(const std::string& text,
                                           const std::vector<EntitySpan>& spans,
                                           const AugmentConfig& config,
                                           MaskFillBackend& mask_filler, uint64_t seed,
                                           RejectionSink& rejections,
                                           const std::string& sample_id, const EntityPool* pool) {
    const std::vector<WordRange> words = word_ranges(text);
    if (words.empty()) {
        rejections.push_back({sample_id, "mask_entity", RejectReason::too_short, "empty text"});
        return std::nullopt;
    }
    const std::size_t n_mask = static_cast<std::size_t>(
        std::ceil(config.mask_ratio * static_cast<double>(words.size())));

    // Importance: entity tokens first, longer covering span first, rarer
    // entity text first; the remaining quota is drawn from non-entity tokens.
    struct Ranked {
        std::size_t index;
        bool is_entity = false;
        std::size_t span_length = 0;
        std::size_t frequency = 0;
    };
    std::vector<Ranked> entity_tokens;
    std::vector<std::size_t> other_tokens;
    for (std::size_t w = 0; w < words.size(); ++w) {
        const EntitySpan* covering = nullptr;
        for (const EntitySpan& s : spans) {
            if (words[w].begin < s.end && s.start < words[w].end) {
                covering = &s;
                break;
            }
        }
        if (covering != nullptr) {
            Ranked r;
            r.index = w;
            r.is_entity = true;
            r.span_length = covering->end - covering->start;
            if (pool != nullptr) {
                auto it = pool->frequency.find(covering->text);
                r.frequency = it == pool->frequency.end() ? 0 : it->second;
            }
            entity_tokens.push_back(r);
        } else {
            other_tokens.push_back(w);
        }
    }
    std::stable_sort(entity_tokens.begin(), entity_tokens.end(),
                     [](const Ranked& a, const Ranked& b) {
                         if (a.span_length != b.span_length) return a.span_length > b.span_length;
                         if (a.frequency != b.frequency) return a.frequency < b.frequency;
                         return a.index < b.index;
                     });

    Rng rng(Rng::mix(seed, fnv1a(text) ^ 0x6d61736bull));
    for (std::size_t i = other_tokens.size(); i > 1; --i) {
        std::swap(other_tokens[i - 1], other_tokens[rng.bounded(i)]);
    }

    std::vector<std::size_t> to_mask;
    for (const Ranked& r : entity_tokens) {
        if (to_mask.size() >= n_mask) break;
        to_mask.push_back(r.index);
    }
    for (std::size_t w : other_tokens) {
        if (to_mask.size() >= n_mask) break;
        to_mask.push_back(w);
    }
    std::sort(to_mask.begin(), to_mask.end());

    std::string masked;
    std::size_t cursor = 0;
    for (std::size_t w : to_mask) {
        masked.append(text, cursor, words[w].begin - cursor);
        masked += config.mask_marker;
        cursor = words[w].end;
    }
    masked.append(text, cursor, text.size() - cursor);

    std::string filled;
    try {
        filled = mask_filler.fill(masked, config.mask_top_k, config.mask_temperature,
                                  Rng::mix(seed, fnv1a(masked)));
    } catch (const std::exception& e) {
        rejections.push_back({sample_id, "mask_entity", RejectReason::backend_failure, e.what()});
        return std::nullopt;
    }
    if (filled == text) {
        rejections.push_back({sample_id, "mask_entity", RejectReason::duplicate_of_source,
                              "filler restored the original text"});
        return std::nullopt;
    }
    return filled;
}

AugmentResult augment_dataset(const std::vector<AugmentedSample>& samples,
                              const AugmentConfig& config, const ToxicPromptTemplate& toxic_prompt,
                              const BackendSuite& suite) {
    config.validate();
    suite.health_check();

    AugmentResult result;
    result.samples.reserve(samples.size());

    // First pass: entity annotation, so the swap pool sees the whole corpus.
    std::vector<AugmentedSample> annotated;
    annotated.reserve(samples.size());
    for (const AugmentedSample& s : samples) {
        if (s.summary.empty()) {
            result.rejections.push_back({s.id, "annotate", RejectReason::backend_failure,
                                         "empty summary"});
            annotated.push_back(s);
            continue;
        }
        try {
            annotated.push_back(annotate_entities(s, *suite.ner));
        } catch (const std::exception& e) {
            result.rejections.push_back({s.id, "annotate", RejectReason::backend_failure,
                                         e.what()});
            annotated.push_back(s);
        }
    }
    const EntityPool pool = EntityPool::build(annotated);

    for (const AugmentedSample& base : annotated) {
        if (base.summary.empty()) {
            result.samples.push_back(base);  // recorded during annotation
            continue;
        }
        if (word_count(base.summary) < static_cast<std::size_t>(config.min_words)) {
            result.rejections.push_back({base.id, "pipeline", RejectReason::too_short,
                                         "reference summary below min_words"});
            result.samples.push_back(base);
            continue;
        }

        AugmentedSample out = base;
        out.positives.clear();
        out.negatives.clear();

        AugmentConfig per_sample = config;
        per_sample.seed = Rng::mix(config.seed, fnv1a(base.id));

        out.positives.push_back({base.summary, "original", nlohmann::json::object()});
        try {
            for (const BacktranslationResult& bt :
                 backtranslate(base.summary, per_sample, *suite.translator, result.rejections,
                               base.id)) {
                if (word_count(bt.text) < static_cast<std::size_t>(config.min_words)) {
                    result.rejections.push_back({base.id, "backtranslation",
                                                 RejectReason::too_short,
                                                 "pivot " + bt.pivot + " output below min_words"});
                    continue;
                }
                out.positives.push_back({bt.text, "backtranslation",
                                         nlohmann::json{{"pivot", bt.pivot}}});
            }
        } catch (const std::exception&) {
            // Per-pivot failures were already recorded; the reference suffices.
        }

        auto admit_negative = [&](const std::string& text, const std::string& strategy) {
            if (word_count(text) < static_cast<std::size_t>(config.min_words)) {
                result.rejections.push_back({base.id, strategy, RejectReason::too_short,
                                             "only " + std::to_string(word_count(text)) +
                                                 " words"});
                return;
            }
            const double score = suite.toxicity->score(text);
            out.negatives.push_back({text, strategy, score >= config.toxicity_threshold, score});
        };

        std::string raw;
        if (auto toxic = generate_toxic(base.summary, per_sample, toxic_prompt, *suite.generator,
                                        *suite.toxicity, result.rejections, base.id, &raw)) {
            out.negatives.push_back(std::move(*toxic));
        }
        if (!raw.empty()) result.audit.push_back({base.id, "toxic", raw});
        if (auto lc = low_confidence_generate(base.source, per_sample, *suite.generator,
                                              result.rejections, base.id)) {
            admit_negative(*lc, "low_confidence");
        }
        for (const std::string& swapped :
             entity_swap(base.summary, base.entities, pool, per_sample, per_sample.seed,
                         result.rejections, base.id)) {
            admit_negative(swapped, "entity_swap");
        }
        if (auto masked = mask_regenerate(base.summary, base.entities, per_sample,
                                          *suite.mask_filler, per_sample.seed, result.rejections,
                                          base.id, &pool)) {
            admit_negative(*masked, "mask_entity");
        }

        result.samples.push_back(std::move(out));
    }
    return result;
}

}  // namespace dbc

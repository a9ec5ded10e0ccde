#include "dbc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dbc/backends.hpp"

namespace dbc {

namespace {

const std::set<std::string> kPositiveStrategies = {"original", "backtranslation"};
const std::set<std::string> kNegativeStrategies = {"toxic", "low_confidence", "entity_swap",
                                                   "mask_entity"};

[[noreturn]] void invariant_error(const std::string& id, const std::string& field,
                                  const std::string& detail) {
    throw ValidationError("sample '" + id + "': invalid " + field + ": " + detail);
}

// 100 * a / b, half-up rounded to 2 decimals through integer arithmetic so
// the rational value is exact before conversion.
double pct_2dp(std::size_t a, std::size_t b) {
    if (b == 0) return 0.0;
    const unsigned long long scaled = (20000ull * a + b) / (2ull * b);
    return static_cast<double>(scaled) / 100.0;
}

}  // namespace

void validate_sample(const AugmentedSample& sample) {
    if (sample.id.empty()) throw ValidationError("sample with empty id");

    std::size_t prev_end = 0;
    bool first = true;
    for (const EntitySpan& span : sample.entities) {
        if (span.start >= span.end || span.end > sample.summary.size()) {
            invariant_error(sample.id, "entities",
                            "span [" + std::to_string(span.start) + ", " +
                                std::to_string(span.end) + ") out of range for summary of length " +
                                std::to_string(sample.summary.size()));
        }
        if (!first && span.start < prev_end) {
            invariant_error(sample.id, "entities", "spans overlap or are unsorted");
        }
        if (sample.summary.substr(span.start, span.end - span.start) != span.text) {
            invariant_error(sample.id, "entities",
                            "span text '" + span.text + "' does not match summary substring");
        }
        prev_end = span.end;
        first = false;
    }

    for (const PositiveVariant& p : sample.positives) {
        if (!kPositiveStrategies.count(p.strategy)) {
            invariant_error(sample.id, "positives", "unknown strategy '" + p.strategy + "'");
        }
        if (word_count(p.text) < 3) {
            invariant_error(sample.id, "positives", "text has fewer than 3 words");
        }
    }
    for (const NegativeVariant& n : sample.negatives) {
        if (!kNegativeStrategies.count(n.strategy)) {
            invariant_error(sample.id, "negatives", "unknown strategy '" + n.strategy + "'");
        }
        if (n.strategy == "toxic" && !n.toxic) {
            invariant_error(sample.id, "negatives", "toxic-strategy variant with toxic=false");
        }
        if (n.toxicity_score < 0.0 || n.toxicity_score > 1.0) {
            invariant_error(sample.id, "negatives", "toxicity_score outside [0,1]");
        }
        if (word_count(n.text) < 3) {
            invariant_error(sample.id, "negatives", "text has fewer than 3 words");
        }
    }
}

nlohmann::json sample_to_json(const AugmentedSample& sample) {
    nlohmann::json j = sample.extra.is_object() ? sample.extra : nlohmann::json::object();
    j["id"] = sample.id;
    j["source"] = sample.source;
    j["summary"] = sample.summary;
    j["entities"] = nlohmann::json::array();
    for (const EntitySpan& s : sample.entities) {
        j["entities"].push_back({{"start", s.start}, {"end", s.end}, {"label", s.label},
                                 {"text", s.text}});
    }
    j["positives"] = nlohmann::json::array();
    for (const PositiveVariant& p : sample.positives) {
        j["positives"].push_back({{"text", p.text}, {"strategy", p.strategy}, {"meta", p.meta}});
    }
    j["negatives"] = nlohmann::json::array();
    for (const NegativeVariant& n : sample.negatives) {
        j["negatives"].push_back({{"text", n.text}, {"strategy", n.strategy}, {"toxic", n.toxic},
                                  {"toxicity_score", n.toxicity_score}});
    }
    return j;
}

AugmentedSample sample_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    AugmentedSample s;
    s.id = j.value("id", std::string());
    s.source = j.value("source", std::string());
    s.summary = j.value("summary", std::string());
    if (j.contains("entities")) {
        for (const auto& e : j.at("entities")) {
            EntitySpan span;
            span.start = e.at("start").get<std::size_t>();
            span.end = e.at("end").get<std::size_t>();
            span.label = e.at("label").get<std::string>();
            span.text = e.at("text").get<std::string>();
            s.entities.push_back(std::move(span));
        }
    }
    if (j.contains("positives")) {
        for (const auto& p : j.at("positives")) {
            PositiveVariant v;
            v.text = p.at("text").get<std::string>();
            v.strategy = p.at("strategy").get<std::string>();
            v.meta = p.value("meta", nlohmann::json::object());
            s.positives.push_back(std::move(v));
        }
    }
    if (j.contains("negatives")) {
        for (const auto& n : j.at("negatives")) {
            NegativeVariant v;
            v.text = n.at("text").get<std::string>();
            v.strategy = n.at("strategy").get<std::string>();
            v.toxic = n.at("toxic").get<bool>();
            v.toxicity_score = n.at("toxicity_score").get<double>();
            s.negatives.push_back(std::move(v));
        }
    }
    static const std::set<std::string> known = {"id",       "source",    "summary",
                                                "entities", "positives", "negatives"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) s.extra[it.key()] = it.value();
    }
    validate_sample(s);
    return s;
}

std::vector<AugmentedSample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file: " + path);
    std::vector<AugmentedSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": malformed JSON: " + e.what());
        }
        try {
            samples.push_back(sample_from_json(j));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": schema violation: " + e.what());
        }
    }
    return samples;
}

void save_dataset(const std::vector<AugmentedSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file: " + path);
    for (const AugmentedSample& s : samples) {
        validate_sample(s);
        out << sample_to_json(s).dump() << '\n';
    }
    if (!out) throw Error("write failed for dataset file: " + path);
}

std::vector<EntitySpan> normalize_spans(std::vector<EntitySpan> spans) {
    std::vector<EntitySpan> kept;
    // Longest span wins among overlaps, earlier start breaks ties.
    std::stable_sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
        const std::size_t la = a.end - a.start;
        const std::size_t lb = b.end - b.start;
        if (la != lb) return la > lb;
        return a.start < b.start;
    });
    for (const EntitySpan& cand : spans) {
        bool overlaps = false;
        for (const EntitySpan& k : kept) {
            if (cand.start < k.end && k.start < cand.end) {
                overlaps = true;
                break;
            }
        }
        if (!overlaps) kept.push_back(cand);
    }
    std::sort(kept.begin(), kept.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    return kept;
}

AugmentedSample annotate_entities(const AugmentedSample& sample, const NerBackend& ner) {
    if (sample.summary.empty()) {
        throw ValidationError("sample '" + sample.id + "': cannot annotate empty summary");
    }
    std::vector<EntitySpan> raw;
    try {
        raw = ner.tag(sample.summary);
    } catch (const std::exception& e) {
        throw Error("NER backend failed for sample '" + sample.id + "': " + e.what());
    }
    for (EntitySpan& span : raw) {
        if (span.start >= span.end || span.end > sample.summary.size()) {
            throw Error("NER backend returned out-of-range span for sample '" + sample.id + "'");
        }
        span.text = sample.summary.substr(span.start, span.end - span.start);
    }
    AugmentedSample out = sample;
    out.entities = normalize_spans(std::move(raw));
    return out;
}

DatasetStats compute_stats(const std::vector<AugmentedSample>& samples,
                           const StatsOptions& options) {
    DatasetStats stats;
    stats.n_samples = samples.size();
    std::size_t with_entities = 0;
    std::size_t n_negatives = 0;
    std::size_t toxic_negatives = 0;
    std::size_t n_positives = 0;
    for (const AugmentedSample& s : samples) {
        if (options.source_ner != nullptr) {
            if (!options.source_ner->tag(s.source).empty()) ++with_entities;
        } else if (!s.entities.empty()) {
            ++with_entities;
        }
        n_negatives += s.negatives.size();
        for (const NegativeVariant& n : s.negatives) {
            if (n.toxic) ++toxic_negatives;
        }
        n_positives += s.positives.size();
    }
    stats.pct_with_entities = pct_2dp(with_entities, samples.size());
    stats.no_negatives = (n_negatives == 0);
    stats.pct_toxic_negatives = stats.no_negatives ? 0.0 : pct_2dp(toxic_negatives, n_negatives);
    stats.positives_per_sample =
        samples.empty() ? 0.0 : static_cast<double>(n_positives) / static_cast<double>(samples.size());
    return stats;
}

}  // namespace dbc

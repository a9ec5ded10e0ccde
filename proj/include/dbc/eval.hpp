#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbc/backends.hpp"
#include "dbc/model.hpp"
#include "dbc/tokenizer.hpp"

namespace dbc {

struct EvalItem {
    std::string id;
    std::string output;
    std::optional<double> toxicity;
    std::optional<double> faithfulness;
    bool scored = true;
};

// Reference aggregates (e.g. the base model's) for delta annotation.
struct EvalBaseline {
    double mean_toxicity = 0.0;
    double mean_faithfulness = 0.0;
};

struct EvalReport {
    std::vector<EvalItem> items;
    std::size_t n_scored = 0;
    std::size_t n_unscored = 0;
    double mean_toxicity = 0.0;
    double std_toxicity = 0.0;  // population standard deviation
    double mean_faithfulness = 0.0;
    double std_faithfulness = 0.0;
    std::optional<EvalBaseline> baseline;

    std::string to_csv() const;
    // Aggregate table; with a baseline attached, adds direction-annotated
    // deltas (toxicity lower-better, faithfulness higher-better).
    std::string to_markdown() const;
};

// Greedy decoding of one summary per source: tokens are source + SEP, the
// continuation stops at EOS or max_new_tokens.
std::vector<std::string> generate_summaries(const Parameters& params, const Tokenizer& tokenizer,
                                            const std::vector<std::string>& sources,
                                            const GenParams& gen_params);

EvalReport evaluate(const std::vector<std::string>& sources,
                    const std::vector<std::string>& outputs, const ToxicityScorer& toxicity,
                    const FaithfulnessScorer& faithfulness,
                    const std::vector<std::string>& ids = {});

// ---- generation pattern analysis ----

struct PatternRules {
    std::vector<std::string> abstention_phrases = {"I am not sure", "I cannot", "I apologize",
                                                   "I would rather not"};
    int repeat_count = 3;
    int repeat_window_tokens = 60;
    int ngram_size = 4;
    int punct_run_length = 3;
    int punct_min_runs = 2;
    double non_sequitur_max_jaccard = 0.05;
    int non_sequitur_min_tokens = 20;

    // Structured text file: a [thresholds] section of "name = value" lines
    // and an [abstention_phrases] section, one phrase per line.
    static PatternRules load(const std::string& path);
};

struct PatternFlags {
    bool empty = false;
    bool abstention = false;
    bool repetitive = false;
    bool non_sequitur = false;
    bool punctuation = false;
};

PatternFlags detect_patterns(const std::string& prompt, const std::string& response,
                             const PatternRules& rules);

struct PatternReport {
    std::size_t n_pairs = 0;
    // Percentages with 1 decimal place.
    double pct_empty = 0.0;
    double pct_abstention = 0.0;
    double pct_repetitive = 0.0;
    double pct_non_sequitur = 0.0;
    double pct_punctuation = 0.0;

    std::string to_markdown() const;
};

struct PromptResponse {
    std::string prompt;
    std::string response;
};

PatternReport pattern_report(const std::vector<PromptResponse>& pairs,
                             const PatternRules& rules);

// ---- delta annotation and correlation analysis ----

enum class MetricDirection { lower_better, higher_better };
enum class Desirability { good, bad, neutral };

struct DeltaAnnotation {
    double delta = 0.0;
    Desirability desirability = Desirability::neutral;
};

DeltaAnnotation delta_annotate(double baseline_value, double new_value,
                               MetricDirection direction);

// Sample Pearson correlation, two-pass. Throws on zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct DegradationTable {
    std::vector<std::string> models;
    std::vector<double> params_b;       // parameter counts in billions
    std::vector<std::string> columns;   // degradation column names
    std::vector<std::vector<double>> values;  // [row][column], percentages

    // CSV with header "model,params_b,<column...>".
    static DegradationTable from_csv(const std::string& path);
};

enum class SizeTransform { linear, log };

struct CorrelationReport {
    std::vector<std::string> columns;
    std::vector<double> per_column;
    double overall = 0.0;  // arithmetic mean of the per-column correlations
};

CorrelationReport degradation_correlation(const DegradationTable& table,
                                          SizeTransform transform = SizeTransform::log);

}  // namespace dbc

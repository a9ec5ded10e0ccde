#include "dbc/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dbc {

namespace {

double round_1dp_pct(std::size_t k, std::size_t n) {
    if (n == 0) return 0.0;
    const unsigned long long scaled = (2000ull * k + n) / (2ull * n);
    return static_cast<double>(scaled) / 10.0;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

struct MeanStd {
    double mean = 0.0;
    double std_dev = 0.0;
};

MeanStd population_stats(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std_dev = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

}  // namespace

std::vector<std::string> generate_summaries(const Parameters& params, const Tokenizer& tokenizer,
                                            const std::vector<std::string>& sources,
                                            const GenParams& gen_params) {
    std::vector<std::string> outputs;
    outputs.reserve(sources.size());
    for (const std::string& source : sources) {
        std::vector<int> tokens = tokenizer.encode(source);
        if (static_cast<int>(tokens.size()) > gen_params.max_input_length) {
            tokens.resize(static_cast<std::size_t>(gen_params.max_input_length));
        }
        tokens.push_back(tokenizer.sep_id());
        const std::vector<int> generated =
            generate_greedy(params, tokens, gen_params.max_new_tokens, tokenizer.eos_id());
        outputs.push_back(tokenizer.decode(generated));
    }
    return outputs;
}

EvalReport evaluate(const std::vector<std::string>& sources,
                    const std::vector<std::string>& outputs, const ToxicityScorer& toxicity,
                    const FaithfulnessScorer& faithfulness,
                    const std::vector<std::string>& ids) {
    if (sources.size() != outputs.size()) {
        throw ValidationError("evaluate: sources and outputs must have equal length");
    }
    EvalReport report;
    std::vector<double> tox_values;
    std::vector<double> faith_values;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        EvalItem item;
        item.id = i < ids.size() ? ids[i] : std::to_string(i);
        item.output = outputs[i];
        try {
            item.toxicity = toxicity.score(outputs[i]);
            item.faithfulness = faithfulness.score(sources[i], outputs[i]);
            item.scored = true;
        } catch (const std::exception&) {
            item.toxicity.reset();
            item.faithfulness.reset();
            item.scored = false;
        }
        if (item.scored) {
            ++report.n_scored;
            tox_values.push_back(*item.toxicity);
            faith_values.push_back(*item.faithfulness);
        } else {
            ++report.n_unscored;
        }
        report.items.push_back(std::move(item));
    }
    const MeanStd tox = population_stats(tox_values);
    const MeanStd faith = population_stats(faith_values);
    report.mean_toxicity = tox.mean;
    report.std_toxicity = tox.std_dev;
    report.mean_faithfulness = faith.mean;
    report.std_faithfulness = faith.std_dev;
    return report;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "id,output,toxicity,faithfulness,scored\n";
    for (const EvalItem& item : items) {
        out << csv_escape(item.id) << ',' << csv_escape(item.output) << ',';
        if (item.toxicity) out << *item.toxicity;
        out << ',';
        if (item.faithfulness) out << *item.faithfulness;
        out << ',' << (item.scored ? "yes" : "no") << '\n';
    }
    return out.str();
}

std::string EvalReport::to_markdown() const {
    std::ostringstream out;
    if (!baseline) {
        out << "| metric | mean | std |\n|---|---|---|\n";
        out << "| toxicity | " << mean_toxicity << " | " << std_toxicity << " |\n";
        out << "| faithfulness | " << mean_faithfulness << " | " << std_faithfulness << " |\n";
    } else {
        auto describe = [](const DeltaAnnotation& d) {
            std::ostringstream cell;
            cell << (d.delta >= 0 ? "+" : "") << d.delta << " (";
            switch (d.desirability) {
                case Desirability::good: cell << "good"; break;
                case Desirability::bad: cell << "bad"; break;
                case Desirability::neutral: cell << "neutral"; break;
            }
            cell << ")";
            return cell.str();
        };
        const DeltaAnnotation d_tox =
            delta_annotate(baseline->mean_toxicity, mean_toxicity, MetricDirection::lower_better);
        const DeltaAnnotation d_faith = delta_annotate(
            baseline->mean_faithfulness, mean_faithfulness, MetricDirection::higher_better);
        out << "| metric | mean | std | baseline | delta |\n|---|---|---|---|---|\n";
        out << "| toxicity | " << mean_toxicity << " | " << std_toxicity << " | "
            << baseline->mean_toxicity << " | " << describe(d_tox) << " |\n";
        out << "| faithfulness | " << mean_faithfulness << " | " << std_faithfulness << " | "
            << baseline->mean_faithfulness << " | " << describe(d_faith) << " |\n";
    }
    out << "\nscored items: " << n_scored << ", unscored: " << n_unscored << "\n";
    return out.str();
}

PatternRules PatternRules::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open pattern rules file: " + path);
    PatternRules rules;
    rules.abstention_phrases.clear();
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        if (section == "thresholds") {
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": expected name = value");
            }
            const std::string name = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            try {
                if (name == "repeat_count") rules.repeat_count = std::stoi(value);
                else if (name == "repeat_window_tokens") rules.repeat_window_tokens = std::stoi(value);
                else if (name == "ngram_size") rules.ngram_size = std::stoi(value);
                else if (name == "punct_run_length") rules.punct_run_length = std::stoi(value);
                else if (name == "punct_min_runs") rules.punct_min_runs = std::stoi(value);
                else if (name == "non_sequitur_max_jaccard") rules.non_sequitur_max_jaccard = std::stod(value);
                else if (name == "non_sequitur_min_tokens") rules.non_sequitur_min_tokens = std::stoi(value);
                else throw ValidationError("unknown threshold '" + name + "'");
            } catch (const ValidationError&) {
                throw;
            } catch (const std::exception&) {
                throw ValidationError(path + ":" + std::to_string(line_no) + ": bad value");
            }
        } else if (section == "abstention_phrases") {
            rules.abstention_phrases.push_back(t);
        } else {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": content outside a known section");
        }
    }
    if (rules.abstention_phrases.empty()) {
        throw ValidationError(path + ": no abstention phrases defined");
    }
    return rules;
}

namespace {

bool contains_ci(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    const std::string h = lower_ascii(haystack);
    const std::string n = lower_ascii(needle);
    return h.find(n) != std::string::npos;
}

std::string normalize_token(const std::string& raw) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
    return lower_ascii(std::string_view(raw).substr(b, e - b));
}

// True when some `count` occurrences (start indices, each `len` tokens long)
// fit inside one window.
bool occurrences_in_window(const std::vector<std::size_t>& starts, std::size_t len, int count,
                           int window) {
    if (static_cast<int>(starts.size()) < count) return false;
    for (std::size_t i = 0; i + static_cast<std::size_t>(count) <= starts.size(); ++i) {
        const std::size_t span =
            starts[i + static_cast<std::size_t>(count) - 1] + len - starts[i];
        if (span <= static_cast<std::size_t>(window)) return true;
    }
    return false;
}

bool detect_repetition(const std::string& response, const PatternRules& rules) {
    const std::vector<std::string> raw = split_whitespace(response);
    std::vector<std::string> tokens;
    tokens.reserve(raw.size());
    std::vector<bool> sentence_end;
    for (const std::string& r : raw) {
        const std::string norm = normalize_token(r);
        if (norm.empty()) continue;
        tokens.push_back(norm);
        const char last = r.back();
        sentence_end.push_back(last == '.' || last == '!' || last == '?');
    }
    if (tokens.empty()) return false;

    // n-gram repetitions
    const std::size_t n = static_cast<std::size_t>(rules.ngram_size);
    if (tokens.size() >= n) {
        std::map<std::string, std::vector<std::size_t>> ngram_starts;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string key;
            for (std::size_t k = 0; k < n; ++k) {
                key += tokens[i + k];
                key.push_back(' ');
            }
            ngram_starts[key].push_back(i);
        }
        for (const auto& [key, starts] : ngram_starts) {
            if (occurrences_in_window(starts, n, rules.repeat_count,
                                      rules.repeat_window_tokens)) {
                return true;
            }
        }
    }

    // whole-sentence repetitions
    std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> sentences;
    std::string current;
    std::size_t start = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (count == 0) start = i;
        current += tokens[i];
        current.push_back(' ');
        ++count;
        if (sentence_end[i] || i + 1 == tokens.size()) {
            sentences[current].emplace_back(start, count);
            current.clear();
            count = 0;
        }
    }
    for (const auto& [key, occ] : sentences) {
        if (static_cast<int>(occ.size()) < rules.repeat_count) continue;
        std::vector<std::size_t> starts;
        for (const auto& [s, c] : occ) starts.push_back(s);
        if (occurrences_in_window(starts, occ.front().second, rules.repeat_count,
                                  rules.repeat_window_tokens)) {
            return true;
        }
    }
    return false;
}

bool detect_punctuation(const std::string& response, const PatternRules& rules) {
    auto is_punct = [](char c) { return c == '.' || c == '!' || c == ',' || c == '?'; };
    int runs_of_two = 0;
    std::size_t i = 0;
    while (i < response.size()) {
        if (!is_punct(response[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < response.size() && response[j] == response[i]) ++j;
        const std::size_t run = j - i;
        if (run >= static_cast<std::size_t>(rules.punct_run_length)) return true;
        if (run >= 2) ++runs_of_two;
        i = j;
    }
    return runs_of_two >= rules.punct_min_runs;
}

double content_word_jaccard(const std::string& a, const std::string& b) {
    const std::vector<std::string> wa = content_words(a);
    const std::vector<std::string> wb = content_words(b);
    const std::set<std::string> sa(wa.begin(), wa.end());
    const std::set<std::string> sb(wb.begin(), wb.end());
    std::size_t inter = 0;
    for (const std::string& w : sb) {
        if (sa.count(w)) ++inter;
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

PatternFlags detect_patterns(const std::string& prompt, const std::string& response,
                             const PatternRules& rules) {
    PatternFlags flags;
    if (trim(response).empty()) {
        flags.empty = true;
        return flags;  // empty implies no other flags
    }
    for (const std::string& phrase : rules.abstention_phrases) {
        if (contains_ci(response, phrase)) {
            flags.abstention = true;
            break;
        }
    }
    flags.repetitive = detect_repetition(response, rules);
    flags.punctuation = detect_punctuation(response, rules);
    const std::size_t n_tokens = word_count(response);
    if (n_tokens >= static_cast<std::size_t>(rules.non_sequitur_min_tokens)) {
        flags.non_sequitur =
            content_word_jaccard(prompt, response) < rules.non_sequitur_max_jaccard;
    }
    return flags;
}

PatternReport pattern_report(const std::vector<PromptResponse>& pairs,
                             const PatternRules& rules) {
    if (pairs.empty()) throw ValidationError("pattern_report: need at least one pair");
    PatternReport report;
    report.n_pairs = pairs.size();
    std::size_t empty = 0, abstention = 0, repetitive = 0, non_sequitur = 0, punctuation = 0;
    for (const PromptResponse& pr : pairs) {
        const PatternFlags f = detect_patterns(pr.prompt, pr.response, rules);
        empty += f.empty;
        abstention += f.abstention;
        repetitive += f.repetitive;
        non_sequitur += f.non_sequitur;
        punctuation += f.punctuation;
    }
    report.pct_empty = round_1dp_pct(empty, pairs.size());
    report.pct_abstention = round_1dp_pct(abstention, pairs.size());
    report.pct_repetitive = round_1dp_pct(repetitive, pairs.size());
    report.pct_non_sequitur = round_1dp_pct(non_sequitur, pairs.size());
    report.pct_punctuation = round_1dp_pct(punctuation, pairs.size());
    return report;
}

std::string PatternReport::to_markdown() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << "| pattern | % |\n|---|---|\n";
    out << "| empty | " << pct_empty << " |\n";
    out << "| abstention | " << pct_abstention << " |\n";
    out << "| repetitive | " << pct_repetitive << " |\n";
    out << "| non_sequitur | " << pct_non_sequitur << " |\n";
    out << "| punctuation | " << pct_punctuation << " |\n";
    return out.str();
}

DeltaAnnotation delta_annotate(double baseline_value, double new_value,
                               MetricDirection direction) {
    DeltaAnnotation out;
    out.delta = new_value - baseline_value;
    if (std::abs(out.delta) < 1e-12) {
        out.desirability = Desirability::neutral;
        return out;
    }
    const bool improved = direction == MetricDirection::lower_better ? out.delta < 0.0
                                                                     : out.delta > 0.0;
    out.desirability = improved ? Desirability::good : Desirability::bad;
    return out;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ValidationError("pearson: length mismatch");
    if (xs.size() < 2) throw ValidationError("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ValidationError("pearson: zero variance makes the correlation undefined");
    }
    return sxy / std::sqrt(sxx * syy);
}

DegradationTable DegradationTable::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open degradation table: " + path);
    DegradationTable table;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(trim(cell));
    }
    if (header.size() < 3 || header[0] != "model" || header[1] != "params_b") {
        throw ValidationError(path + ": header must be model,params_b,<column...>");
    }
    table.columns.assign(header.begin() + 2, header.end());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() != header.size()) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells");
        }
        table.models.push_back(cells[0]);
        double params = 0.0;
        try {
            params = std::stod(cells[1]);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad params_b");
        }
        if (params <= 0.0) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": parameter count must be > 0");
        }
        table.params_b.push_back(params);
        std::vector<double> row;
        for (std::size_t c = 2; c < cells.size(); ++c) {
            double v = 0.0;
            try {
                v = std::stod(cells[c]);
            } catch (const std::exception&) {
                throw ValidationError(path + ":" + std::to_string(line_no) + ": bad value in " +
                                      table.columns[c - 2]);
            }
            if (v < 0.0 || v > 100.0) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": percentage outside [0,100] in " + table.columns[c - 2]);
            }
            row.push_back(v);
        }
        table.values.push_back(std::move(row));
    }
    return table;
}

CorrelationReport degradation_correlation(const DegradationTable& table,
                                          SizeTransform transform) {
    if (table.values.size() < 2) {
        throw ValidationError("degradation_correlation: need at least 2 rows");
    }
    std::vector<double> xs;
    for (double p : table.params_b) {
        xs.push_back(transform == SizeTransform::log ? std::log(p) : p);
    }
    CorrelationReport report;
    report.columns = table.columns;
    double sum = 0.0;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        std::vector<double> ys;
        for (const std::vector<double>& row : table.values) ys.push_back(row[c]);
        const double r = pearson(xs, ys);
        report.per_column.push_back(r);
        sum += r;
    }
    report.overall = sum / static_cast<double>(report.per_column.size());
    return report;
}

}  // namespace dbc

#include "dbc/builtin_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace dbc {

void GenParams::validate() const {
    if (temperature <= 0.0) throw ValidationError("GenParams: temperature must be > 0");
    if (top_p <= 0.0 || top_p > 1.0) throw ValidationError("GenParams: top_p must be in (0,1]");
    if (repetition_penalty < 1.0) {
        throw ValidationError("GenParams: repetition_penalty must be >= 1");
    }
    if (num_beams < 1) throw ValidationError("GenParams: num_beams must be >= 1");
    if (num_beams > 1 && num_return_sequences > num_beams) {
        throw ValidationError("GenParams: num_return_sequences must be <= num_beams");
    }
    if (max_new_tokens < 1) throw ValidationError("GenParams: max_new_tokens must be >= 1");
}

void BackendSuite::health_check() const {
    struct Probe {
        const char* role;
        bool present;
        bool ok;
    };
    const std::array<Probe, 6> probes = {{
        {"generator", generator != nullptr, generator && generator->healthy()},
        {"translator", translator != nullptr, translator && translator->healthy()},
        {"ner", ner != nullptr, ner && ner->healthy()},
        {"mask_filler", mask_filler != nullptr, mask_filler && mask_filler->healthy()},
        {"toxicity", toxicity != nullptr, toxicity && toxicity->healthy()},
        {"faithfulness", faithfulness != nullptr, faithfulness && faithfulness->healthy()},
    }};
    for (const Probe& p : probes) {
        if (!p.present) throw Error(std::string("backend suite: missing ") + p.role);
        if (!p.ok) throw Error(std::string("backend suite: unhealthy ") + p.role);
    }
}

namespace {

struct Word {
    std::size_t begin = 0;  // raw word bounds in the text
    std::size_t end = 0;
    std::size_t core_begin = 0;  // bounds with edge punctuation stripped
    std::size_t core_end = 0;
};

std::vector<Word> scan_words(const std::string& text) {
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            Word w;
            w.begin = i;
            w.end = j;
            std::size_t cb = i;
            std::size_t ce = j;
            while (cb < ce && !std::isalnum(static_cast<unsigned char>(text[cb])) &&
                   text[cb] != '$') {
                ++cb;
            }
            while (ce > cb && !std::isalnum(static_cast<unsigned char>(text[ce - 1]))) --ce;
            w.core_begin = cb;
            w.core_end = ce;
            words.push_back(w);
        }
        i = j;
    }
    return words;
}

bool ends_sentence(const std::string& text, const Word& w) {
    for (std::size_t k = w.end; k > w.begin; --k) {
        const char c = text[k - 1];
        if (c == '"' || c == '\'' || c == ')' || c == ']') continue;
        return c == '.' || c == '!' || c == '?';
    }
    return false;
}

bool is_first_person_token(std::string_view core) {
    return core == "I" || (core.size() >= 2 && core[0] == 'I' && core[1] == '\'');
}

}  // namespace

std::vector<EntitySpan> heuristic_ner(const std::string& text) {
    std::vector<EntitySpan> spans;
    const std::vector<Word> words = scan_words(text);

    enum class Kind { other, capitalized, money, cardinal };
    std::vector<Kind> kinds(words.size(), Kind::other);

    for (std::size_t w = 0; w < words.size(); ++w) {
        const Word& word = words[w];
        if (word.core_begin >= word.core_end) continue;
        std::string_view core(text.data() + word.core_begin, word.core_end - word.core_begin);
        if (core[0] == '$' && core.size() > 1 &&
            std::isdigit(static_cast<unsigned char>(core[1]))) {
            kinds[w] = Kind::money;
        } else if (std::all_of(core.begin(), core.end(), [](unsigned char c) {
                       return std::isdigit(c);
                   })) {
            kinds[w] = Kind::cardinal;
        } else if (std::isupper(static_cast<unsigned char>(core[0])) &&
                   !is_first_person_token(core)) {
            kinds[w] = Kind::capitalized;
        }
    }

    for (std::size_t w = 0; w < words.size();) {
        if (kinds[w] == Kind::money || kinds[w] == Kind::cardinal) {
            const Word& word = words[w];
            std::size_t e = word.core_end;
            if (kinds[w] == Kind::money) {
                // Keep the $ plus the directly attached number, e.g. "$1,299.99".
                e = word.core_begin + 1;
                while (e < word.core_end &&
                       (std::isdigit(static_cast<unsigned char>(text[e])) || text[e] == ',' ||
                        text[e] == '.')) {
                    ++e;
                }
                while (e > word.core_begin + 1 && (text[e - 1] == ',' || text[e - 1] == '.')) --e;
            }
            spans.push_back({word.core_begin, e,
                             kinds[w] == Kind::money ? "MONEY" : "CARDINAL",
                             text.substr(word.core_begin, e - word.core_begin)});
            ++w;
            continue;
        }
        if (kinds[w] == Kind::capitalized) {
            std::size_t r = w;
            while (r + 1 < words.size() && kinds[r + 1] == Kind::capitalized &&
                   !ends_sentence(text, words[r])) {
                ++r;
            }
            const bool sentence_initial = (w == 0) || ends_sentence(text, words[w - 1]);
            const std::size_t run_len = r - w + 1;
            // A lone sentence-initial capitalized word is ordinary prose, not a name.
            if (run_len >= 2 || !sentence_initial) {
                const std::size_t b = words[w].core_begin;
                const std::size_t e = words[r].core_end;
                spans.push_back({b, e, "PERSON", text.substr(b, e - b)});
            }
            w = r + 1;
            continue;
        }
        ++w;
    }

    std::sort(spans.begin(), spans.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    return spans;
}

LexiconToxicity::LexiconToxicity(std::map<std::string, double> entries)
    : entries_(std::move(entries)) {
    for (const auto& [word, severity] : entries_) {
        if (severity <= 0.0 || severity > 1.0) {
            throw ValidationError("lexicon severity for '" + word + "' outside (0,1]");
        }
    }
}

LexiconToxicity LexiconToxicity::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open toxicity lexicon: " + path);
    std::map<std::string, double> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t tab = t.find('\t');
        if (tab == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected word<TAB>severity");
        }
        const std::string word = lower_ascii(trim(t.substr(0, tab)));
        double severity = 0.0;
        try {
            severity = std::stod(t.substr(tab + 1));
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad severity value");
        }
        entries[word] = severity;
    }
    return LexiconToxicity(std::move(entries));
}

double LexiconToxicity::score(const std::string& text) const {
    double clean = 1.0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) ||
                                   text[j] == '\'')) {
            ++j;
        }
        if (j > i) {
            const std::string word = lower_ascii(std::string_view(text).substr(i, j - i));
            auto it = entries_.find(word);
            if (it != entries_.end()) clean *= 1.0 - it->second;
        }
        i = std::max(j, i + 1);
    }
    return 1.0 - clean;
}

double EntityOverlapFaithfulness::score(const std::string& source,
                                        const std::string& summary) const {
    std::set<std::string> summary_entities;
    for (const EntitySpan& s : ner_->tag(summary)) {
        summary_entities.insert(lower_ascii(normalize_whitespace(s.text)));
    }
    if (!summary_entities.empty()) {
        std::set<std::string> source_entities;
        for (const EntitySpan& s : ner_->tag(source)) {
            source_entities.insert(lower_ascii(normalize_whitespace(s.text)));
        }
        std::size_t hits = 0;
        for (const std::string& e : summary_entities) {
            if (source_entities.count(e)) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(summary_entities.size());
    }
    // Entity-free summary: content-word Jaccard overlap.
    std::vector<std::string> a = content_words(source);
    std::vector<std::string> b = content_words(summary);
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const std::string& w : sb) {
        if (sa.count(w)) ++inter;
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

using SubTable = std::map<std::string, std::string>;

struct LanguageTables {
    SubTable to_pivot;
    SubTable to_english;
};

const std::map<std::string, LanguageTables>& translator_tables() {
    static const std::map<std::string, LanguageTables> tables = {
        {"de",
         {{{"stole", "stahl"}, {"went", "reiste"}, {"spent", "zahlte"}, {"bought", "kaufte"},
           {"big", "gross"}, {"small", "klein"}, {"quickly", "schnell"}, {"house", "haus"},
           {"said", "sagte"}, {"gave", "uebergab"}, {"old", "alt"}, {"money", "geld"},
           {"market", "markt"}, {"supplies", "vorrat"}, {"deal", "abkommen"}},
          {{"stahl", "took"}, {"reiste", "traveled"}, {"zahlte", "paid"},
           {"kaufte", "purchased"}, {"gross", "large"}, {"klein", "little"},
           {"schnell", "fast"}, {"haus", "home"}, {"sagte", "stated"},
           {"uebergab", "handed"}, {"alt", "aged"}, {"geld", "cash"}, {"markt", "store"},
           {"vorrat", "provisions"}, {"abkommen", "bargain"}}}},
        {"fr",
         {{{"stole", "vola"}, {"went", "alla"}, {"spent", "paya"}, {"bought", "acheta"},
           {"big", "grand"}, {"small", "petit"}, {"quickly", "vite"}, {"house", "maison"},
           {"said", "dit"}, {"gave", "donna"}, {"old", "vieux"}, {"money", "argent"},
           {"market", "marche"}, {"supplies", "fournitures"}, {"deal", "accord"}},
          {{"vola", "swiped"}, {"alla", "headed"}, {"paya", "shelled"},
           {"acheta", "acquired"}, {"grand", "sizable"}, {"petit", "tiny"},
           {"vite", "rapidly"}, {"maison", "residence"}, {"dit", "remarked"},
           {"donna", "passed"}, {"vieux", "elderly"}, {"argent", "funds"},
           {"marche", "shop"}, {"fournitures", "goods"}, {"accord", "arrangement"}}}},
        {"es",
         {{{"stole", "robosub"}, {"went", "fuese"}, {"spent", "gastose"},
           {"bought", "comprose"}, {"big", "grandioso"}, {"small", "chico"},
           {"quickly", "rapido"}, {"house", "casona"}, {"said", "dijo"}, {"gave", "diose"},
           {"old", "viejo"}, {"money", "dinero"}, {"market", "mercado"},
           {"supplies", "viveres"}, {"deal", "trato"}},
          {{"robosub", "snatched"}, {"fuese", "moved"}, {"gastose", "expended"},
           {"comprose", "obtained"}, {"grandioso", "huge"}, {"chico", "modest"},
           {"rapido", "swiftly"}, {"casona", "dwelling"}, {"dijo", "mentioned"},
           {"diose", "offered"}, {"viejo", "older"}, {"dinero", "savings"},
           {"mercado", "bazaar"}, {"viveres", "stock"}, {"trato", "agreement"}}}},
    };
    return tables;
}

std::string substitute_words(const std::string& text, const SubTable& table) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
        const std::string word = text.substr(i, j - i);
        auto it = table.find(lower_ascii(word));
        if (it == table.end()) {
            out += word;
        } else {
            std::string repl = it->second;
            if (std::isupper(static_cast<unsigned char>(word[0])) && !repl.empty()) {
                repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
            }
            out += repl;
        }
        i = j;
    }
    return out;
}

}  // namespace

std::string RuleTranslator::translate(const std::string& text, const std::string& src_lang,
                                      const std::string& tgt_lang) {
    const auto& tables = translator_tables();
    if (tgt_lang == "en") {
        auto it = tables.find(src_lang);
        if (it == tables.end()) throw Error("builtin translator: unsupported language " + src_lang);
        return substitute_words(text, it->second.to_english);
    }
    if (src_lang != "en") {
        throw Error("builtin translator: unsupported direction " + src_lang + "->" + tgt_lang);
    }
    auto it = tables.find(tgt_lang);
    if (it == tables.end()) throw Error("builtin translator: unsupported language " + tgt_lang);
    return substitute_words(text, it->second.to_pivot);
}

std::vector<ScoredSequence> TemplateGenerator::generate(const std::string& prompt,
                                                        const GenParams& params) {
    params.validate();
    const uint64_t stream = Rng::mix(params.seed, fnv1a(prompt));
    Rng rng(stream);

    const std::size_t marker = prompt.rfind("Toxic rewrite:");
    if (params.num_beams <= 1 && marker != std::string::npos) {
        // Few-shot toxic rewriting. Output echoes the prompt, as a real causal
        // LM would, so downstream stripping is exercised.
        std::size_t input_begin = prompt.rfind("Original text:");
        std::string input = input_begin == std::string::npos
                                ? std::string("that story")
                                : trim(prompt.substr(input_begin + 14, marker - input_begin - 14));
        std::vector<std::string> subject_words = content_words(input);
        std::string subject = subject_words.empty() ? "story" : subject_words.front();
        static const std::array<const char*, 4> adjectives = {"useless", "pathetic",
                                                              "incompetent", "worthless"};
        static const std::array<const char*, 3> shapes = {
            "Of course the %A %S ruined everything again. Typical %B nonsense from a complete idiot.",
            "What a %A excuse of a %S. Only a %B fool would believe any of it.",
            "Absolutely %A %S. These people are %B and stupid beyond help."};
        std::string text = shapes[rng.bounded(shapes.size())];
        const std::string a = adjectives[rng.bounded(adjectives.size())];
        const std::string b = adjectives[rng.bounded(adjectives.size())];
        auto replace_all = [](std::string s, const std::string& from, const std::string& to) {
            std::size_t pos = 0;
            while ((pos = s.find(from, pos)) != std::string::npos) {
                s.replace(pos, from.size(), to);
                pos += to.size();
            }
            return s;
        };
        text = replace_all(text, "%A", a);
        text = replace_all(text, "%B", b);
        text = replace_all(text, "%S", subject);
        const std::string full = prompt + "\n" + text;
        return {{full, -0.5 * static_cast<double>(word_count(text)),
                 static_cast<int>(word_count(text))}};
    }

    // Beam-style request: degenerate low-confidence candidates.
    static const std::array<const char*, 4> fillers = {
        "is a great thing. It is a good thing.",
        "was there and then it was there again.",
        "is what it is and that is just that.",
        "did the thing that it always did before."};
    std::vector<std::string> words = split_whitespace(prompt);
    const int n = std::max(1, params.num_return_sequences);
    std::vector<ScoredSequence> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::string head;
        const std::size_t take = std::min<std::size_t>(words.size(), 3 + rng.bounded(3));
        for (std::size_t w = 0; w < take; ++w) {
            if (!head.empty()) head.push_back(' ');
            head += words[w];
        }
        std::string text = head.empty() ? std::string(fillers[rng.bounded(fillers.size())])
                                        : head + " " + fillers[rng.bounded(fillers.size())];
        const int len = static_cast<int>(word_count(text));
        const double log_prob = -(0.4 + rng.uniform() * 2.0) * static_cast<double>(len);
        out.push_back({std::move(text), log_prob, len});
    }
    return out;
}

std::string WordListMaskFiller::fill(const std::string& text_with_masks, int top_k,
                                     double temperature, uint64_t seed) {
    static const std::array<const char*, 12> vocabulary = {
        "nothing", "someone",  "somewhere", "later", "never",  "recently",
        "twice",   "entirely", "$100",      "42",    "Sunday", "elsewhere"};
    (void)temperature;  // folded into the seed stream only
    std::string out;
    out.reserve(text_with_masks.size());
    std::size_t i = 0;
    std::size_t occurrence = 0;
    while (i < text_with_masks.size()) {
        if (text_with_masks.compare(i, marker_.size(), marker_) == 0) {
            Rng rng(Rng::mix(seed, occurrence * 2654435761ull + static_cast<uint64_t>(top_k)));
            const std::size_t span = std::min<std::size_t>(
                vocabulary.size(), static_cast<std::size_t>(std::max(1, top_k)));
            out += vocabulary[rng.bounded(span)];
            i += marker_.size();
            ++occurrence;
        } else {
            out.push_back(text_with_masks[i]);
            ++i;
        }
    }
    return out;
}

BackendSuite make_suite(const BackendSelection& selection) {
    auto unsupported = [](const std::string& role, const std::string& name) -> std::string {
        if (name.rfind("external:", 0) == 0) {
            return "backend '" + name + "' for " + role +
                   " requires an adapter that is not registered in this build";
        }
        return "unknown " + role + " backend '" + name + "'";
    };

    BackendSuite suite;
    if (selection.ner == "heuristic") {
        suite.ner = std::make_shared<HeuristicNer>();
    } else {
        throw ValidationError(unsupported("ner", selection.ner));
    }
    if (selection.toxicity == "lexicon") {
        suite.toxicity =
            std::make_shared<LexiconToxicity>(LexiconToxicity::from_file(selection.lexicon_path));
    } else {
        throw ValidationError(unsupported("toxicity", selection.toxicity));
    }
    if (selection.faithfulness == "entity_overlap") {
        suite.faithfulness = std::make_shared<EntityOverlapFaithfulness>(suite.ner);
    } else {
        throw ValidationError(unsupported("faithfulness", selection.faithfulness));
    }
    if (selection.translator == "builtin") {
        suite.translator = std::make_shared<RuleTranslator>();
    } else {
        throw ValidationError(unsupported("translator", selection.translator));
    }
    if (selection.generator == "builtin") {
        suite.generator = std::make_shared<TemplateGenerator>();
    } else {
        throw ValidationError(unsupported("generator", selection.generator));
    }
    if (selection.mask_filler == "builtin") {
        suite.mask_filler = std::make_shared<WordListMaskFiller>(selection.mask_marker);
    } else {
        throw ValidationError(unsupported("mask_filler", selection.mask_filler));
    }
    return suite;
}

}  // namespace dbc

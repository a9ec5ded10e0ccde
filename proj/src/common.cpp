#include "dbc/common.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace dbc {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

const std::unordered_set<std::string>& stopword_set() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",   "be",    "been",  "but",
        "by",   "can",  "do",   "does", "for",  "from", "had",   "has",   "have",
        "he",   "her",  "his",  "i",    "if",   "in",   "is",    "it",    "its",
        "me",   "my",   "no",   "not",  "of",   "on",   "or",    "our",   "shall",
        "she",  "should", "so", "some", "than", "that", "the",   "their", "them",
        "then", "there", "they", "this", "to",  "us",   "was",   "we",    "were",
        "what", "when", "which", "who", "will", "with", "would", "you",   "your",
        "about", "all", "am",   "any",  "because", "just", "into", "out", "up",
    };
    return words;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    bool in_gap = true;
    for (char c : s) {
        if (is_space(c)) {
            if (!in_gap) out.push_back(' ');
            in_gap = true;
        } else {
            out.push_back(c);
            in_gap = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::size_t word_count(std::string_view s) {
    return split_whitespace(s).size();
}

bool is_stopword(std::string_view lowercased) {
    return stopword_set().count(std::string(lowercased)) > 0;
}

std::vector<std::string> content_words(std::string_view s) {
    std::vector<std::string> out;
    for (const std::string& raw : split_whitespace(s)) {
        std::size_t b = 0;
        std::size_t e = raw.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (e <= b) continue;
        std::string word = lower_ascii(std::string_view(raw).substr(b, e - b));
        if (!is_stopword(word)) out.push_back(std::move(word));
    }
    return out;
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t Rng::splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t Rng::next_u64() {
    // xorshift64* over a splitmix-initialized state.
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
}

uint64_t Rng::bounded(uint64_t n) {
    if (n == 0) throw Error("Rng::bounded: n must be >= 1");
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    have_spare_ = true;
    return mag * std::cos(two_pi * u2);
}

uint64_t Rng::mix(uint64_t seed, uint64_t salt) {
    return splitmix(seed ^ splitmix(salt));
}

}  // namespace dbc

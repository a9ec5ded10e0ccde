#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dbc {

// Base error for everything the library raises.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad inputs, bad configs, violated invariants. The CLI maps these to exit 1;
// any other Error (backend failures, I/O mid-run) maps to exit 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

// Collapses runs of whitespace to single spaces and trims. Used when two
// texts must be compared "up to whitespace".
std::string normalize_whitespace(std::string_view s);

std::size_t word_count(std::string_view s);

// Words with leading/trailing non-alphanumeric characters stripped,
// lowercased; function words removed. Shared by the faithfulness fallback
// and the non-sequitur heuristic.
std::vector<std::string> content_words(std::string_view s);

bool is_stopword(std::string_view lowercased);

uint64_t fnv1a(std::string_view s);

// Deterministic, implementation-independent RNG. std::mt19937_64 drives the
// raw stream; bounded draws and gaussians are coded explicitly so results do
// not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed)) {}

    uint64_t next_u64();
    // Uniform in [0, n), n >= 1.
    uint64_t bounded(uint64_t n);
    // Uniform in [0, 1).
    double uniform();
    // Standard normal via Box-Muller.
    double normal();

    // Derives an independent stream, e.g. one per sample.
    static uint64_t mix(uint64_t seed, uint64_t salt);

private:
    static uint64_t splitmix(uint64_t x);
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dbc

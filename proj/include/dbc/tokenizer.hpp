#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dbc {

// Character range [start, end) covered by one token of the original text.
using TokenOffset = std::pair<std::size_t, std::size_t>;

// Minimal tokenizer capability. Adapters for real model tokenizers implement
// the same surface; the desk-scale default is byte-level.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::vector<int> encode(std::string_view text) const = 0;
    // Decodes token ids back to text, skipping special tokens.
    virtual std::string decode(const std::vector<int>& ids) const = 0;
    // Character span of each token. Offsets drive the entity-mask mapping.
    virtual std::vector<TokenOffset> offsets(std::string_view text) const = 0;

    virtual int vocab_size() const = 0;
    virtual int sep_id() const = 0;
    virtual int eos_id() const = 0;
    virtual int pad_id() const = 0;
};

// Fixed byte-level tokenizer: ids 0..255 are raw bytes, specials follow.
// Token i of a text covers exactly byte [i, i+1), so offset mapping is exact
// and multi-byte UTF-8 falls back to per-byte tokens.
class ByteTokenizer final : public Tokenizer {
public:
    static constexpr int kSep = 256;
    static constexpr int kEos = 257;
    static constexpr int kPad = 258;

    std::vector<int> encode(std::string_view text) const override;
    std::string decode(const std::vector<int>& ids) const override;
    std::vector<TokenOffset> offsets(std::string_view text) const override;

    int vocab_size() const override { return 259; }
    int sep_id() const override { return kSep; }
    int eos_id() const override { return kEos; }
    int pad_id() const override { return kPad; }
};

}  // namespace dbc

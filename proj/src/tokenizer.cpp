#include "dbc/tokenizer.hpp"

namespace dbc {

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(c));
    return ids;
}

std::string ByteTokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
    }
    return out;
}

std::vector<TokenOffset> ByteTokenizer::offsets(std::string_view text) const {
    std::vector<TokenOffset> out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) out.emplace_back(i, i + 1);
    return out;
}

}  // namespace dbc

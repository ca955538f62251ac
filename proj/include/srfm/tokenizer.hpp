#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace srfm {

// Reserved rows in every embedding table.
constexpr int kEmptyRow = 0;  // empty / default slot
constexpr int kOovRow = 1;    // out-of-vocabulary slot

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Stateless hash tokenizer: lowercase, split on anything that is not
// alphanumeric, hash each token into [2, vocab_size). Total and pure.
inline std::vector<int> tokenize(std::string_view text, int vocab_size) {
    std::vector<int> ids;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::uint64_t h = fnv1a64(token);
        ids.push_back(2 + static_cast<int>(h % static_cast<std::uint64_t>(vocab_size - 2)));
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c))
            token.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    return ids;
}

// Maps an integer id from data into table rows: [0, vocab) shifts past the
// two reserved rows, anything else lands on the OOV row.
inline int id_to_row(long long id, int vocab_rows) {
    if (id < 0 || id + 2 >= vocab_rows) return kOovRow;
    return static_cast<int>(id) + 2;
}

// Query strings are also embedded as IDs; the string hashes into the
// query-ID table (never OOV, by construction).
inline int query_id_row(std::string_view query, int vocab_rows) {
    return 2 + static_cast<int>(fnv1a64(query) % static_cast<std::uint64_t>(vocab_rows - 2));
}

}  // namespace srfm

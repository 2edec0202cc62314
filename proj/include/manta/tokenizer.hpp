#pragma once
// Frozen tokenization rule used everywhere token counts or token identity
// matter. A token is a maximal run of ASCII alphanumerics (lowercased) or
// non-ASCII bytes; every other byte is a separator. Changing this rule
// invalidates stored indexes and test fixtures.

#include <string>
#include <string_view>
#include <vector>

namespace manta {

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        bool keep = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch >= 0x80;
        if (ch >= 'A' && ch <= 'Z') {
            ch = static_cast<unsigned char>(ch - 'A' + 'a');
            keep = true;
        }
        if (keep) {
            cur.push_back(static_cast<char>(ch));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::size_t token_count(std::string_view text) { return tokenize(text).size(); }

// Sentence split on ASCII sentence-final punctuation ('.', '!', '?').
// Fragments are trimmed; empty fragments dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        cur.push_back(ch);
        if (ch == '.' || ch == '!' || ch == '?') {
            std::size_t b = cur.find_first_not_of(" \t\r\n");
            if (b != std::string::npos) out.push_back(cur.substr(b));
            cur.clear();
        }
    }
    std::size_t b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
        std::size_t e = cur.find_last_not_of(" \t\r\n");
        out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

} // namespace manta

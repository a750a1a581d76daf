#pragma once
// Tokenization. Default is whitespace splitting; anything fancier can be
// plugged in wherever a Tokenizer is accepted.

#include <cctype>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace hiermem {

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

inline std::vector<std::string> whitespace_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

inline const Tokenizer& default_tokenizer() {
    static const Tokenizer t = [](std::string_view s) { return whitespace_tokenize(s); };
    return t;
}

inline std::size_t count_tokens(std::string_view text, const Tokenizer& tok = default_tokenizer()) {
    return tok(text).size();
}

}  // namespace hiermem

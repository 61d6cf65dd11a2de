#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lirag/common.hpp"

namespace lirag {

struct TokenSeq {
    std::vector<std::string> tokens;

    size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

/// Default pipeline: ASCII letters are lowercased, tokens are maximal runs of
/// alphanumeric code points. ASCII punctuation, whitespace and the common
/// Unicode punctuation blocks act as separators; other multi-byte code points
/// pass through unchanged.
TokenSeq tokenize(std::string_view text);

/// Splits on ASCII whitespace only, lowercasing ASCII letters.
TokenSeq tokenize_whitespace(std::string_view text);

using TokenizerFn = std::function<TokenSeq(std::string_view)>;

/// Lookup by config name ("default" or "whitespace"). Throws on unknown names.
TokenizerFn tokenizer_by_name(const std::string& name);

}  // namespace lirag

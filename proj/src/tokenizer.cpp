#include "lirag/tokenizer.hpp"

#include <cctype>

#include "lirag/common.hpp"

namespace lirag {

namespace {

// Decodes one UTF-8 code point starting at i; returns (code point, byte length).
// Invalid sequences decode as a single replacement byte so they act as separators.
std::pair<uint32_t, size_t> decode_utf8(std::string_view s, size_t i) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) return {c0, 1};
    size_t len = 0;
    uint32_t cp = 0;
    if ((c0 & 0xe0) == 0xc0) {
        len = 2;
        cp = c0 & 0x1f;
    } else if ((c0 & 0xf0) == 0xe0) {
        len = 3;
        cp = c0 & 0x0f;
    } else if ((c0 & 0xf8) == 0xf0) {
        len = 4;
        cp = c0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (i + len > s.size()) return {0xFFFD, 1};
    for (size_t k = 1; k < len; ++k) {
        unsigned char ck = static_cast<unsigned char>(s[i + k]);
        if ((ck & 0xc0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (ck & 0x3f);
    }
    return {cp, len};
}

bool is_separator_cp(uint32_t cp) {
    if (cp < 0x80) {
        return !std::isalnum(static_cast<int>(cp));
    }
    // Latin-1 punctuation and signs.
    if (cp >= 0xA0 && cp <= 0xBF) return true;
    if (cp == 0xD7 || cp == 0xF7) return true;
    // General punctuation, supplemental punctuation, CJK symbols, fullwidth forms.
    if (cp >= 0x2000 && cp <= 0x206F) return true;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;
    if (cp >= 0x3000 && cp <= 0x303F) return true;
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;
    if (cp >= 0xFF1A && cp <= 0xFF20) return true;
    if (cp >= 0xFF3B && cp <= 0xFF40) return true;
    if (cp >= 0xFF5B && cp <= 0xFF65) return true;
    if (cp == 0xFFFD) return true;
    return false;
}

void append_cp(std::string& out, std::string_view src, size_t i, size_t len, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
        out.append(src.substr(i, len));
    }
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
    TokenSeq seq;
    std::string current;
    size_t i = 0;
    while (i < text.size()) {
        auto [cp, len] = decode_utf8(text, i);
        if (is_separator_cp(cp)) {
            if (!current.empty()) {
                seq.tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            append_cp(current, text, i, len, cp);
        }
        i += len;
    }
    if (!current.empty()) seq.tokens.push_back(std::move(current));
    return seq;
}

TokenSeq tokenize_whitespace(std::string_view text) {
    TokenSeq seq;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!current.empty()) {
                seq.tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) seq.tokens.push_back(std::move(current));
    return seq;
}

TokenizerFn tokenizer_by_name(const std::string& name) {
    if (name == "default") return [](std::string_view t) { return tokenize(t); };
    if (name == "whitespace") return [](std::string_view t) { return tokenize_whitespace(t); };
    throw Error("unknown tokenizer: " + name);
}

}  // namespace lirag

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lirag/generation.hpp"
#include "lirag/llm_client.hpp"
#include "lirag/qgen.hpp"
#include "lirag/tokenizer.hpp"
#include "lirag/util.hpp"

namespace lirag {

namespace {

// Keyed-template conventions:
//   - a question token "ask<id>" marks document token "key<id>" as the
//     relevance key: a document answers the question iff it contains it;
//   - a relevant document's first "code*" token is quoted as the answer.
// Everything is a pure function of the prompt, so runs are reproducible.

constexpr const char* kAskPrefix = "ask";
constexpr const char* kKeyPrefix = "key";
constexpr const char* kCodePrefix = "code";

std::optional<std::string> slice_between(const std::string& text, const std::string& begin,
                                         const std::string& end) {
    size_t b = text.find(begin);
    if (b == std::string::npos) return std::nullopt;
    b += begin.size();
    size_t e = end.empty() ? text.size() : text.find(end, b);
    if (e == std::string::npos) return std::nullopt;
    return text.substr(b, e - b);
}

bool starts_with(const std::string& text, const std::string& prefix) {
    return text.rfind(prefix, 0) == 0;
}

std::vector<TokenLogprob> fake_logprobs(const std::string& text) {
    std::vector<TokenLogprob> out;
    size_t start = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ') {
            size_t end = i == text.size() ? i : i + 1;  // keep the space with the token
            if (end > start) {
                std::string token = text.substr(start, end - start);
                double lp = -0.02 - static_cast<double>(fnv1a64(token) % 100) / 1000.0;
                out.push_back({std::move(token), lp});
            }
            start = end;
        }
    }
    return out;
}

LlmResponse respond(const std::string& text, bool want_logprobs) {
    LlmResponse resp;
    resp.text = text;
    if (want_logprobs) resp.token_logprobs = fake_logprobs(text);
    return resp;
}

LlmResponse answer_cot(const std::string& prompt, bool want_logprobs) {
    auto doc_text = slice_between(prompt, "Document:\n", "\n\nQuestion:\n");
    auto question = slice_between(prompt, "\n\nQuestion:\n", "");
    if (!doc_text || !question) return respond("Answer: Irrelevant.", want_logprobs);

    TokenSeq doc_toks = tokenize(*doc_text);
    TokenSeq q_toks = tokenize(*question);

    std::vector<std::string> wanted_keys;
    for (const auto& t : q_toks.tokens)
        if (starts_with(t, kAskPrefix) && t.size() > 3)
            wanted_keys.push_back(kKeyPrefix + t.substr(3));

    bool relevant = false;
    for (const auto& key : wanted_keys) {
        for (const auto& t : doc_toks.tokens) {
            if (t == key) {
                relevant = true;
                break;
            }
        }
        if (relevant) break;
    }

    std::ostringstream summary;
    summary << "The document covers";
    for (size_t i = 0; i < doc_toks.tokens.size() && i < 3; ++i)
        summary << " " << doc_toks.tokens[i];
    summary << ".";

    if (!relevant || wanted_keys.empty()) {
        return respond(summary.str() + " It does not address the question. Answer: Irrelevant.",
                       want_logprobs);
    }

    std::string code;
    for (const auto& t : doc_toks.tokens) {
        if (starts_with(t, kCodePrefix) && t.size() > 4) {
            code = t;
            break;
        }
    }
    if (code.empty()) code = doc_toks.tokens.front();
    return respond(summary.str() + " It directly addresses the question. Answer: The code is " +
                       code + ".",
                   want_logprobs);
}

LlmResponse answer_qgen(const std::string& prompt, bool want_logprobs, bool fact) {
    auto doc_text = slice_between(prompt, "Document:\n", "\n\nQuestions:");
    if (!doc_text) return respond("", want_logprobs);
    TokenSeq toks = tokenize(*doc_text);
    if (toks.empty()) return respond("", want_logprobs);

    std::ostringstream out;
    for (size_t line = 0; line < 3; ++line) {
        out << (fact ? "what is" : "how can");
        for (size_t i = 0; i < 3; ++i) {
            size_t idx = (line * 2 + i) % toks.size();
            out << " " << toks.tokens[idx];
        }
        out << (fact ? "?" : " be handled?") << "\n";
    }
    return respond(out.str(), want_logprobs);
}

}  // namespace

LlmResponse MockLlmClient::generate(const LlmRequest& req) {
    if (starts_with(req.prompt, cot_instruction()))
        return answer_cot(req.prompt, req.want_logprobs);
    if (starts_with(req.prompt, InstructionTemplate::fact().system_text))
        return answer_qgen(req.prompt, req.want_logprobs, true);
    if (starts_with(req.prompt, InstructionTemplate::solution().system_text))
        return answer_qgen(req.prompt, req.want_logprobs, false);
    // Unknown layout: echo a fixed acknowledgement.
    return respond("ok", req.want_logprobs);
}

}  // namespace lirag

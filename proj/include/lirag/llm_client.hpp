#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lirag/common.hpp"

namespace lirag {

struct LlmRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;
    bool want_logprobs = false;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct LlmResponse {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
};

/// Implementations must be safe to call from multiple threads.
class LlmClient {
  public:
    virtual ~LlmClient() = default;
    virtual LlmResponse generate(const LlmRequest& req) = 0;
};

/// Enforces the response contract: when logprobs were requested they must be
/// present and their token concatenation must reconstruct the text.
void validate_response(const LlmRequest& req, const LlmResponse& resp);

struct LlmOutcome {
    std::optional<LlmResponse> response;
    std::string error;  // non-empty iff the call failed
};

/// Runs requests with at most max_in_flight concurrent calls. Results are
/// returned in input order, so concurrency never changes outputs.
std::vector<LlmOutcome> generate_all(LlmClient& client, const std::vector<LlmRequest>& requests,
                                     size_t max_in_flight = 4);

/// POST {endpoint}/v1/generate with JSON body
/// {prompt, max_tokens, temperature, want_logprobs}; expects
/// {text, token_logprobs: [[token, logprob], ...]?}.
class HttpLlmClient : public LlmClient {
  public:
    HttpLlmClient(std::string endpoint, int timeout_ms = 30000);
    LlmResponse generate(const LlmRequest& req) override;

  private:
    std::string host_;
    int port_ = 80;
    int timeout_ms_;
};

/// Deterministic offline stand-in for the fine-tuned LLM. Recognizes the
/// question-generation and answering prompt layouts and produces keyed output
/// derived from the document tokens, so full pipelines run without a server.
class MockLlmClient : public LlmClient {
  public:
    LlmResponse generate(const LlmRequest& req) override;
};

std::unique_ptr<LlmClient> make_client(const std::string& kind, const std::string& endpoint,
                                       int timeout_ms);

}  // namespace lirag

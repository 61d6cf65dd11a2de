#include "lirag/llm_client.hpp"

#include <atomic>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace lirag {

void validate_response(const LlmRequest& req, const LlmResponse& resp) {
    if (!req.want_logprobs) return;
    if (!resp.token_logprobs)
        throw Error("llm response missing token_logprobs");
    std::string concat;
    for (const auto& tl : *resp.token_logprobs) concat += tl.token;
    if (concat != resp.text)
        throw Error("llm response token_logprobs do not reconstruct text");
}

std::vector<LlmOutcome> generate_all(LlmClient& client, const std::vector<LlmRequest>& requests,
                                     size_t max_in_flight) {
    std::vector<LlmOutcome> outcomes(requests.size());
    if (requests.empty()) return outcomes;

    size_t n_threads = std::min(max_in_flight == 0 ? size_t{1} : max_in_flight, requests.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= requests.size()) break;
            try {
                LlmResponse resp = client.generate(requests[i]);
                validate_response(requests[i], resp);
                outcomes[i].response = std::move(resp);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };

    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return outcomes;
}

namespace {

// Splits "host:port" or "http://host:port"; path suffixes are not supported.
void parse_endpoint(const std::string& endpoint, std::string& host, int& port) {
    std::string rest = endpoint;
    auto scheme = rest.find("://");
    if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
    while (!rest.empty() && rest.back() == '/') rest.pop_back();
    auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
        host = rest;
        port = 80;
    } else {
        host = rest.substr(0, colon);
        port = std::stoi(rest.substr(colon + 1));
    }
    if (host.empty()) throw Error("invalid client endpoint: " + endpoint);
}

}  // namespace

HttpLlmClient::HttpLlmClient(std::string endpoint, int timeout_ms) : timeout_ms_(timeout_ms) {
    parse_endpoint(endpoint, host_, port_);
}

LlmResponse HttpLlmClient::generate(const LlmRequest& req) {
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(0, timeout_ms_ * 1000);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

    nlohmann::json body = {
        {"prompt", req.prompt},
        {"max_tokens", req.max_tokens},
        {"temperature", req.temperature},
        {"want_logprobs", req.want_logprobs},
    };
    auto res = cli.Post("/v1/generate", body.dump(), "application/json");
    if (!res) throw Error("llm client: transport failure contacting " + host_);
    if (res->status != 200)
        throw Error("llm client: server returned status " + std::to_string(res->status));

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
        throw Error(std::string("llm client: invalid JSON response: ") + e.what());
    }

    LlmResponse resp;
    resp.text = j.at("text").get<std::string>();
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
        std::vector<TokenLogprob> logprobs;
        for (const auto& entry : j["token_logprobs"]) {
            if (!entry.is_array() || entry.size() != 2)
                throw Error("llm client: malformed token_logprobs entry");
            logprobs.push_back({entry[0].get<std::string>(), entry[1].get<double>()});
        }
        resp.token_logprobs = std::move(logprobs);
    }
    return resp;
}

std::unique_ptr<LlmClient> make_client(const std::string& kind, const std::string& endpoint,
                                       int timeout_ms) {
    if (kind == "mock") return std::make_unique<MockLlmClient>();
    if (kind == "http") return std::make_unique<HttpLlmClient>(endpoint, timeout_ms);
    throw Error("unknown client kind: " + kind);
}

}  // namespace lirag

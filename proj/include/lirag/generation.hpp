#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lirag/corpus.hpp"
#include "lirag/llm_client.hpp"

namespace lirag {

/// Produces up to k results for a query; shared by both retriever backends.
using RetrieverFn = std::function<RankedList(const Query&, size_t)>;

/// The three-step answering instruction asset.
const std::string& cot_instruction();

/// "Document: ... Question: ..." block, the per-document model input.
std::string render_doc_question(std::string_view doc_text, std::string_view question);

struct CotPrompt {
    std::string doc_id;
    std::string rendered;  // instruction, then document, then question
};

CotPrompt build_cot_prompt(const Document& doc, const Query& q);

struct GenParams {
    std::string irrelevance_marker = "irrelevant";  // prefix match, case-insensitive
    std::string answer_delimiter = "Answer:";       // last occurrence wins
};

enum class Verdict { relevant, irrelevant };

struct CotAnswer {
    std::string doc_id;
    std::string summary;
    Verdict verdict = Verdict::irrelevant;
    std::string answer_text;   // empty iff irrelevant
    double mean_logprob = 0.0; // over the answer span only; always <= 0
};

/// Parses a response with token logprobs. The answer segment is everything
/// after the last answer delimiter; its mean token logprob realizes the
/// length-normalized answer probability. Throws ParseError when the delimiter
/// is missing, when the answer span holds no tokens, or when a logprob is
/// positive.
CotAnswer parse_cot_response(const LlmResponse& resp, const std::string& doc_id,
                             const GenParams& params = {});

/// Relevant answer with the highest mean logprob; ties prefer the lower list
/// position, then the lower doc_id. Empty when every answer is irrelevant.
std::optional<CotAnswer> integrate_answers(const std::vector<CotAnswer>& answers);

struct IntegrationResult {
    std::optional<CotAnswer> final;
    size_t retrieval_rounds_used = 0;
    size_t candidates_examined = 0;
    std::vector<CotAnswer> all_answers;  // in examination order
    std::vector<std::string> warnings;
};

/// Round r examines ranks ((r-1)*k, r*k], prompting each document separately.
/// Stops at the first round whose integration yields an answer, when the
/// ranking is exhausted, or after max_rounds.
IntegrationResult answer_question(const Query& q, const RetrieverFn& retriever,
                                  const Corpus& corpus, LlmClient& client, size_t k,
                                  size_t max_rounds, const GenParams& params = {},
                                  size_t max_in_flight = 4, int client_max_tokens = 512);

struct QaPair {
    Query query;
    std::string gold_answer;
};

std::vector<QaPair> load_qa_pairs(const std::string& path);
void save_qa_pairs(const std::string& path, const std::vector<QaPair>& pairs);

struct ExportLog {
    size_t records = 0;
    std::vector<std::string> skipped;  // query ids with retrieval failures
};

/// k records per QA pair (fewer when retrieval returns fewer documents):
/// {instruction, input: document-question block, output: gold answer}.
ExportLog export_generation_finetune(const std::vector<QaPair>& qa_pairs,
                                     const RetrieverFn& retriever, const Corpus& corpus, size_t k,
                                     const std::string& path);

/// Audit trace: one JSON object per question listing every per-document
/// answer, its verdict and probabilities, and the chosen document.
std::string answer_trace_json(const Query& q, const IntegrationResult& result);

}  // namespace lirag

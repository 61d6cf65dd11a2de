#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lirag/corpus.hpp"
#include "lirag/llm_client.hpp"

namespace lirag {

enum class TemplateKind { fact, solution };

const char* to_string(TemplateKind k);
TemplateKind template_kind_from_string(const std::string& s);

/// Versioned instruction asset driving question generation. The rendered
/// prompt embeds the document text exactly once.
struct InstructionTemplate {
    TemplateKind kind;
    std::string system_text;

    std::string render(std::string_view doc_text) const;
    QueryType query_type() const;

    static InstructionTemplate fact();
    static InstructionTemplate solution();
    static InstructionTemplate by_name(const std::string& name);
};

struct GeneratedQuestions {
    std::vector<QDPair> pairs;
    struct DocIssue {
        std::string doc_id;
        std::string reason;  // transport failure or zero yield
    };
    std::vector<DocIssue> issues;
};

/// One question per non-empty response line, truncated at per_doc. Client
/// failures are recorded per document and the pipeline continues.
GeneratedQuestions generate_questions(LlmClient& client, const Corpus& corpus,
                                      const InstructionTemplate& tmpl, size_t per_doc,
                                      size_t max_in_flight = 4, int max_tokens = 256,
                                      double temperature = 0.8);

/// Writes {instruction, input, output} per annotated pair, ordered by
/// (doc_id, query_id). Returns the record count; re-export is byte-identical.
size_t export_qgen_finetune(const std::vector<QDPair>& pairs, const Corpus& corpus,
                            const InstructionTemplate& tmpl, const std::string& path);

}  // namespace lirag

#include "lirag/generation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace lirag {

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Byte offset just past the last case-insensitive occurrence of needle.
std::optional<size_t> find_last_delimiter(const std::string& text, const std::string& needle) {
    if (needle.empty()) return std::nullopt;
    std::string lower_text = ascii_lower(text);
    std::string lower_needle = ascii_lower(needle);
    size_t pos = lower_text.rfind(lower_needle);
    if (pos == std::string::npos) return std::nullopt;
    return pos + needle.size();
}

}  // namespace

const std::string& cot_instruction() {
    static const std::string text =
        "Please follow the steps below to ensure an accurate response:\n"
        "1. Thoroughly read the provided document and provide a brief yet comprehensive "
        "summary of its main points.\n"
        "2. Assess and elucidate how the given document can be applied to address the given "
        "question.\n"
        "3. If the document is deemed irrelevant, indicate this by outputting the term "
        "\"irrelevant\". Otherwise, provide the answer along with the corresponding supporting "
        "information.";
    return text;
}

std::string render_doc_question(std::string_view doc_text, std::string_view question) {
    std::string out = "Document:\n";
    out += doc_text;
    out += "\n\nQuestion:\n";
    out += question;
    return out;
}

CotPrompt build_cot_prompt(const Document& doc, const Query& q) {
    CotPrompt prompt;
    prompt.doc_id = doc.id;
    prompt.rendered = cot_instruction();
    prompt.rendered += "\n\n";
    prompt.rendered += render_doc_question(doc.text, q.text);
    return prompt;
}

CotAnswer parse_cot_response(const LlmResponse& resp, const std::string& doc_id,
                             const GenParams& params) {
    if (!resp.token_logprobs)
        throw ParseError("cot response for " + doc_id + " lacks token logprobs");

    auto answer_start = find_last_delimiter(resp.text, params.answer_delimiter);
    if (!answer_start)
        throw ParseError("cot response for " + doc_id + " has no answer delimiter \"" +
                         params.answer_delimiter + "\"");

    CotAnswer answer;
    answer.doc_id = doc_id;
    answer.summary = trim(resp.text.substr(
        0, *answer_start >= params.answer_delimiter.size()
               ? *answer_start - params.answer_delimiter.size()
               : 0));
    std::string segment = trim(resp.text.substr(*answer_start));

    std::string folded = ascii_lower(segment);
    std::string marker = ascii_lower(params.irrelevance_marker);
    bool irrelevant = folded.rfind(marker, 0) == 0;

    // Mean logprob over tokens whose span starts at or after the delimiter end.
    double sum = 0.0;
    size_t count = 0;
    size_t offset = 0;
    for (const auto& tl : *resp.token_logprobs) {
        if (tl.logprob > 0.0)
            throw ParseError("cot response for " + doc_id + " has a positive token logprob");
        if (offset >= *answer_start) {
            sum += tl.logprob;
            ++count;
        }
        offset += tl.token.size();
    }
    if (count == 0)
        throw ParseError("cot response for " + doc_id + " has no tokens in the answer span");

    answer.mean_logprob = sum / static_cast<double>(count);
    if (!std::isfinite(answer.mean_logprob))
        throw ParseError("cot response for " + doc_id + " has non-finite answer logprobs");

    if (irrelevant) {
        answer.verdict = Verdict::irrelevant;
        answer.answer_text.clear();
    } else {
        answer.verdict = Verdict::relevant;
        answer.answer_text = segment;
        if (answer.answer_text.empty())
            throw ParseError("cot response for " + doc_id + " has an empty answer segment");
    }
    return answer;
}

std::optional<CotAnswer> integrate_answers(const std::vector<CotAnswer>& answers) {
    // List order is retrieval rank, so keeping the first strict maximum
    // realizes the lower-rank-then-doc_id tie-break.
    const CotAnswer* best = nullptr;
    for (const CotAnswer& a : answers) {
        if (a.verdict != Verdict::relevant) continue;
        if (best == nullptr || a.mean_logprob > best->mean_logprob) best = &a;
    }
    if (best == nullptr) return std::nullopt;
    return *best;
}

IntegrationResult answer_question(const Query& q, const RetrieverFn& retriever,
                                  const Corpus& corpus, LlmClient& client, size_t k,
                                  size_t max_rounds, const GenParams& params,
                                  size_t max_in_flight, int client_max_tokens) {
    if (k < 1) throw Error("answer_question: k must be >= 1");
    if (max_rounds < 1) throw Error("answer_question: max_rounds must be >= 1");

    IntegrationResult result;
    for (size_t round = 1; round <= max_rounds; ++round) {
        RankedList ranking = retriever(q, round * k);
        size_t begin = (round - 1) * k;
        if (ranking.size() <= begin) break;  // retriever exhausted
        size_t end = std::min(ranking.size(), round * k);

        std::vector<LlmRequest> requests;
        std::vector<std::string> doc_ids;
        for (size_t i = begin; i < end; ++i) {
            const Document& doc = corpus.at(ranking[i].doc_id);
            LlmRequest req;
            req.prompt = build_cot_prompt(doc, q).rendered;
            req.max_tokens = client_max_tokens;
            req.temperature = 0.0;
            req.want_logprobs = true;
            requests.push_back(std::move(req));
            doc_ids.push_back(doc.id);
        }

        std::vector<LlmOutcome> outcomes = generate_all(client, requests, max_in_flight);
        result.retrieval_rounds_used = round;
        result.candidates_examined += requests.size();

        std::vector<CotAnswer> round_answers;
        for (size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].response) {
                result.warnings.push_back("doc " + doc_ids[i] + ": " + outcomes[i].error +
                                          "; treated as irrelevant");
                round_answers.push_back({doc_ids[i], "", Verdict::irrelevant, "", 0.0});
                continue;
            }
            try {
                round_answers.push_back(
                    parse_cot_response(*outcomes[i].response, doc_ids[i], params));
            } catch (const ParseError& e) {
                result.warnings.push_back(std::string(e.what()) + "; treated as irrelevant");
                round_answers.push_back({doc_ids[i], "", Verdict::irrelevant, "", 0.0});
            }
        }

        result.all_answers.insert(result.all_answers.end(), round_answers.begin(),
                                  round_answers.end());
        if (auto chosen = integrate_answers(round_answers)) {
            result.final = std::move(chosen);
            return result;
        }
    }
    return result;
}

std::vector<QaPair> load_qa_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open qa file: " + path);
    std::vector<QaPair> pairs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error("malformed qa record at line " + std::to_string(line_no) + ": " + e.what());
        }
        QaPair p;
        p.query.id = j.at("query_id").get<std::string>();
        p.query.text = j.at("query_text").get<std::string>();
        if (j.contains("qtype")) p.query.qtype = query_type_from_string(j["qtype"]);
        p.gold_answer = j.at("gold_answer").get<std::string>();
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void save_qa_pairs(const std::string& path, const std::vector<QaPair>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write qa file: " + path);
    for (const auto& p : pairs) {
        nlohmann::ordered_json j;
        j["query_id"] = p.query.id;
        j["query_text"] = p.query.text;
        j["qtype"] = to_string(p.query.qtype);
        j["gold_answer"] = p.gold_answer;
        out << j.dump() << "\n";
    }
}

ExportLog export_generation_finetune(const std::vector<QaPair>& qa_pairs,
                                     const RetrieverFn& retriever, const Corpus& corpus, size_t k,
                                     const std::string& path) {
    if (k < 1) throw Error("export_generation_finetune: k must be >= 1");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write finetune export: " + path);

    ExportLog log;
    for (const auto& pair : qa_pairs) {
        RankedList ranking;
        try {
            ranking = retriever(pair.query, k);
        } catch (const std::exception& e) {
            log.skipped.push_back(pair.query.id + ": " + e.what());
            continue;
        }
        for (const auto& sd : ranking) {
            nlohmann::ordered_json j;
            j["instruction"] = cot_instruction();
            j["input"] = render_doc_question(corpus.at(sd.doc_id).text, pair.query.text);
            j["output"] = pair.gold_answer;
            out << j.dump() << "\n";
            log.records++;
        }
    }
    return log;
}

std::string answer_trace_json(const Query& q, const IntegrationResult& result) {
    nlohmann::ordered_json j;
    j["query_id"] = q.id;
    j["query_text"] = q.text;
    j["retrieval_rounds_used"] = result.retrieval_rounds_used;
    j["candidates_examined"] = result.candidates_examined;
    j["answers"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < result.all_answers.size(); ++i) {
        const CotAnswer& a = result.all_answers[i];
        nlohmann::ordered_json e;
        e["rank"] = i + 1;
        e["doc_id"] = a.doc_id;
        e["verdict"] = a.verdict == Verdict::relevant ? "relevant" : "irrelevant";
        e["mean_logprob"] = a.mean_logprob;
        e["probability"] = std::exp(a.mean_logprob);
        e["answer_text"] = a.answer_text;
        e["summary"] = a.summary;
        j["answers"].push_back(std::move(e));
    }
    j["chosen_doc_id"] = result.final ? result.final->doc_id : "";
    if (!result.warnings.empty()) j["warnings"] = result.warnings;
    return j.dump();
}

}  // namespace lirag

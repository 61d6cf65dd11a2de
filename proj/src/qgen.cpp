#include "lirag/qgen.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lirag {

namespace {

const char* kFactInstruction =
    "Please carefully review the provided document and formulate specific questions that "
    "directly relate to its content. It is important that the answers to these questions can "
    "be located within the document itself.";

const char* kSolutionInstruction =
    "Please conduct a thorough analysis of the project or technical background outlined in "
    "the document. Begin by summarizing the current situation, the specific task at hand, "
    "the proposed solution, and the eventual outcome. Additionally, formulate specific "
    "questions that effectively integrate the given scenarios and tasks.";

}  // namespace

const char* to_string(TemplateKind k) {
    return k == TemplateKind::fact ? "fact" : "solution";
}

TemplateKind template_kind_from_string(const std::string& s) {
    if (s == "fact") return TemplateKind::fact;
    if (s == "solution") return TemplateKind::solution;
    throw Error("unknown template kind: " + s);
}

std::string InstructionTemplate::render(std::string_view doc_text) const {
    std::string out = system_text;
    out += "\n\nDocument:\n";
    out += doc_text;
    out += "\n\nQuestions:\n";
    return out;
}

QueryType InstructionTemplate::query_type() const {
    // The solution template cannot distinguish short from long answers at
    // generation time; pairs start as solution_short and may be re-labelled.
    return kind == TemplateKind::fact ? QueryType::fact : QueryType::solution_short;
}

InstructionTemplate InstructionTemplate::fact() {
    return {TemplateKind::fact, kFactInstruction};
}

InstructionTemplate InstructionTemplate::solution() {
    return {TemplateKind::solution, kSolutionInstruction};
}

InstructionTemplate InstructionTemplate::by_name(const std::string& name) {
    return template_kind_from_string(name) == TemplateKind::fact ? fact() : solution();
}

GeneratedQuestions generate_questions(LlmClient& client, const Corpus& corpus,
                                      const InstructionTemplate& tmpl, size_t per_doc,
                                      size_t max_in_flight, int max_tokens, double temperature) {
    if (per_doc < 1) throw Error("generate_questions: per_doc must be >= 1");

    std::vector<LlmRequest> requests;
    requests.reserve(corpus.size());
    for (const auto& doc : corpus.docs()) {
        LlmRequest req;
        req.prompt = tmpl.render(doc.text);
        req.max_tokens = max_tokens;
        req.temperature = temperature;
        req.want_logprobs = false;
        requests.push_back(std::move(req));
    }

    std::vector<LlmOutcome> outcomes = generate_all(client, requests, max_in_flight);

    GeneratedQuestions result;
    for (size_t i = 0; i < corpus.docs().size(); ++i) {
        const Document& doc = corpus.docs()[i];
        if (!outcomes[i].response) {
            result.issues.push_back({doc.id, "client failure: " + outcomes[i].error});
            continue;
        }
        std::istringstream lines(outcomes[i].response->text);
        std::string line;
        size_t emitted = 0;
        while (emitted < per_doc && std::getline(lines, line)) {
            std::string trimmed = line;
            trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
            auto end = trimmed.find_last_not_of(" \t\r");
            trimmed = end == std::string::npos ? "" : trimmed.substr(0, end + 1);
            if (trimmed.empty()) continue;

            QDPair pair;
            pair.query.id = "g-" + std::string(to_string(tmpl.kind)) + "-" + doc.id + "-" +
                            std::to_string(emitted);
            pair.query.text = trimmed;
            pair.query.qtype = tmpl.query_type();
            pair.doc_id = doc.id;
            pair.provenance = Provenance::generated;
            result.pairs.push_back(std::move(pair));
            ++emitted;
        }
        if (emitted == 0) result.issues.push_back({doc.id, "zero yield"});
    }
    return result;
}

size_t export_qgen_finetune(const std::vector<QDPair>& pairs, const Corpus& corpus,
                            const InstructionTemplate& tmpl, const std::string& path) {
    std::vector<const QDPair*> ordered;
    ordered.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (p.provenance != Provenance::annotated)
            throw Error("export_qgen_finetune: pair " + p.query.id + " is not annotated");
        if (!corpus.contains(p.doc_id))
            throw Error("export_qgen_finetune: pair " + p.query.id + " references unknown doc " +
                        p.doc_id);
        ordered.push_back(&p);
    }
    std::sort(ordered.begin(), ordered.end(), [](const QDPair* a, const QDPair* b) {
        if (a->doc_id != b->doc_id) return a->doc_id < b->doc_id;
        return a->query.id < b->query.id;
    });

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write finetune export: " + path);
    for (const QDPair* p : ordered) {
        nlohmann::ordered_json j;
        j["instruction"] = tmpl.system_text;
        j["input"] = corpus.at(p->doc_id).text;
        j["output"] = p->query.text;
        out << j.dump() << "\n";
    }
    return ordered.size();
}

}  // namespace lirag

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "json.hpp"
#include "lirag/qgen.hpp"
#include "testutil.hpp"

using namespace lirag;

namespace {

class ScriptedClient : public LlmClient {
  public:
    explicit ScriptedClient(std::function<LlmResponse(const LlmRequest&)> fn)
        : fn_(std::move(fn)) {}
    LlmResponse generate(const LlmRequest& req) override { return fn_(req); }

  private:
    std::function<LlmResponse(const LlmRequest&)> fn_;
};

std::string doc_segment(const std::string& prompt) {
    auto b = prompt.find("Document:\n");
    auto e = prompt.find("\n\nQuestions:");
    REQUIRE(b != std::string::npos);
    REQUIRE(e != std::string::npos);
    return prompt.substr(b + 10, e - b - 10);
}

Corpus small_corpus(size_t n) {
    Corpus c;
    for (size_t i = 0; i < n; ++i) {
        std::string text;
        for (int w = 0; w < 8; ++w) text += (w ? " " : "") + ("tok" + std::to_string(i * 8 + w));
        c.add({"doc" + std::to_string(i), text, 0, {}});
    }
    return c;
}

}  // namespace

TEST_CASE("templates embed the document exactly once") {
    for (const auto& tmpl : {InstructionTemplate::fact(), InstructionTemplate::solution()}) {
        std::string doc = "unique document body xyz";
        std::string rendered = tmpl.render(doc);
        CHECK(rendered.rfind(tmpl.system_text, 0) == 0);
        size_t first = rendered.find(doc);
        REQUIRE(first != std::string::npos);
        CHECK(rendered.find(doc, first + 1) == std::string::npos);
    }
    CHECK(InstructionTemplate::fact().query_type() == QueryType::fact);
    CHECK(InstructionTemplate::by_name("solution").kind == TemplateKind::solution);
    CHECK_THROWS_AS(InstructionTemplate::by_name("bogus"), Error);
}

TEST_CASE("echo mock yields one pair per document embedding its tokens") {
    ScriptedClient client([](const LlmRequest& req) -> LlmResponse {
        std::string doc = doc_segment(req.prompt);
        TokenSeq toks = tokenize(doc);
        std::string q = "Q:";
        for (size_t i = 0; i < 5 && i < toks.size(); ++i) q += " " + toks.tokens[i];
        return {q + "?", std::nullopt};
    });

    auto corpus = small_corpus(4);
    auto result = generate_questions(client, corpus, InstructionTemplate::fact(), 1);
    CHECK(result.issues.empty());
    REQUIRE(result.pairs.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        const auto& p = result.pairs[i];
        CHECK(p.doc_id == "doc" + std::to_string(i));
        CHECK(p.provenance == Provenance::generated);
        CHECK(p.query.qtype == QueryType::fact);
        CHECK(p.query.text.find("tok" + std::to_string(i * 8)) != std::string::npos);
        CHECK(corpus.contains(p.doc_id));
    }
}

TEST_CASE("per_doc truncates extra response lines") {
    ScriptedClient client([](const LlmRequest&) -> LlmResponse {
        return {"first question\nsecond question\nthird question\n", std::nullopt};
    });
    auto corpus = small_corpus(1);
    auto result = generate_questions(client, corpus, InstructionTemplate::fact(), 2);
    REQUIRE(result.pairs.size() == 2);
    CHECK(result.pairs[0].query.text == "first question");
    CHECK(result.pairs[1].query.text == "second question");
    CHECK(result.pairs[0].query.id != result.pairs[1].query.id);
}

TEST_CASE("transport failures and empty yields are recorded while the run continues") {
    ScriptedClient client([](const LlmRequest& req) -> LlmResponse {
        std::string doc = doc_segment(req.prompt);
        if (doc.find("tok8") != std::string::npos) throw Error("connection reset");
        if (doc.find("tok16") != std::string::npos) return {"\n  \n", std::nullopt};
        return {"a question?", std::nullopt};
    });
    auto corpus = small_corpus(4);
    auto result = generate_questions(client, corpus, InstructionTemplate::fact(), 1);
    CHECK(result.pairs.size() == 2);
    REQUIRE(result.issues.size() == 2);
    CHECK(result.issues[0].doc_id == "doc1");
    CHECK(result.issues[0].reason.find("connection reset") != std::string::npos);
    CHECK(result.issues[1].doc_id == "doc2");
    CHECK(result.issues[1].reason == "zero yield");
}

TEST_CASE("template-aware generation matches a closed-form oracle on 50 docs") {
    // The mock derives each line from the document tokens; the oracle
    // recomputes the same closed form directly from the corpus.
    ScriptedClient client([](const LlmRequest& req) -> LlmResponse {
        std::string doc = doc_segment(req.prompt);
        TokenSeq toks = tokenize(doc);
        std::ostringstream out;
        for (int line = 0; line < 2; ++line)
            out << "what about " << toks.tokens[line] << "?\n";
        return {out.str(), std::nullopt};
    });

    auto corpus = small_corpus(50);
    auto result = generate_questions(client, corpus, InstructionTemplate::fact(), 2);
    REQUIRE(result.pairs.size() == 100);

    size_t i = 0;
    for (const auto& doc : corpus.docs()) {
        TokenSeq toks = corpus.tokenizer()(doc.text);
        for (int line = 0; line < 2; ++line, ++i) {
            CHECK(result.pairs[i].doc_id == doc.id);
            CHECK(result.pairs[i].query.text == "what about " + toks.tokens[line] + "?");
        }
    }
}

TEST_CASE("generation with a deterministic mock is reproducible") {
    ScriptedClient client([](const LlmRequest& req) -> LlmResponse {
        return {"q about " + std::to_string(req.prompt.size()) + "?", std::nullopt};
    });
    auto corpus = small_corpus(10);
    auto a = generate_questions(client, corpus, InstructionTemplate::solution(), 1);
    auto b = generate_questions(client, corpus, InstructionTemplate::solution(), 1);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].query.id == b.pairs[i].query.id);
        CHECK(a.pairs[i].query.text == b.pairs[i].query.text);
        CHECK(a.pairs[i].query.qtype == QueryType::solution_short);
    }
}

TEST_CASE("finetune export counts, ordering and determinism") {
    auto corpus = small_corpus(50);
    auto tmpl = InstructionTemplate::fact();

    SUBCASE("empty input") {
        testutil::TempFile f("qgen-export");
        CHECK(export_qgen_finetune({}, corpus, tmpl, f.path()) == 0);
        CHECK(testutil::read_all(f.path()).empty());
    }

    SUBCASE("fifty annotated pairs produce fifty records") {
        std::vector<QDPair> pairs;
        for (int i = 49; i >= 0; --i) {
            QDPair p;
            p.query = {"q" + std::to_string(i), "question " + std::to_string(i), QueryType::fact};
            p.doc_id = "doc" + std::to_string(i);
            p.provenance = Provenance::annotated;
            pairs.push_back(p);
        }
        testutil::TempFile f1("qgen-export1"), f2("qgen-export2");
        CHECK(export_qgen_finetune(pairs, corpus, tmpl, f1.path()) == 50);
        CHECK(export_qgen_finetune(pairs, corpus, tmpl, f2.path()) == 50);
        CHECK(testutil::read_all(f1.path()) == testutil::read_all(f2.path()));

        // Round trip recovers the triples, ordered by (doc_id, query_id).
        std::istringstream in(testutil::read_all(f1.path()));
        std::string line;
        std::vector<std::string> outputs;
        while (std::getline(in, line)) {
            auto j = nlohmann::json::parse(line);
            CHECK(j.at("instruction").get<std::string>() == tmpl.system_text);
            CHECK(j.at("input").get<std::string>().find("tok") != std::string::npos);
            outputs.push_back(j.at("output").get<std::string>());
        }
        REQUIRE(outputs.size() == 50);
        CHECK(outputs.front() == "question 0");
    }

    SUBCASE("non-annotated pairs are rejected") {
        std::vector<QDPair> pairs{
            {{"q0", "question", QueryType::fact}, "doc0", Provenance::generated}};
        testutil::TempFile f("qgen-export");
        CHECK_THROWS_AS(export_qgen_finetune(pairs, corpus, tmpl, f.path()), Error);
    }

    SUBCASE("unresolvable doc ids name the pair") {
        std::vector<QDPair> pairs{
            {{"q77", "question", QueryType::fact}, "ghost", Provenance::annotated}};
        testutil::TempFile f("qgen-export");
        CHECK_THROWS_WITH_AS(export_qgen_finetune(pairs, corpus, tmpl, f.path()),
                             doctest::Contains("q77"), Error);
    }
}

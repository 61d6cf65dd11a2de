#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "lirag/sparse_index.hpp"
#include "testutil.hpp"

using namespace lirag;

namespace {

Corpus corpus_from(const std::vector<std::pair<std::string, std::string>>& docs) {
    Corpus c;
    for (const auto& [id, text] : docs) c.add({id, text, 0, {}});
    return c;
}

// Independent exhaustive scorer: recounts term statistics from raw text and
// applies the formula to every document, never touching the inverted index.
RankedList oracle_bm25(const Corpus& corpus, const Query& query, size_t k, double k1, double b) {
    TokenSeq qtoks = tokenize(query.text);
    if (qtoks.empty()) return {};

    std::vector<std::vector<std::string>> doc_tokens;
    for (const auto& d : corpus.docs()) doc_tokens.push_back(tokenize(d.text).tokens);

    double total = 0.0;
    for (const auto& toks : doc_tokens) total += static_cast<double>(toks.size());
    double avgdl = total / static_cast<double>(corpus.size());
    double n = static_cast<double>(corpus.size());

    RankedList all;
    for (size_t di = 0; di < corpus.docs().size(); ++di) {
        const auto& toks = doc_tokens[di];
        double dl = static_cast<double>(toks.size());
        double score = 0.0;
        bool any = false;
        for (const auto& term : qtoks.tokens) {
            size_t tf = static_cast<size_t>(std::count(toks.begin(), toks.end(), term));
            if (tf == 0) continue;
            size_t df = 0;
            for (const auto& other : doc_tokens)
                if (std::count(other.begin(), other.end(), term) > 0) ++df;
            double idf =
                std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
            double tfd = static_cast<double>(tf);
            score += idf * tfd * (k1 + 1.0) / (tfd + k1 * (1.0 - b + b * dl / avgdl));
            any = true;
        }
        if (any) all.push_back({corpus.docs()[di].id, score});
    }
    std::sort(all.begin(), all.end(), ranked_before);
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace

TEST_CASE("index statistics on a toy corpus") {
    auto corpus = corpus_from({{"d1", "a b c"}, {"d2", "a b"}, {"d3", "a"}});
    auto index = build_sparse(corpus, 0.9, 0.4);
    CHECK(index.doc_count() == 3);
    CHECK(index.avg_doc_length() == doctest::Approx((3.0 + 2.0 + 1.0) / 3.0).epsilon(1e-12));
    CHECK(index.postings().at("a").size() == 3);
    CHECK(index.postings().at("c").size() == 1);
}

TEST_CASE("term frequencies are counted") {
    auto corpus = corpus_from({{"d1", "a a b"}});
    auto index = build_sparse(corpus);
    CHECK(index.postings().at("a")[0].tf == 2);
    CHECK(index.postings().at("b")[0].tf == 1);
}

TEST_CASE("index equals a naive re-scan over random docs") {
    std::mt19937_64 rng(99);
    Corpus corpus;
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) {
        std::string text = testutil::random_sentence(rng, 3 + rng() % 20);
        texts.push_back(text);
        corpus.add({"doc" + std::to_string(i), text, 0, {}});
    }
    auto index = build_sparse(corpus);

    std::unordered_map<std::string, std::unordered_map<std::string, uint32_t>> expected;
    for (int i = 0; i < 100; ++i)
        for (const auto& t : tokenize(texts[i]).tokens) expected[t]["doc" + std::to_string(i)]++;

    REQUIRE(index.postings().size() == expected.size());
    for (const auto& [term, list] : index.postings()) {
        REQUIRE(expected.count(term));
        REQUIRE(list.size() == expected[term].size());
        for (const auto& p : list) CHECK(expected[term].at(p.doc_id) == p.tf);
        CHECK(std::is_sorted(list.begin(), list.end(), [](const Posting& a, const Posting& b) {
            return a.doc_id < b.doc_id;
        }));
    }

    for (const auto& [_, list] : index.postings())
        for (const auto& p : list) CHECK(index.doc_lengths().count(p.doc_id));
    double mean = 0.0;
    for (const auto& [_, len] : index.doc_lengths()) mean += static_cast<double>(len);
    mean /= static_cast<double>(index.doc_lengths().size());
    CHECK(std::abs(mean - index.avg_doc_length()) < 1e-9);
}

TEST_CASE("build rejects bad input") {
    Corpus empty;
    CHECK_THROWS_AS(build_sparse(empty), Error);
    auto corpus = corpus_from({{"d1", "a"}});
    CHECK_THROWS_AS(build_sparse(corpus, 0.0, 0.4), Error);
    CHECK_THROWS_AS(build_sparse(corpus, 0.9, 1.5), Error);
}

TEST_CASE("zero-match and dominance cases") {
    auto corpus = corpus_from({{"d1", "cats sleep"}, {"d2", "dogs bark"}, {"d3", "dogs run"}});
    auto index = build_sparse(corpus);

    CHECK(bm25_topk(index, {"q", "unicorns", QueryType::unknown}, 5).empty());
    CHECK(bm25_topk(index, {"q", "...", QueryType::unknown}, 5).empty());

    auto top = bm25_topk(index, {"q", "cats", QueryType::unknown}, 5);
    REQUIRE(top.size() == 1);
    CHECK(top[0].doc_id == "d1");
    CHECK(top[0].score > 0.0);
}

TEST_CASE("ties break by ascending doc_id") {
    auto corpus = corpus_from({{"z", "same text"}, {"a", "same text"}, {"m", "same text"}});
    auto index = build_sparse(corpus);
    auto top = bm25_topk(index, {"q", "same", QueryType::unknown}, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].doc_id == "a");
    CHECK(top[1].doc_id == "m");
    CHECK(top[2].doc_id == "z");
    CHECK(top[0].score == top[2].score);
}

TEST_CASE("top-k matches the exhaustive oracle on random corpora") {
    std::mt19937_64 rng(2024);
    Corpus corpus;
    for (int i = 0; i < 20; ++i) {
        // Small shared vocabulary so queries hit several documents.
        std::string text;
        size_t len = 4 + rng() % 12;
        for (size_t w = 0; w < len; ++w) {
            if (w) text.push_back(' ');
            text += "w" + std::to_string(rng() % 30);
        }
        corpus.add({"doc" + std::to_string(i), text, 0, {}});
    }
    auto index = build_sparse(corpus);

    for (int qi = 0; qi < 10; ++qi) {
        std::string qtext;
        size_t len = 1 + rng() % 4;
        for (size_t w = 0; w < len; ++w) {
            if (w) qtext.push_back(' ');
            qtext += "w" + std::to_string(rng() % 30);
        }
        Query q{"q" + std::to_string(qi), qtext, QueryType::unknown};

        for (size_t k : {3ul, 20ul}) {
            auto got = bm25_topk(index, q, k);
            auto want = oracle_bm25(corpus, q, k, 0.9, 0.4);
            REQUIRE(got.size() == want.size());
            for (size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].doc_id == want[i].doc_id);
                CHECK(std::abs(got[i].score - want[i].score) < 1e-9);
                CHECK(got[i].score >= 0.0);
            }
        }
    }
}

TEST_CASE("adding a document without query terms keeps identical-statistics order") {
    auto corpus = corpus_from({{"d1", "apple banana"}, {"d2", "apple banana"}});
    auto index = build_sparse(corpus);
    auto before = bm25_topk(index, {"q", "apple", QueryType::unknown}, 10);

    auto grown = corpus_from(
        {{"d1", "apple banana"}, {"d2", "apple banana"}, {"d3", "cherry date elderberry"}});
    auto index2 = build_sparse(grown);
    auto after = bm25_topk(index2, {"q", "apple", QueryType::unknown}, 10);

    REQUIRE(before.size() == 2);
    REQUIRE(after.size() == 2);
    CHECK(before[0].doc_id == after[0].doc_id);
    CHECK(before[1].doc_id == after[1].doc_id);
}

TEST_CASE("index persistence round trips scoring") {
    std::mt19937_64 rng(5);
    Corpus corpus;
    for (int i = 0; i < 15; ++i)
        corpus.add({"d" + std::to_string(i), testutil::random_sentence(rng, 6), 0, {}});
    auto index = build_sparse(corpus, 1.2, 0.75);

    testutil::TempFile f("sparse-index");
    index.save(f.path());
    auto loaded = InvertedIndex::load(f.path());
    CHECK(loaded.doc_count() == index.doc_count());
    CHECK(loaded.params().k1 == index.params().k1);

    Query q{"q", corpus.docs()[3].text, QueryType::unknown};
    auto a = bm25_topk(index, q, 10);
    auto b = bm25_topk(loaded, q, 10);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc_id == b[i].doc_id);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("trec run files round trip") {
    std::map<std::string, RankedList> runs;
    runs["q1"] = {{"d2", 1.5}, {"d1", 0.25}};
    runs["q2"] = {{"d9", 3.0}};
    testutil::TempFile f("run");
    write_trec_run(f.path(), runs, "tag1");

    auto text = testutil::read_all(f.path());
    CHECK(text.find("q1 Q0 d2 1 1.5 tag1\n") != std::string::npos);
    CHECK(text.find("q1 Q0 d1 2 0.25 tag1\n") != std::string::npos);

    auto loaded = load_trec_run(f.path());
    REQUIRE(loaded.at("q1").size() == 2);
    CHECK(loaded.at("q1")[0].doc_id == "d2");
    CHECK(loaded.at("q2")[0].score == 3.0);
}

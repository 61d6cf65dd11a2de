#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lirag/dense_index.hpp"
#include "testutil.hpp"

using namespace lirag;

namespace {

TokenEmbeddings make_emb(const std::string& id, size_t dim,
                         const std::vector<std::vector<double>>& rows) {
    TokenEmbeddings e;
    e.owner_id = id;
    e.dim = dim;
    for (const auto& r : rows) e.data.insert(e.data.end(), r.begin(), r.end());
    e.finalize();
    return e;
}

TokenEmbeddings random_emb(std::mt19937_64& rng, const std::string& id, size_t n, size_t dim) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    TokenEmbeddings e;
    e.owner_id = id;
    e.dim = dim;
    e.data.resize(n * dim);
    for (auto& v : e.data) v = unif(rng);
    e.finalize();
    return e;
}

// Nested-loop reference: plain cosines, no caching, no shared helpers.
double oracle_maxsim(const TokenEmbeddings& q, const TokenEmbeddings& d) {
    double total = 0.0;
    for (size_t m = 0; m < q.num_tokens(); ++m) {
        double best = -2.0;
        for (size_t n = 0; n < d.num_tokens(); ++n) {
            double dot = 0.0, qq = 0.0, dd = 0.0;
            for (size_t i = 0; i < q.dim; ++i) {
                dot += q.row(m)[i] * d.row(n)[i];
                qq += q.row(m)[i] * q.row(m)[i];
                dd += d.row(n)[i] * d.row(n)[i];
            }
            double c = (qq == 0.0 || dd == 0.0) ? 0.0 : dot / (std::sqrt(qq) * std::sqrt(dd));
            best = std::max(best, c);
        }
        total += best;
    }
    return total;
}

}  // namespace

TEST_CASE("identical unit token scores one") {
    auto q = make_emb("q", 3, {{1.0, 0.0, 0.0}});
    auto d = make_emb("d", 3, {{1.0, 0.0, 0.0}});
    CHECK(maxsim_score(q, d) == 1.0);
}

TEST_CASE("orthonormal query tokens against a single doc token") {
    auto q = make_emb("q", 2, {{1.0, 0.0}, {0.0, 1.0}});
    auto d = make_emb("d", 2, {{1.0, 0.0}});
    CHECK(maxsim_score(q, d) == 1.0);
}

TEST_CASE("dimension mismatch and empty inputs throw") {
    auto q = make_emb("q", 2, {{1.0, 0.0}});
    auto d = make_emb("d", 3, {{1.0, 0.0, 0.0}});
    CHECK_THROWS_AS(maxsim_score(q, d), Error);
    TokenEmbeddings empty;
    empty.dim = 2;
    CHECK_THROWS_AS(maxsim_score(q, empty), Error);
}

TEST_CASE("zero-norm vectors contribute cosine zero") {
    auto q = make_emb("q", 2, {{0.0, 0.0}});
    auto d = make_emb("d", 2, {{1.0, 0.0}});
    CHECK(maxsim_score(q, d) == 0.0);
}

TEST_CASE("matches the nested-loop oracle on random pairs") {
    std::mt19937_64 rng(777);
    for (int i = 0; i < 1000; ++i) {
        size_t dim = 1 + rng() % 16;
        auto q = random_emb(rng, "q", 1 + rng() % 8, dim);
        auto d = random_emb(rng, "d", 1 + rng() % 8, dim);
        double got = maxsim_score(q, d);
        double want = oracle_maxsim(q, d);
        REQUIRE(std::abs(got - want) < 1e-6);
        REQUIRE(got <= static_cast<double>(q.num_tokens()) + 1e-12);
        REQUIRE(got >= -static_cast<double>(q.num_tokens()) - 1e-12);
    }
}

TEST_CASE("scaling document vectors by a positive scalar preserves scores") {
    std::mt19937_64 rng(31);
    auto q = random_emb(rng, "q", 4, 8);
    auto d = random_emb(rng, "d", 6, 8);
    double base = maxsim_score(q, d);

    auto scaled = d;
    for (auto& v : scaled.data) v *= 2.0;  // power of two: exact in floating point
    scaled.finalize();
    CHECK(maxsim_score(q, scaled) == base);

    auto scaled3 = d;
    for (auto& v : scaled3.data) v *= 3.0;
    scaled3.finalize();
    CHECK(std::abs(maxsim_score(q, scaled3) - base) < 1e-12);
}

TEST_CASE("appending a duplicate doc token leaves the score unchanged") {
    std::mt19937_64 rng(32);
    auto q = random_emb(rng, "q", 3, 4);
    auto d = random_emb(rng, "d", 5, 4);
    double base = maxsim_score(q, d);

    auto grown = d;
    for (size_t i = 0; i < d.dim; ++i) grown.data.push_back(d.row(2)[i]);
    grown.finalize();
    CHECK(maxsim_score(q, grown) == base);
}

TEST_CASE("self score with unit rows equals the token count exactly") {
    std::mt19937_64 rng(33);
    auto q = random_emb(rng, "q", 7, 5);
    for (size_t m = 0; m < q.num_tokens(); ++m) {
        double norm = std::sqrt(q.row_sqnorm[m]);
        for (size_t i = 0; i < q.dim; ++i) q.data[m * q.dim + i] /= norm;
    }
    q.finalize();
    CHECK(maxsim_score(q, q) == 7.0);
}

TEST_CASE("dense_topk basics") {
    std::mt19937_64 rng(41);
    DenseIndex index(4, "enc-test");
    index.add(random_emb(rng, "only", 5, 4));
    auto q = random_emb(rng, "q", 2, 4);

    auto top = dense_topk(index, q, 3);
    REQUIRE(top.size() == 1);
    CHECK(top[0].doc_id == "only");

    DenseIndex empty;
    CHECK(dense_topk(empty, q, 3).empty());
}

TEST_CASE("candidate restriction returns exactly the candidates") {
    std::mt19937_64 rng(42);
    DenseIndex index(4, "enc-test");
    for (int i = 0; i < 10; ++i) index.add(random_emb(rng, "d" + std::to_string(i), 4, 4));
    auto q = random_emb(rng, "q", 2, 4);

    auto top = dense_topk(index, q, 10, std::set<std::string>{"d3"});
    REQUIRE(top.size() == 1);
    CHECK(top[0].doc_id == "d3");

    CHECK_THROWS_AS(dense_topk(index, q, 10, std::set<std::string>{"nope"}), Error);
}

TEST_CASE("dense_topk matches scoring every doc and sorting") {
    std::mt19937_64 rng(43);
    DenseIndex index(6, "enc-test");
    std::vector<TokenEmbeddings> docs;
    for (int i = 0; i < 200; ++i) {
        auto e = random_emb(rng, "d" + std::to_string(i), 2 + rng() % 6, 6);
        docs.push_back(e);
        index.add(e);
    }
    for (int qi = 0; qi < 20; ++qi) {
        auto q = random_emb(rng, "q", 1 + rng() % 5, 6);
        auto got = dense_topk(index, q, 17);

        RankedList want;
        for (const auto& d : docs) want.push_back({d.owner_id, oracle_maxsim(q, d)});
        std::sort(want.begin(), want.end(), ranked_before);
        want.resize(17);

        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].doc_id == want[i].doc_id);
            CHECK(std::abs(got[i].score - want[i].score) < 1e-6);
        }
    }
}

TEST_CASE("parallel scoring changes nothing") {
    std::mt19937_64 rng(44);
    DenseIndex index(5, "enc-test");
    for (int i = 0; i < 150; ++i) index.add(random_emb(rng, "d" + std::to_string(i), 3, 5));
    auto q = random_emb(rng, "q", 4, 5);

    auto sequential = dense_topk(index, q, 150, std::nullopt, 1);
    auto parallel = dense_topk(index, q, 150, std::nullopt, 4);
    REQUIRE(sequential.size() == parallel.size());
    for (size_t i = 0; i < sequential.size(); ++i) {
        CHECK(sequential[i].doc_id == parallel[i].doc_id);
        CHECK(sequential[i].score == parallel[i].score);
    }
}

TEST_CASE("dense_rank_of agrees with the sorted full list") {
    std::mt19937_64 rng(45);
    DenseIndex index(4, "enc-test");
    for (int i = 0; i < 50; ++i) index.add(random_emb(rng, "d" + std::to_string(i), 3, 4));
    auto q = random_emb(rng, "q", 3, 4);

    auto full = dense_topk(index, q, 50);
    for (size_t i = 0; i < full.size(); ++i)
        CHECK(dense_rank_of(index, q, full[i].doc_id) == i + 1);
}

TEST_CASE("binary persistence round trips") {
    std::mt19937_64 rng(46);
    DenseIndex index(8, "enc-v3-seed1-dim8");
    for (int i = 0; i < 12; ++i) index.add(random_emb(rng, "d" + std::to_string(i), 2 + i % 4, 8));

    testutil::TempFile f1("dense-index"), f2("dense-index2");
    index.save(f1.path());
    auto loaded = DenseIndex::load(f1.path());
    CHECK(loaded.dim() == 8);
    CHECK(loaded.size() == 12);
    CHECK(loaded.encoder_version() == "enc-v3-seed1-dim8");

    // A second save of the loaded index is byte-identical (f32 fixpoint).
    loaded.save(f2.path());
    CHECK(testutil::read_all(f1.path()) == testutil::read_all(f2.path()));

    auto q = random_emb(rng, "q", 3, 8);
    auto a = dense_topk(index, q, 12);
    auto b = dense_topk(loaded, q, 12);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc_id == b[i].doc_id);
        CHECK(std::abs(a[i].score - b[i].score) < 1e-6);  // f32 storage
    }
}

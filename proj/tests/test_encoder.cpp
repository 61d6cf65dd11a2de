#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "lirag/encoder.hpp"
#include "testutil.hpp"

using namespace lirag;

namespace {

Corpus corpus_from(const std::vector<std::pair<std::string, std::string>>& docs) {
    Corpus c;
    for (const auto& [id, text] : docs) c.add({id, text, 0, {}});
    return c;
}

// Extended-precision reference for the contrastive loss.
long double reference_infonce(long double s_pos, const std::vector<double>& s_negs) {
    long double denom = expl(s_pos);
    for (double s : s_negs) denom += expl((long double)s);
    return -logl(expl(s_pos) / denom);
}

struct FdProblem {
    Corpus corpus;
    TrainableEncoder encoder;
    TrainBatch batch;
};

// Random vocabulary, random docs, random batch; every token appears in vocab.
FdProblem make_fd_problem(uint64_t seed, size_t dim, size_t n_docs, size_t k_neg) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> words;
    for (int i = 0; i < 14; ++i) words.push_back("w" + std::to_string(i));

    auto sentence = [&](size_t n) {
        std::string s;
        for (size_t i = 0; i < n; ++i) {
            if (i) s.push_back(' ');
            s += words[rng() % words.size()];
        }
        return s;
    };

    Corpus corpus;
    for (size_t i = 0; i < n_docs; ++i)
        corpus.add({"d" + std::to_string(i), sentence(3 + rng() % 4), 0, {}});

    TrainableEncoder encoder = TrainableEncoder::from_corpus(corpus, dim, seed * 31 + 7);

    TrainBatch batch;
    batch.query = {"q", sentence(2 + rng() % 3), QueryType::unknown};
    batch.positive = "d0";
    for (size_t i = 1; i <= k_neg; ++i) batch.negatives.push_back("d" + std::to_string(i));
    return {std::move(corpus), std::move(encoder), std::move(batch)};
}

// Central finite differences over every parameter entry.
void check_gradients(FdProblem& p, double h, double rel_tol, double abs_floor) {
    ParameterGradients grads = p.encoder.infonce_grad(p.batch, p.corpus);

    auto fd_check = [&](std::vector<double>& params, size_t idx, double analytic) {
        double saved = params[idx];
        params[idx] = saved + h;
        double up = p.encoder.batch_loss(p.batch, p.corpus);
        params[idx] = saved - h;
        double down = p.encoder.batch_loss(p.batch, p.corpus);
        params[idx] = saved;
        double numeric = (up - down) / (2.0 * h);
        double err = std::abs(numeric - analytic);
        double scale = std::max(std::abs(numeric), std::abs(analytic));
        if (err > abs_floor) {
            CHECK(err <= rel_tol * std::max(scale, 1e-12));
        }
    };

    size_t dim = p.encoder.dim();
    for (size_t row = 0; row < p.encoder.vocab_size(); ++row) {
        auto it = grads.embedding_rows.find(row);
        for (size_t i = 0; i < dim; ++i) {
            double analytic = it == grads.embedding_rows.end() ? 0.0 : it->second[i];
            fd_check(p.encoder.embedding_table(), row * dim + i, analytic);
        }
    }
    for (size_t i = 0; i < dim * dim; ++i)
        fd_check(p.encoder.projection(), i, grads.projection[i]);
}

}  // namespace

TEST_CASE("encode is deterministic and per-token") {
    auto corpus = corpus_from({{"d0", "alpha beta gamma"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 6, 11);

    auto a = enc.encode("alpha beta", "x");
    auto b = enc.encode("alpha beta", "x");
    CHECK(a.data == b.data);
    CHECK(a.num_tokens() == 2);
    CHECK(a.dim == 6);

    auto swapped = enc.encode("beta alpha", "x");
    for (size_t i = 0; i < 6; ++i) {
        CHECK(a.row(0)[i] == swapped.row(1)[i]);
        CHECK(a.row(1)[i] == swapped.row(0)[i]);
    }
}

TEST_CASE("shape contract and truncation") {
    auto corpus = corpus_from({{"d0", "a b c d e f"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 4, 3);
    CHECK(enc.encode("a b c d e f", "x").num_tokens() == 6);
    CHECK(enc.encode("a b c d e f", "x", 4).num_tokens() == 4);
    CHECK_THROWS_AS(enc.encode("", "x"), Error);
    CHECK_THROWS_AS(enc.encode("?!", "x"), Error);
}

TEST_CASE("out-of-vocab tokens share the UNK row") {
    auto corpus = corpus_from({{"d0", "alpha beta"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 4, 13);
    auto a = enc.encode("qqq", "x");
    auto b = enc.encode("zzz", "x");
    CHECK(a.data == b.data);
}

TEST_CASE("encoded rows are never zero") {
    auto corpus = corpus_from({{"d0", "alpha beta gamma delta"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 8, 17);
    auto e = enc.encode("alpha beta gamma delta zz", "x");
    for (size_t m = 0; m < e.num_tokens(); ++m) CHECK(e.row_sqnorm[m] > 0.0);
}

TEST_CASE("infonce identities") {
    CHECK(infonce_loss(1.7, {}) == 0.0);
    CHECK(infonce_loss(0.3, {0.3}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::abs(infonce_loss(5.0, {5.0}) - std::log(2.0)) < 1e-12);
    CHECK_THROWS_AS(infonce_loss(std::nan(""), {}), Error);
    CHECK_THROWS_AS(infonce_loss(0.0, {std::numeric_limits<double>::infinity()}), Error);
}

TEST_CASE("infonce matches an extended-precision reference") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-30.0, 30.0);
    for (int i = 0; i < 500; ++i) {
        double s_pos = unif(rng);
        std::vector<double> s_negs(rng() % 6);
        for (auto& s : s_negs) s = unif(rng);
        double got = infonce_loss(s_pos, s_negs);
        long double want = reference_infonce(s_pos, s_negs);
        CHECK(std::abs(got - static_cast<double>(want)) < 1e-9);
        CHECK(got >= 0.0);
    }
}

TEST_CASE("infonce is invariant to score shifts") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        double s_pos = unif(rng);
        std::vector<double> s_negs(1 + rng() % 5);
        for (auto& s : s_negs) s = unif(rng);
        double base = infonce_loss(s_pos, s_negs);
        for (double c : {100.0, -250.0, 1e6}) {
            std::vector<double> shifted = s_negs;
            for (auto& s : shifted) s += c;
            CHECK(std::abs(infonce_loss(s_pos + c, shifted) - base) < 1e-9);
        }
    }
}

TEST_CASE("softmax coefficient at the uniform point") {
    // d/ds_pos of the loss with k equal-score negatives is -k/(k+1).
    for (size_t k : {1ul, 3ul, 7ul}) {
        double s = 0.42;
        std::vector<double> negs(k, s);
        double h = 1e-6;
        double up = infonce_loss(s + h, negs);
        double down = infonce_loss(s - h, negs);
        double slope = (up - down) / (2.0 * h);
        double want = -static_cast<double>(k) / static_cast<double>(k + 1);
        CHECK(std::abs(slope - want) < 1e-6);
    }
}

TEST_CASE("identical positive and negatives zero the gradient") {
    auto corpus = corpus_from({{"d0", "alpha beta"}, {"d1", "alpha beta"}, {"d2", "alpha beta"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 4, 23);
    TrainBatch batch{{"q", "alpha", QueryType::unknown}, "d0", {"d1", "d2"}, false};

    ParameterGradients grads = enc.infonce_grad(batch, corpus);
    CHECK(grads.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    for (const auto& [row, g] : grads.embedding_rows)
        for (double v : g) CHECK(std::abs(v) < 1e-12);
    for (double v : grads.projection) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        auto p = make_fd_problem(seed, 5, 5, 3);
        check_gradients(p, 1e-4, 1e-4, 1e-7);
    }
}

TEST_CASE("train_step lowers the loss on a fixed batch") {
    auto p = make_fd_problem(42, 6, 6, 4);
    double prev = p.encoder.batch_loss(p.batch, p.corpus);
    for (int step = 0; step < 50; ++step) {
        p.encoder.train_step(p.batch, p.corpus, 1e-3);
        double now = p.encoder.batch_loss(p.batch, p.corpus);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("a vanishing learning rate leaves parameters in place") {
    auto p = make_fd_problem(43, 4, 5, 3);
    auto emb_before = p.encoder.embedding_table();
    auto proj_before = p.encoder.projection();
    uint64_t version_before = p.encoder.version();
    double loss_before = p.encoder.batch_loss(p.batch, p.corpus);

    p.encoder.train_step(p.batch, p.corpus, 1e-300);
    CHECK(p.encoder.embedding_table() == emb_before);
    CHECK(p.encoder.projection() == proj_before);
    CHECK(p.encoder.version() == version_before + 1);
    double loss_after = p.encoder.batch_loss(p.batch, p.corpus);
    CHECK(loss_after - loss_before <= 0.0);
    CHECK(std::abs(loss_after - loss_before) < 1e-6);
}

TEST_CASE("non-finite updates are rejected without mutation") {
    auto p = make_fd_problem(44, 4, 5, 3);
    auto emb_before = p.encoder.embedding_table();
    auto proj_before = p.encoder.projection();
    uint64_t version_before = p.encoder.version();

    CHECK_THROWS_AS(
        p.encoder.train_step(p.batch, p.corpus, std::numeric_limits<double>::infinity()), Error);

    CHECK(std::memcmp(p.encoder.embedding_table().data(), emb_before.data(),
                      emb_before.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(p.encoder.projection().data(), proj_before.data(),
                      proj_before.size() * sizeof(double)) == 0);
    CHECK(p.encoder.version() == version_before);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    auto run = [](uint64_t seed) {
        auto p = make_fd_problem(seed, 5, 6, 3);
        for (int i = 0; i < 20; ++i) p.encoder.train_step(p.batch, p.corpus, 0.01);
        return p;
    };
    auto a = run(7);
    auto b = run(7);
    CHECK(a.encoder.embedding_table() == b.encoder.embedding_table());
    CHECK(a.encoder.projection() == b.encoder.projection());
    CHECK(a.encoder.version() == b.encoder.version());
}

TEST_CASE("batch invariants are enforced") {
    auto corpus = corpus_from({{"d0", "a"}, {"d1", "b"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 4, 3);
    TrainBatch dup{{"q", "a", QueryType::unknown}, "d0", {"d1", "d1"}, false};
    CHECK_THROWS_AS(enc.batch_loss(dup, corpus), Error);
    TrainBatch pos_in_negs{{"q", "a", QueryType::unknown}, "d0", {"d0"}, false};
    CHECK_THROWS_AS(enc.infonce_grad(pos_in_negs, corpus), Error);
}

TEST_CASE("mine_negatives samples from the BM25 pool") {
    Corpus corpus;
    corpus.add({"pos", "needle stack", 0, {}});
    corpus.add({"n1", "stack one", 0, {}});
    corpus.add({"n2", "stack two", 0, {}});
    corpus.add({"n3", "stack three", 0, {}});
    corpus.add({"other", "unrelated text", 0, {}});
    auto index = build_sparse(corpus);

    QDPair pair{{"q1", "needle stack", QueryType::unknown}, "pos", Provenance::generated};

    SUBCASE("exhausted pool is an error") {
        QDPair only{{"q2", "needle", QueryType::unknown}, "pos", Provenance::generated};
        CHECK_THROWS_AS(mine_negatives(index, only, 2, 1000, 1), Error);
    }

    SUBCASE("all available candidates are returned when the pool is small") {
        auto batch = mine_negatives(index, pair, 3, 1000, 1);
        CHECK(batch.negatives.size() == 3);
        CHECK_FALSE(batch.short_pool);
        std::set<std::string> got(batch.negatives.begin(), batch.negatives.end());
        CHECK(got == std::set<std::string>{"n1", "n2", "n3"});

        auto short_batch = mine_negatives(index, pair, 5, 1000, 1);
        CHECK(short_batch.negatives.size() == 3);
        CHECK(short_batch.short_pool);
    }

    SUBCASE("fixed seeds reproduce batches") {
        auto a = mine_negatives(index, pair, 2, 1000, 99);
        auto b = mine_negatives(index, pair, 2, 1000, 99);
        CHECK(a.negatives == b.negatives);
        CHECK(a.positive == b.positive);
    }
}

TEST_CASE("checkpoints round trip through f32 storage") {
    auto corpus = corpus_from({{"d0", "alpha beta gamma"}, {"d1", "delta epsilon"}});
    auto enc = TrainableEncoder::from_corpus(corpus, 6, 55);
    TrainBatch batch{{"q", "alpha delta", QueryType::unknown}, "d0", {"d1"}, false};
    for (int i = 0; i < 3; ++i) enc.train_step(batch, corpus, 0.01);

    testutil::TempFile f("encoder-ckpt");
    enc.save(f.path());
    auto loaded = TrainableEncoder::load(f.path());
    CHECK(loaded.dim() == enc.dim());
    CHECK(loaded.vocab_size() == enc.vocab_size());
    CHECK(loaded.version() == enc.version());
    CHECK(loaded.seed() == enc.seed());
    CHECK(loaded.version_string() == enc.version_string());

    for (size_t i = 0; i < enc.embedding_table().size(); ++i)
        CHECK(std::abs(loaded.embedding_table()[i] - enc.embedding_table()[i]) < 1e-6);

    auto a = enc.encode("alpha zz", "x");
    auto b = loaded.encode("alpha zz", "x");
    REQUIRE(a.data.size() == b.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-5);
}

TEST_CASE("build_dense_index encodes every document identically across thread counts") {
    std::mt19937_64 rng(66);
    Corpus corpus;
    for (int i = 0; i < 80; ++i)
        corpus.add({"d" + std::to_string(i), testutil::random_sentence(rng, 5), 0, {}});
    auto enc = TrainableEncoder::from_corpus(corpus, 5, 8);

    auto a = build_dense_index(corpus, enc, 0, 1);
    auto b = build_dense_index(corpus, enc, 0, 3);
    REQUIRE(a.size() == corpus.size());
    REQUIRE(b.size() == corpus.size());
    for (const auto& [id, e] : a.entries()) CHECK(b.entries().at(id).data == e.data);
    CHECK(a.encoder_version() == enc.version_string());
}

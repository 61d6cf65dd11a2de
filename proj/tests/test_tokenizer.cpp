#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "lirag/tokenizer.hpp"
#include "testutil.hpp"

using namespace lirag;

TEST_CASE("default tokenizer splits on punctuation and lowercases") {
    auto seq = tokenize("Real-Time Strategy");
    REQUIRE(seq.tokens == std::vector<std::string>{"real", "time", "strategy"});
}

TEST_CASE("empty text yields empty sequence") {
    CHECK(tokenize("").tokens.empty());
    CHECK(tokenize(" \t\n").tokens.empty());
    CHECK(tokenize("...!!,").tokens.empty());
}

TEST_CASE("alphanumeric runs stay together") {
    CHECK(tokenize("ask42 key42x").tokens == std::vector<std::string>{"ask42", "key42x"});
    CHECK(tokenize("a1-b2_c3").tokens == std::vector<std::string>{"a1", "b2", "c3"});
}

TEST_CASE("multi-byte code points pass through, unicode punctuation separates") {
    auto seq = tokenize("café—menu");  // cafe-acute, em dash, menu
    REQUIRE(seq.tokens.size() == 2);
    CHECK(seq.tokens[0] == "café");
    CHECK(seq.tokens[1] == "menu");
}

TEST_CASE("tokenization is deterministic over fuzzed input") {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 1000; ++i) {
        std::string text;
        size_t len = rng() % 64;
        for (size_t j = 0; j < len; ++j) text.push_back(static_cast<char>(rng() % 256));
        auto a = tokenize(text);
        auto b = tokenize(text);
        REQUIRE(a.tokens == b.tokens);
    }
}

TEST_CASE("whitespace tokenizer keeps punctuation") {
    CHECK(tokenize_whitespace("Real-Time  Strategy").tokens ==
          std::vector<std::string>{"real-time", "strategy"});
}

TEST_CASE("tokenizer registry") {
    CHECK(tokenizer_by_name("default")("A b").tokens == std::vector<std::string>{"a", "b"});
    CHECK(tokenizer_by_name("whitespace")("A b").tokens == std::vector<std::string>{"a", "b"});
    CHECK_THROWS_AS(tokenizer_by_name("nope"), Error);
}

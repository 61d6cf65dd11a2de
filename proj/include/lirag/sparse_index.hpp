#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "lirag/common.hpp"
#include "lirag/corpus.hpp"

namespace lirag {

struct Posting {
    std::string doc_id;
    uint32_t tf = 0;
};

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

/// Okapi BM25 inverted index. Immutable after build; scoring is thread-safe.
///
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), strictly positive, so scores
/// are non-negative. Each query token occurrence contributes
/// idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)).
class InvertedIndex {
  public:
    const std::unordered_map<std::string, std::vector<Posting>>& postings() const {
        return postings_;
    }
    const std::unordered_map<std::string, size_t>& doc_lengths() const { return doc_lengths_; }
    double avg_doc_length() const { return avg_doc_length_; }
    size_t doc_count() const { return doc_count_; }
    Bm25Params params() const { return params_; }
    const std::string& tokenizer_name() const { return tokenizer_name_; }
    const TokenizerFn& tokenizer() const { return tokenizer_; }

    double idf(const std::string& term) const;

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

  private:
    friend InvertedIndex build_sparse(const Corpus&, double, double);

    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, size_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    size_t doc_count_ = 0;
    Bm25Params params_;
    std::string tokenizer_name_ = "default";
    TokenizerFn tokenizer_;
};

/// Builds the index from a non-empty corpus. Posting lists end up sorted by
/// doc_id; avg_doc_length is the mean token count.
InvertedIndex build_sparse(const Corpus& corpus, double k1 = 0.9, double b = 0.4);

/// Top-k by BM25, score descending with ascending doc_id tie-break. A query
/// that tokenizes to nothing yields an empty list.
RankedList bm25_topk(const InvertedIndex& index, const Query& query, size_t k);

/// TREC-style run file: `query_id Q0 doc_id rank score run_tag` per line.
void write_trec_run(const std::string& path, const std::map<std::string, RankedList>& runs,
                    const std::string& run_tag);
std::map<std::string, RankedList> load_trec_run(const std::string& path);

}  // namespace lirag

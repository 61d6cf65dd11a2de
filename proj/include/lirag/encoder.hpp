#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lirag/corpus.hpp"
#include "lirag/dense_index.hpp"
#include "lirag/sparse_index.hpp"

namespace lirag {

/// One positive and a set of distinct mined negatives for a query.
struct TrainBatch {
    Query query;
    std::string positive;
    std::vector<std::string> negatives;
    bool short_pool = false;  // fewer candidates than requested
};

/// Sparse embedding-row gradients plus a dense projection gradient.
struct ParameterGradients {
    double loss = 0.0;
    std::map<size_t, std::vector<double>> embedding_rows;
    std::vector<double> projection;
};

/// -log( exp(s_pos) / (exp(s_pos) + sum_l exp(s_neg_l)) ), computed via
/// log-sum-exp. Empty negatives give exactly 0. Throws on non-finite input.
double infonce_loss(double s_pos, const std::vector<double>& s_negs);

/// Two-layer linear token encoder: a learned embedding row per vocab token
/// (row 0 is the UNK fallback) followed by a square projection. Rows are
/// encoded independently, so token order only permutes output rows.
///
/// Training is single-threaded and deterministic; encoding against a frozen
/// snapshot is safe from multiple threads.
class TrainableEncoder {
  public:
    /// Vocab rows are assigned in sorted token order after the UNK row.
    TrainableEncoder(std::vector<std::string> vocab, size_t dim, uint64_t seed,
                     std::string tokenizer_name = "default");
    static TrainableEncoder from_corpus(const Corpus& corpus, size_t dim, uint64_t seed);

    /// One row per token, row = projection * embedding[token]. Throws when the
    /// text tokenizes to nothing. max_tokens > 0 truncates the token sequence.
    TokenEmbeddings encode(std::string_view text, const std::string& owner_id = "",
                           size_t max_tokens = 0) const;

    size_t dim() const { return dim_; }
    size_t vocab_size() const { return vocab_tokens_.size(); }
    uint64_t version() const { return version_; }
    uint64_t seed() const { return seed_; }
    const std::string& tokenizer_name() const { return tokenizer_name_; }
    std::string version_string() const;

    size_t token_row(const std::string& token) const;
    const std::vector<std::string>& vocab_tokens() const { return vocab_tokens_; }

    /// Loss of the composed objective on one batch; shares the scoring path
    /// with retrieval (encode + maxsim).
    double batch_loss(const TrainBatch& batch, const Corpus& corpus, size_t max_tokens = 0) const;

    /// Analytic gradients of batch_loss w.r.t. the embedding table and the
    /// projection. Ties inside the per-token max route the gradient to the
    /// lowest document-token index.
    ParameterGradients infonce_grad(const TrainBatch& batch, const Corpus& corpus,
                                    size_t max_tokens = 0) const;

    /// One Adam step (lazy on untouched embedding rows). Returns the pre-step
    /// loss. A step that would produce non-finite parameters is rejected: the
    /// encoder is left bit-identical and an Error is thrown. The version
    /// counter increments exactly once per committed step.
    ///
    /// proj_lr < 0 means "same as lr". The projection participates in every
    /// step while an embedding row is touched only when its token occurs, so
    /// a smaller projection rate keeps the two tables moving at a comparable
    /// pace over a training run.
    double train_step(const TrainBatch& batch, const Corpus& corpus, double lr,
                      size_t max_tokens = 0, double proj_lr = -1.0);

    void save(const std::string& path) const;
    static TrainableEncoder load(const std::string& path);

    // Raw parameter access, used by the finite-difference tests.
    std::vector<double>& embedding_table() { return embedding_; }
    const std::vector<double>& embedding_table() const { return embedding_; }
    std::vector<double>& projection() { return projection_; }
    const std::vector<double>& projection() const { return projection_; }

  private:
    struct Encoded {
        std::vector<size_t> rows;
        TokenEmbeddings emb;
    };
    Encoded encode_rows(std::string_view text, const std::string& owner_id,
                        size_t max_tokens) const;

    std::vector<std::string> vocab_tokens_;  // index -> token, [0] = UNK
    std::unordered_map<std::string, size_t> vocab_;
    size_t dim_ = 0;
    std::vector<double> embedding_;   // V x dim
    std::vector<double> projection_;  // dim x dim
    uint64_t seed_ = 0;
    uint64_t version_ = 0;
    std::string tokenizer_name_ = "default";
    TokenizerFn tokenizer_;

    // Adam moments; in-memory training state, not persisted in checkpoints.
    std::vector<double> adam_m_emb_, adam_v_emb_;
    std::vector<double> adam_m_proj_, adam_v_proj_;
    uint64_t adam_t_ = 0;
};

/// Uniform sample without replacement of k_neg ids from the BM25 top-`pool`
/// for the pair's query, excluding the positive. Deterministic for a fixed
/// seed. Fewer candidates than k_neg flags the batch; zero candidates throw.
TrainBatch mine_negatives(const InvertedIndex& sparse, const QDPair& pair, size_t k_neg,
                          size_t pool, uint64_t seed);

/// Encodes every corpus document against a frozen encoder snapshot.
DenseIndex build_dense_index(const Corpus& corpus, const TrainableEncoder& encoder,
                             size_t max_tokens = 0, size_t threads = 0);

}  // namespace lirag

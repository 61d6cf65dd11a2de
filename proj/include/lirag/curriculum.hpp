#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "lirag/corpus.hpp"
#include "lirag/dense_index.hpp"
#include "lirag/encoder.hpp"
#include "lirag/generation.hpp"
#include "lirag/sparse_index.hpp"

namespace lirag {

/// Rank windows for curriculum selection: ranks within k_pass count as
/// already learned, ranks above k_bad as generation noise; the window
/// in between is selected for the next training cycle.
struct FilterPolicy {
    size_t k_keep = 3;
    size_t k_pass = 3;
    size_t k_bad = 100;

    void validate() const;  // 1 <= k_pass <= k_keep <= k_bad
};

struct FilterResult {
    std::vector<QDPair> kept;
    struct Rejected {
        QDPair pair;
        std::string reason;
    };
    std::vector<Rejected> rejected;
};

/// A pair is kept iff its source document appears in the retriever's
/// top-k_keep results for its query. Retriever failures reject the pair with
/// the failure recorded.
FilterResult consistency_filter(const RetrieverFn& retriever, const std::vector<QDPair>& pairs,
                                size_t k_keep);

/// BM25-filtered pairs truncated to n_seed by ascending source-document rank,
/// then doc_id; provenance is rewritten to seed. Throws when nothing survives.
std::vector<QDPair> select_seed(const InvertedIndex& sparse, const std::vector<QDPair>& pairs,
                                size_t n_seed, size_t k_keep);

struct SelectionResult {
    std::vector<QDPair> selected;  // k_pass < rank <= k_bad
    struct Excluded {
        QDPair pair;
        size_t rank;
    };
    std::vector<Excluded> excluded;        // rank > k_bad
    std::vector<QDPair> already_learned;   // rank <= k_pass
};

/// Partitions every pair not in `already` (query ids) by the rank of its
/// source document under the current dense retriever. Ranks come from the
/// full index up to full_rank_limit documents; beyond that they are computed
/// within the BM25 top-1000 candidates plus the source document, which
/// requires `sparse`.
SelectionResult select_next(const DenseIndex& index, const TrainableEncoder& encoder,
                            const std::vector<QDPair>& pairs, const FilterPolicy& policy,
                            const std::set<std::string>& already, size_t max_tokens = 0,
                            size_t threads = 0, const InvertedIndex* sparse = nullptr,
                            size_t full_rank_limit = 10000);

struct IterationStats {
    size_t iteration = 0;
    size_t pool_size = 0;
    size_t added = 0;
    size_t excluded = 0;
    size_t trainset_size = 0;
    double heldout_recall = 0.0;
    double loss_mean = 0.0;
    std::string status;
};

struct TrainConfig {
    size_t dim = 64;
    double lr = 2e-5;
    double proj_lr = -1.0;  // < 0: same as lr
    size_t k_neg = 7;
    size_t pool = 1000;
    size_t n_seed = 1000;
    size_t epochs = 1;
    uint64_t seed = 42;
    size_t max_tokens = 350;
    size_t recall_cutoff = 10;
    size_t threads = 0;
    std::vector<QDPair> heldout;  // held-out (query, source doc) pairs
};

struct CurriculumState {
    size_t iteration = 0;
    std::vector<QDPair> train_set;
    TrainableEncoder encoder;
    std::vector<IterationStats> history;
    std::string status;
};

/// Seed via BM25 consistency filtering, warm-up training, then iterate:
/// select under the previous model, grow the train set, retrain. Training
/// continues from the previous checkpoint. An empty selection ends the loop
/// early with the status recorded.
CurriculumState run_curriculum(const Corpus& corpus, const InvertedIndex& sparse,
                               const std::vector<QDPair>& pool, const FilterPolicy& policy,
                               size_t iterations, const TrainConfig& cfg);

/// Trains a fresh encoder on the given pairs without any filtering, using the
/// same vocabulary universe and schedule as run_curriculum's warm-up. Used to
/// compare curricula against unfiltered baselines under identical seeds.
TrainableEncoder train_plain(const Corpus& corpus, const InvertedIndex& sparse,
                             const std::vector<QDPair>& train_pairs,
                             const std::vector<QDPair>& vocab_pairs, const TrainConfig& cfg);

/// Fraction of held-out pairs whose source document lands in the dense
/// top-`cutoff` under the given encoder.
double heldout_recall(const Corpus& corpus, const TrainableEncoder& encoder,
                      const std::vector<QDPair>& heldout, size_t cutoff, size_t max_tokens = 0,
                      size_t threads = 0);

void write_history_csv(const std::string& path, const std::vector<IterationStats>& history);

}  // namespace lirag

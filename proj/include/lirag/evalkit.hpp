#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lirag/common.hpp"

namespace lirag {

/// Binary relevance judgments; every judged query has at least one doc.
using Qrels = std::map<std::string, std::set<std::string>>;

struct RetrievalMetrics {
    double ndcg = 0.0;
    double map = 0.0;
    double recall = 0.0;
    double mrr = 0.0;
};

/// Per-query metrics at the cutoff. Binary gains; NDCG discount is
/// 1/log2(rank+1) with rank starting at 1; AP@k divides by min(R, k);
/// MRR uses the first relevant rank within the cutoff, else 0.
std::map<std::string, RetrievalMetrics> retrieval_metrics_per_query(
    const std::map<std::string, RankedList>& runs, const Qrels& qrels, size_t cutoff = 10);

/// Macro average over the queries present in qrels; queries missing from the
/// runs score 0 on every metric.
RetrievalMetrics retrieval_metrics(const std::map<std::string, RankedList>& runs,
                                   const Qrels& qrels, size_t cutoff = 10);

using NormalizerFn = std::function<std::vector<std::string>(const std::string&)>;

/// Lowercases, strips punctuation, splits on whitespace.
std::vector<std::string> normalize_tokens(const std::string& text);

/// Exact match on the normalized token sequence plus bag-of-token F1.
/// Both empty -> (1, 1.0); exactly one empty -> (0, 0.0).
std::pair<int, double> em_f1(const std::string& pred, const std::string& gold,
                             const NormalizerFn& normalizer = normalize_tokens);

struct TextScore {
    double bleu = 0.0;
    double rouge_l = 0.0;
};

/// Sentence BLEU-4 (orders the prediction is long enough for; add-one
/// smoothing on zero match counts; brevity penalty) and ROUGE-L F1 via
/// longest common subsequence. Empty prediction scores (0, 0).
TextScore bleu_rouge(const std::string& pred, const std::string& gold,
                     const NormalizerFn& normalizer = normalize_tokens);

/// Qrels file: `query_id 0 doc_id rel` per line; rel > 0 marks relevance.
Qrels load_qrels(const std::string& path);
void save_qrels(const std::string& path, const Qrels& qrels);

std::string metrics_json(const RetrievalMetrics& macro, size_t cutoff, size_t n_queries);
void write_per_query_csv(const std::string& path,
                         const std::map<std::string, RetrievalMetrics>& per_query);

}  // namespace lirag

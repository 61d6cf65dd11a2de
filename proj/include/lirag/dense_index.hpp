#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lirag/common.hpp"

namespace lirag {

/// Per-token embedding matrix for one text, row-major (num_tokens x dim).
/// Squared row norms are cached on finalize() so repeated scoring reuses them.
struct TokenEmbeddings {
    std::string owner_id;
    size_t dim = 0;
    std::vector<double> data;
    std::vector<double> row_sqnorm;

    size_t num_tokens() const { return dim == 0 ? 0 : data.size() / dim; }
    const double* row(size_t i) const { return data.data() + i * dim; }
    void finalize();
};

/// Late-interaction relevance: sum over query tokens of the maximum cosine
/// similarity against any document token. Cosine with a zero-norm vector is 0.
/// Result lies in [-|q|, |q|]. Throws on dimension mismatch or empty input.
double maxsim_score(const TokenEmbeddings& q, const TokenEmbeddings& d);

/// Immutable after build; scoring may run on multiple threads without
/// changing results or tie-break order.
class DenseIndex {
  public:
    DenseIndex() = default;
    DenseIndex(size_t dim, std::string encoder_version)
        : dim_(dim), encoder_version_(std::move(encoder_version)) {}

    void add(TokenEmbeddings entry);

    size_t dim() const { return dim_; }
    size_t size() const { return entries_.size(); }
    const std::string& encoder_version() const { return encoder_version_; }
    const std::map<std::string, TokenEmbeddings>& entries() const { return entries_; }
    bool contains(const std::string& doc_id) const { return entries_.count(doc_id) > 0; }

    void save(const std::string& path) const;
    static DenseIndex load(const std::string& path);

  private:
    std::map<std::string, TokenEmbeddings> entries_;
    size_t dim_ = 0;
    std::string encoder_version_;
};

/// Exhaustive MaxSim over the candidate set (whole index when absent),
/// descending score with ascending doc_id tie-break.
RankedList dense_topk(const DenseIndex& index, const TokenEmbeddings& q, size_t k,
                      const std::optional<std::set<std::string>>& candidates = std::nullopt,
                      size_t threads = 0);

/// 1-based rank of doc_id under the full-index ordering, i.e. one plus the
/// number of documents strictly ranked before it.
size_t dense_rank_of(const DenseIndex& index, const TokenEmbeddings& q, const std::string& doc_id);

}  // namespace lirag

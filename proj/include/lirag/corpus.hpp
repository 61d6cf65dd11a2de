#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "lirag/tokenizer.hpp"

namespace lirag {

struct Document {
    std::string id;
    std::string text;
    size_t token_count = 0;
    std::map<std::string, std::string> meta;
};

enum class QueryType { fact, solution_short, solution_long, unknown };

const char* to_string(QueryType t);
QueryType query_type_from_string(const std::string& s);

struct Query {
    std::string id;
    std::string text;
    QueryType qtype = QueryType::unknown;
};

enum class Provenance { annotated, generated, seed };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// A (pseudo or gold) question tied to the document it was derived from.
struct QDPair {
    Query query;
    std::string doc_id;
    Provenance provenance = Provenance::generated;
};

/// Immutable once built; safe to share across concurrent readers.
class Corpus {
  public:
    Corpus() : Corpus("default") {}
    explicit Corpus(std::string tokenizer_name);

    /// Recomputes token_count from the corpus tokenizer. Throws on duplicate id.
    void add(Document doc);

    size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    bool contains(const std::string& id) const { return by_id_.count(id) > 0; }
    const Document& at(const std::string& id) const;
    const std::vector<Document>& docs() const { return docs_; }
    const std::string& tokenizer_name() const { return tokenizer_name_; }
    const TokenizerFn& tokenizer() const { return tokenizer_; }

    /// One JSON object per line, fields in the order id, text, meta.
    void save(const std::string& path) const;
    static Corpus load(const std::string& path, const std::string& tokenizer_name = "default");

  private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, size_t> by_id_;
    std::string tokenizer_name_;
    TokenizerFn tokenizer_;
};

struct IngestStats {
    size_t total = 0;
    size_t kept = 0;
    size_t dropped = 0;
};

struct IngestResult {
    Corpus corpus;
    IngestStats stats;
};

/// Reads line-delimited JSON documents and keeps those whose token count is
/// at least min_words. Preserves input order. Throws on malformed lines
/// (naming the line number) and duplicate ids (naming the id).
IngestResult ingest(const std::string& path, size_t min_words,
                    const std::string& tokenizer_name = "default");

/// QDPair files: one JSON object per line with query_id, query_text, qtype,
/// doc_id, provenance. Loading validates each doc_id against the corpus.
std::vector<QDPair> load_qdpairs(const std::string& path, const Corpus& corpus);
void save_qdpairs(const std::string& path, const std::vector<QDPair>& pairs);

/// Query files: one JSON object per line with id, text and optional qtype.
std::vector<Query> load_queries(const std::string& path);
void save_queries(const std::string& path, const std::vector<Query>& queries);

}  // namespace lirag

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lirag {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an LLM response does not follow the expected layout.
class ParseError : public Error {
  public:
    using Error::Error;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Ordered by descending score; equal scores break ties by ascending doc_id.
using RankedList = std::vector<ScoredDoc>;

inline bool ranked_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

}  // namespace lirag

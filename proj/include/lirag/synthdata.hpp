#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "lirag/corpus.hpp"
#include "lirag/evalkit.hpp"
#include "lirag/generation.hpp"

namespace lirag {

/// Parameters of the bundled synthetic world used by the offline test
/// pipeline. Documents are grouped; every member of a group carries every
/// member's anchor token, its own four times, so lexical ranking separates
/// the source while token-identity scoring alone cannot. Queries pair an
/// anchor with per-document ask/paraphrase tokens that only a trained
/// encoder can align.
struct SynthConfig {
    size_t n_docs = 2000;
    size_t group_size = 40;
    size_t n_noise = 500;    // noise queries paired with unrelated documents
    size_t n_heldout = 200;
    size_t n_eval = 600;     // larger recall-evaluation question set
    // Evaluation documents and noise-query sources are drawn from this
    // leading fraction of the id space, the region a seed-first curriculum
    // trains earliest.
    double heldout_frac = 0.6;
    uint64_t seed = 7;
};

struct SynthWorld {
    Corpus corpus;
    std::vector<QDPair> pool;          // clean + injected noise, provenance generated
    std::set<std::string> noise_ids;   // query ids of the injected noise pairs
    std::vector<QDPair> heldout;       // unseen gold pairs, provenance annotated
    Qrels heldout_qrels;
    std::vector<QaPair> heldout_qa;    // heldout queries with gold answers
    std::vector<QDPair> eval_pairs;    // superset of heldout for recall evaluation
};

SynthWorld make_synth_world(const SynthConfig& cfg = {});

}  // namespace lirag

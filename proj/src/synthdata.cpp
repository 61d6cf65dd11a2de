#include "lirag/synthdata.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <sstream>

#include "lirag/util.hpp"

namespace lirag {

namespace {

std::string doc_id_for(size_t j) {
    std::ostringstream ss;
    ss << "d";
    ss.width(4);
    ss.fill('0');
    ss << j;
    return ss.str();
}

std::string doc_text(size_t j, const std::vector<size_t>& hosted) {
    std::ostringstream ss;
    ss << "key" << j << " code" << j;
    for (int rep = 0; rep < 4; ++rep) ss << " anchor" << j;
    size_t p = 0;
    for (size_t m : hosted) {
        ss << " anchor" << m;
        if (p < 5) ss << " d" << j << "p" << p++;
    }
    while (p < 5) ss << " d" << j << "p" << p++;
    // Unique padding keeps every document at 50+ tokens so the default
    // ingestion floor retains the whole collection.
    size_t base = 11 + hosted.size();
    size_t want = std::max<size_t>(50, base) + (j % 7);
    for (size_t i = 0; base + i < want; ++i) ss << " pad" << j << "n" << i;
    return ss.str();
}

std::string query_text(size_t j, const std::array<size_t, 5>& perm, size_t offset) {
    std::ostringstream ss;
    ss << "anchor" << j << " ask" << j;
    for (size_t i = 0; i < 3; ++i) ss << " q" << j << "p" << perm[(offset + i) % 5];
    return ss.str();
}

}  // namespace

SynthWorld make_synth_world(const SynthConfig& cfg) {
    if (cfg.n_docs < 2 || cfg.group_size == 0 || cfg.group_size >= cfg.n_docs)
        throw Error("synth world: need n_docs >= 2 and group_size < n_docs");
    if (cfg.n_heldout > cfg.n_docs) throw Error("synth world: n_heldout exceeds n_docs");

    SynthWorld world;

    // Each document carries its own anchor four times and hosts the anchors
    // of group_size - 1 documents sampled across the corpus. Lexical ranking
    // separates the source by term frequency while token-identity scoring
    // sees group_size equally-anchored candidates.
    for (size_t j = 0; j < cfg.n_docs; ++j) {
        std::mt19937_64 rng(mix64(cfg.seed, 0x686f7374ULL ^ (j * 2654435761ULL)));
        std::vector<size_t> hosted;
        std::set<size_t> picked{j};
        while (hosted.size() < cfg.group_size - 1) {
            size_t m = static_cast<size_t>(rng() % cfg.n_docs);
            if (picked.insert(m).second) hosted.push_back(m);
        }
        Document doc;
        doc.id = doc_id_for(j);
        doc.text = doc_text(j, hosted);
        world.corpus.add(std::move(doc));
    }

    // Per-document permutation of the paraphrase vocabulary.
    std::vector<std::array<size_t, 5>> perms(cfg.n_docs);
    for (size_t j = 0; j < cfg.n_docs; ++j) {
        std::array<size_t, 5> perm{0, 1, 2, 3, 4};
        std::mt19937_64 rng(mix64(cfg.seed, j));
        for (size_t i = 5; i > 1; --i) {
            size_t k = static_cast<size_t>(rng() % i);
            std::swap(perm[i - 1], perm[k]);
        }
        perms[j] = perm;
    }

    // Clean pool: one query per document built from perm positions 0..2.
    for (size_t j = 0; j < cfg.n_docs; ++j) {
        QDPair pair;
        pair.query.id = "p-clean-" + std::to_string(j);
        pair.query.text = query_text(j, perms[j], 0);
        pair.query.qtype = QueryType::fact;
        pair.doc_id = doc_id_for(j);
        pair.provenance = Provenance::generated;
        world.pool.push_back(std::move(pair));
    }

    size_t region = std::max(std::max(cfg.n_heldout, cfg.n_eval),
                             static_cast<size_t>(static_cast<double>(cfg.n_docs) *
                                                 cfg.heldout_frac));
    region = std::min(region, cfg.n_docs);

    // Noise: queries built from one document's vocabulary but paired with an
    // unrelated document. Sources come from the evaluated region.
    std::mt19937_64 noise_rng(mix64(cfg.seed, 0x6e6f6973ULL));
    for (size_t n = 0; n < cfg.n_noise; ++n) {
        size_t a = static_cast<size_t>(noise_rng() % region);
        size_t b = 0;
        do {
            b = static_cast<size_t>(noise_rng() % cfg.n_docs);
        } while (b == a);
        QDPair pair;
        pair.query.id = "p-noise-" + std::to_string(n);
        pair.query.text = query_text(a, perms[a], 2);
        pair.query.qtype = QueryType::fact;
        pair.doc_id = doc_id_for(b);
        pair.provenance = Provenance::generated;
        world.noise_ids.insert(pair.query.id);
        world.pool.push_back(std::move(pair));
    }

    // Evaluation questions: fresh variants (perm positions 1..3) over a
    // seeded sample of region documents; these never enter the pool. The
    // held-out subset (first n_heldout) additionally carries gold answers
    // and qrels.
    std::vector<size_t> doc_order(region);
    for (size_t j = 0; j < region; ++j) doc_order[j] = j;
    std::mt19937_64 held_rng(mix64(cfg.seed, 0x68656c64ULL));
    for (size_t i = doc_order.size(); i > 1; --i) {
        size_t k = static_cast<size_t>(held_rng() % i);
        std::swap(doc_order[i - 1], doc_order[k]);
    }
    size_t n_eval = std::min(std::max(cfg.n_eval, cfg.n_heldout), region);
    for (size_t i = 0; i < n_eval; ++i) {
        size_t j = doc_order[i];
        QDPair pair;
        pair.query.id = "h-" + std::to_string(j);
        pair.query.text = query_text(j, perms[j], 1);
        pair.query.qtype = QueryType::fact;
        pair.doc_id = doc_id_for(j);
        pair.provenance = Provenance::annotated;

        if (i < cfg.n_heldout) {
            world.heldout_qrels[pair.query.id] = {pair.doc_id};
            QaPair qa;
            qa.query = pair.query;
            qa.gold_answer = "The code is code" + std::to_string(j) + ".";
            world.heldout_qa.push_back(std::move(qa));
            world.heldout.push_back(pair);
        }
        world.eval_pairs.push_back(std::move(pair));
    }

    return world;
}

}  // namespace lirag

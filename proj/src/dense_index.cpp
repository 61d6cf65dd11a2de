#include "lirag/dense_index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "lirag/util.hpp"

namespace lirag {

namespace {

constexpr char kMagic[9] = "LIRAGDNS";
constexpr uint32_t kFormatVersion = 1;

double sqnorm(const double* v, size_t dim) {
    double s = 0.0;
    for (size_t i = 0; i < dim; ++i) s += v[i] * v[i];
    return s;
}

// cos = dot / sqrt(nx2 * ny2); defined as 0 when either norm is zero.
double cosine(const double* x, double nx2, const double* y, double ny2, size_t dim) {
    if (nx2 == 0.0 || ny2 == 0.0) return 0.0;
    double dot = 0.0;
    for (size_t i = 0; i < dim; ++i) dot += x[i] * y[i];
    return dot / std::sqrt(nx2 * ny2);
}

}  // namespace

void TokenEmbeddings::finalize() {
    size_t n = num_tokens();
    row_sqnorm.resize(n);
    for (size_t i = 0; i < n; ++i) row_sqnorm[i] = sqnorm(row(i), dim);
}

double maxsim_score(const TokenEmbeddings& q, const TokenEmbeddings& d) {
    if (q.dim != d.dim) throw Error("maxsim: dimension mismatch");
    size_t nq = q.num_tokens();
    size_t nd = d.num_tokens();
    if (nq == 0 || nd == 0) throw Error("maxsim: empty token matrix");

    const bool q_cached = q.row_sqnorm.size() == nq;
    const bool d_cached = d.row_sqnorm.size() == nd;

    double total = 0.0;
    for (size_t m = 0; m < nq; ++m) {
        const double* qv = q.row(m);
        double qn = q_cached ? q.row_sqnorm[m] : sqnorm(qv, q.dim);
        double best = -2.0;
        for (size_t n = 0; n < nd; ++n) {
            const double* dv = d.row(n);
            double dn = d_cached ? d.row_sqnorm[n] : sqnorm(dv, d.dim);
            double c = cosine(qv, qn, dv, dn, q.dim);
            if (c > best) best = c;
        }
        total += best;
    }
    return total;
}

void DenseIndex::add(TokenEmbeddings entry) {
    if (entry.dim != dim_) throw Error("dense index: entry dim mismatch for " + entry.owner_id);
    if (entry.num_tokens() == 0) throw Error("dense index: empty entry " + entry.owner_id);
    entry.finalize();
    std::string id = entry.owner_id;
    if (!entries_.emplace(id, std::move(entry)).second)
        throw Error("dense index: duplicate entry " + id);
}

RankedList dense_topk(const DenseIndex& index, const TokenEmbeddings& q, size_t k,
                      const std::optional<std::set<std::string>>& candidates, size_t threads) {
    if (k < 1) throw Error("dense_topk requires k >= 1");
    if (index.size() == 0) return {};

    std::vector<const TokenEmbeddings*> docs;
    if (candidates) {
        docs.reserve(candidates->size());
        for (const auto& id : *candidates) {
            auto it = index.entries().find(id);
            if (it == index.entries().end()) throw Error("dense_topk: unknown candidate " + id);
            docs.push_back(&it->second);
        }
    } else {
        docs.reserve(index.size());
        for (const auto& [_, entry] : index.entries()) docs.push_back(&entry);
    }

    std::vector<double> scores(docs.size());
    size_t n_threads = threads == 0 ? 1 : threads;
    if (n_threads <= 1 || docs.size() < 64) {
        for (size_t i = 0; i < docs.size(); ++i) scores[i] = maxsim_score(q, *docs[i]);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    size_t i = next.fetch_add(64);
                    if (i >= docs.size()) break;
                    size_t end = std::min(i + 64, docs.size());
                    for (; i < end; ++i) scores[i] = maxsim_score(q, *docs[i]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    RankedList results;
    results.reserve(docs.size());
    for (size_t i = 0; i < docs.size(); ++i) results.push_back({docs[i]->owner_id, scores[i]});
    std::sort(results.begin(), results.end(), ranked_before);
    if (results.size() > k) results.resize(k);
    return results;
}

size_t dense_rank_of(const DenseIndex& index, const TokenEmbeddings& q, const std::string& doc_id) {
    auto it = index.entries().find(doc_id);
    if (it == index.entries().end()) throw Error("dense_rank_of: unknown doc " + doc_id);
    double own = maxsim_score(q, it->second);
    size_t before = 0;
    for (const auto& [id, entry] : index.entries()) {
        if (id == doc_id) continue;
        double s = maxsim_score(q, entry);
        if (s > own || (s == own && id < doc_id)) ++before;
    }
    return before + 1;
}

void DenseIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write dense index: " + path);
    out.write(kMagic, 8);
    binio::put_u32(out, kFormatVersion);
    binio::put_u32(out, static_cast<uint32_t>(dim_));
    binio::put_u64(out, entries_.size());
    binio::put_string(out, encoder_version_);
    for (const auto& [id, entry] : entries_) {
        binio::put_string(out, id);
        binio::put_u32(out, static_cast<uint32_t>(entry.num_tokens()));
        for (double v : entry.data) binio::put_f32(out, static_cast<float>(v));
    }
    if (!out) throw Error("write failed: " + path);
}

DenseIndex DenseIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dense index: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw Error("bad dense index magic: " + path);
    uint32_t fmt = binio::get_u32(in);
    if (fmt != kFormatVersion) throw Error("unsupported dense index version");
    uint32_t dim = binio::get_u32(in);
    uint64_t count = binio::get_u64(in);
    std::string encoder_version = binio::get_string(in);

    DenseIndex index(dim, encoder_version);
    for (uint64_t i = 0; i < count; ++i) {
        TokenEmbeddings entry;
        entry.owner_id = binio::get_string(in);
        entry.dim = dim;
        uint32_t n_tokens = binio::get_u32(in);
        entry.data.resize(static_cast<size_t>(n_tokens) * dim);
        for (auto& v : entry.data) v = static_cast<double>(binio::get_f32(in));
        index.add(std::move(entry));
    }
    return index;
}

}  // namespace lirag

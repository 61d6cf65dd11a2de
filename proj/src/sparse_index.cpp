#include "lirag/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lirag/util.hpp"

namespace lirag {

double InvertedIndex::idf(const std::string& term) const {
    auto it = postings_.find(term);
    size_t df = it == postings_.end() ? 0 : it->second.size();
    double n = static_cast<double>(doc_count_);
    return std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
}

InvertedIndex build_sparse(const Corpus& corpus, double k1, double b) {
    if (corpus.empty()) throw Error("cannot build a sparse index from an empty corpus");
    if (k1 <= 0.0) throw Error("bm25 k1 must be positive");
    if (b < 0.0 || b > 1.0) throw Error("bm25 b must lie in [0, 1]");

    InvertedIndex index;
    index.params_ = {k1, b};
    index.tokenizer_name_ = corpus.tokenizer_name();
    index.tokenizer_ = corpus.tokenizer();
    index.doc_count_ = corpus.size();

    double total_len = 0.0;
    for (const auto& doc : corpus.docs()) {
        TokenSeq toks = corpus.tokenizer()(doc.text);
        index.doc_lengths_[doc.id] = toks.size();
        total_len += static_cast<double>(toks.size());

        std::unordered_map<std::string, uint32_t> tf;
        for (const auto& t : toks.tokens) tf[t]++;
        for (const auto& [term, count] : tf) index.postings_[term].push_back({doc.id, count});
    }
    index.avg_doc_length_ = total_len / static_cast<double>(corpus.size());

    for (auto& [term, list] : index.postings_) {
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b2) { return a.doc_id < b2.doc_id; });
    }
    return index;
}

RankedList bm25_topk(const InvertedIndex& index, const Query& query, size_t k) {
    if (k < 1) throw Error("bm25_topk requires k >= 1");
    TokenSeq toks = index.tokenizer()(query.text);
    if (toks.empty()) return {};

    const double k1 = index.params().k1;
    const double b = index.params().b;
    const double avgdl = index.avg_doc_length();

    std::unordered_map<std::string, double> acc;
    for (const auto& term : toks.tokens) {
        auto it = index.postings().find(term);
        if (it == index.postings().end()) continue;
        double idf = index.idf(term);
        for (const auto& posting : it->second) {
            double dl = static_cast<double>(index.doc_lengths().at(posting.doc_id));
            double tf = static_cast<double>(posting.tf);
            double sat = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            acc[posting.doc_id] += idf * sat;
        }
    }

    RankedList results;
    results.reserve(acc.size());
    for (auto& [doc_id, score] : acc) results.push_back({doc_id, score});
    std::sort(results.begin(), results.end(), ranked_before);
    if (results.size() > k) results.resize(k);
    return results;
}

void InvertedIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write sparse index: " + path);
    out.write("LIRAGSPX", 8);
    binio::put_u32(out, 1);
    binio::put_string(out, tokenizer_name_);
    binio::put_f64(out, params_.k1);
    binio::put_f64(out, params_.b);
    binio::put_u64(out, doc_count_);

    // doc_lengths sorted by id for byte-stable output
    std::vector<std::pair<std::string, size_t>> lens(doc_lengths_.begin(), doc_lengths_.end());
    std::sort(lens.begin(), lens.end());
    binio::put_u64(out, lens.size());
    for (const auto& [id, len] : lens) {
        binio::put_string(out, id);
        binio::put_u64(out, len);
    }

    std::vector<std::string> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(term);
    std::sort(terms.begin(), terms.end());
    binio::put_u64(out, terms.size());
    for (const auto& term : terms) {
        binio::put_string(out, term);
        const auto& list = postings_.at(term);
        binio::put_u64(out, list.size());
        for (const auto& p : list) {
            binio::put_string(out, p.doc_id);
            binio::put_u32(out, p.tf);
        }
    }
    if (!out) throw Error("write failed: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open sparse index: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "LIRAGSPX") throw Error("bad sparse index magic: " + path);
    uint32_t fmt = binio::get_u32(in);
    if (fmt != 1) throw Error("unsupported sparse index version");

    InvertedIndex index;
    index.tokenizer_name_ = binio::get_string(in);
    index.tokenizer_ = tokenizer_by_name(index.tokenizer_name_);
    index.params_.k1 = binio::get_f64(in);
    index.params_.b = binio::get_f64(in);
    index.doc_count_ = binio::get_u64(in);

    uint64_t n_lens = binio::get_u64(in);
    double total = 0.0;
    for (uint64_t i = 0; i < n_lens; ++i) {
        std::string id = binio::get_string(in);
        uint64_t len = binio::get_u64(in);
        index.doc_lengths_[id] = len;
        total += static_cast<double>(len);
    }
    index.avg_doc_length_ = n_lens == 0 ? 0.0 : total / static_cast<double>(n_lens);

    uint64_t n_terms = binio::get_u64(in);
    for (uint64_t i = 0; i < n_terms; ++i) {
        std::string term = binio::get_string(in);
        uint64_t n_postings = binio::get_u64(in);
        auto& list = index.postings_[term];
        list.reserve(n_postings);
        for (uint64_t p = 0; p < n_postings; ++p) {
            std::string id = binio::get_string(in);
            uint32_t tf = binio::get_u32(in);
            list.push_back({std::move(id), tf});
        }
    }
    return index;
}

void write_trec_run(const std::string& path, const std::map<std::string, RankedList>& runs,
                    const std::string& run_tag) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write run file: " + path);
    for (const auto& [query_id, list] : runs) {
        size_t rank = 1;
        for (const auto& sd : list) {
            out << query_id << " Q0 " << sd.doc_id << " " << rank << " " << format_double(sd.score)
                << " " << run_tag << "\n";
            ++rank;
        }
    }
}

std::map<std::string, RankedList> load_trec_run(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open run file: " + path);
    std::map<std::string, RankedList> runs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, q0, doc_id, tag;
        size_t rank;
        double score;
        if (!(ss >> qid >> q0 >> doc_id >> rank >> score >> tag))
            throw Error("malformed run line " + std::to_string(line_no));
        runs[qid].push_back({doc_id, score});
    }
    return runs;
}

}  // namespace lirag

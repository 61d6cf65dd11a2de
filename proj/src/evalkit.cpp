#include "lirag/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "lirag/util.hpp"

namespace lirag {

std::map<std::string, RetrievalMetrics> retrieval_metrics_per_query(
    const std::map<std::string, RankedList>& runs, const Qrels& qrels, size_t cutoff) {
    if (cutoff < 1) throw Error("retrieval metrics require cutoff >= 1");

    std::map<std::string, RetrievalMetrics> per_query;
    for (const auto& [query_id, relevant] : qrels) {
        if (relevant.empty()) throw Error("qrels entry for " + query_id + " is empty");
        RetrievalMetrics m;
        auto run_it = runs.find(query_id);
        if (run_it != runs.end()) {
            const RankedList& list = run_it->second;
            size_t n = std::min(cutoff, list.size());
            double dcg = 0.0;
            double hits = 0.0;
            double ap_sum = 0.0;
            size_t first_rel = 0;
            std::set<std::string> seen;  // duplicated doc ids count once
            for (size_t i = 0; i < n; ++i) {
                bool rel = relevant.count(list[i].doc_id) > 0 && seen.insert(list[i].doc_id).second;
                if (!rel) continue;
                size_t rank = i + 1;
                hits += 1.0;
                dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
                ap_sum += hits / static_cast<double>(rank);
                if (first_rel == 0) first_rel = rank;
            }
            double r = static_cast<double>(relevant.size());
            double ideal_n = std::min(r, static_cast<double>(cutoff));
            double idcg = 0.0;
            for (size_t i = 1; i <= static_cast<size_t>(ideal_n); ++i)
                idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
            m.ndcg = idcg == 0.0 ? 0.0 : dcg / idcg;
            m.map = ideal_n == 0.0 ? 0.0 : ap_sum / ideal_n;
            m.recall = r == 0.0 ? 0.0 : hits / r;
            m.mrr = first_rel == 0 ? 0.0 : 1.0 / static_cast<double>(first_rel);
        }
        per_query.emplace(query_id, m);
    }
    return per_query;
}

RetrievalMetrics retrieval_metrics(const std::map<std::string, RankedList>& runs,
                                   const Qrels& qrels, size_t cutoff) {
    auto per_query = retrieval_metrics_per_query(runs, qrels, cutoff);
    RetrievalMetrics macro;
    if (per_query.empty()) return macro;
    // Iteration over the map is ordered by query_id, so the summation order
    // never depends on input arrangement.
    for (const auto& [_, m] : per_query) {
        macro.ndcg += m.ndcg;
        macro.map += m.map;
        macro.recall += m.recall;
        macro.mrr += m.mrr;
    }
    double n = static_cast<double>(per_query.size());
    macro.ndcg /= n;
    macro.map /= n;
    macro.recall /= n;
    macro.mrr /= n;
    return macro;
}

std::vector<std::string> normalize_tokens(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) {
            cleaned.push_back(' ');
        } else {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    std::vector<std::string> tokens;
    std::istringstream ss(cleaned);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

std::pair<int, double> em_f1(const std::string& pred, const std::string& gold,
                             const NormalizerFn& normalizer) {
    std::vector<std::string> p = normalizer(pred);
    std::vector<std::string> g = normalizer(gold);
    if (p.empty() && g.empty()) return {1, 1.0};
    if (p.empty() || g.empty()) return {0, 0.0};

    int em = p == g ? 1 : 0;

    std::unordered_map<std::string, size_t> gold_counts;
    for (const auto& t : g) gold_counts[t]++;
    double overlap = 0.0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            overlap += 1.0;
            it->second--;
        }
    }
    if (overlap == 0.0) return {em, 0.0};
    double precision = overlap / static_cast<double>(p.size());
    double recall = overlap / static_cast<double>(g.size());
    return {em, 2.0 * precision * recall / (precision + recall)};
}

namespace {

size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

TextScore bleu_rouge(const std::string& pred, const std::string& gold,
                     const NormalizerFn& normalizer) {
    std::vector<std::string> p = normalizer(pred);
    std::vector<std::string> g = normalizer(gold);
    TextScore score;
    if (p.empty()) return score;

    // BLEU-4: geometric mean over the n-gram orders the prediction supports,
    // add-one smoothing when an order has zero matches, brevity penalty.
    double log_sum = 0.0;
    size_t orders = 0;
    for (size_t n = 1; n <= 4; ++n) {
        if (p.size() < n) break;
        std::map<std::vector<std::string>, size_t> gold_ngrams;
        if (g.size() >= n)
            for (size_t i = 0; i + n <= g.size(); ++i)
                gold_ngrams[std::vector<std::string>(g.begin() + i, g.begin() + i + n)]++;
        size_t total = p.size() - n + 1;
        size_t matched = 0;
        std::map<std::vector<std::string>, size_t> used;
        for (size_t i = 0; i + n <= p.size(); ++i) {
            std::vector<std::string> ngram(p.begin() + i, p.begin() + i + n);
            auto it = gold_ngrams.find(ngram);
            if (it != gold_ngrams.end() && used[ngram] < it->second) {
                used[ngram]++;
                matched++;
            }
        }
        double pn = matched > 0
                        ? static_cast<double>(matched) / static_cast<double>(total)
                        : 1.0 / static_cast<double>(total + 1);
        log_sum += std::log(pn);
        orders++;
    }
    double geo = std::exp(log_sum / static_cast<double>(orders));
    double bp = p.size() >= g.size()
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(g.size()) / static_cast<double>(p.size()));
    score.bleu = bp * geo;

    size_t lcs = lcs_length(p, g);
    if (lcs > 0 && !g.empty()) {
        double prec = static_cast<double>(lcs) / static_cast<double>(p.size());
        double rec = static_cast<double>(lcs) / static_cast<double>(g.size());
        score.rouge_l = 2.0 * prec * rec / (prec + rec);
    }
    return score;
}

Qrels load_qrels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open qrels file: " + path);
    Qrels qrels;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, iter, doc_id;
        int rel;
        if (!(ss >> qid >> iter >> doc_id >> rel))
            throw Error("malformed qrels line " + std::to_string(line_no));
        if (rel > 0) qrels[qid].insert(doc_id);
    }
    return qrels;
}

void save_qrels(const std::string& path, const Qrels& qrels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write qrels file: " + path);
    for (const auto& [qid, docs] : qrels)
        for (const auto& doc_id : docs) out << qid << " 0 " << doc_id << " 1\n";
}

std::string metrics_json(const RetrievalMetrics& macro, size_t cutoff, size_t n_queries) {
    nlohmann::ordered_json j;
    j["cutoff"] = cutoff;
    j["queries"] = n_queries;
    j["ndcg"] = macro.ndcg;
    j["map"] = macro.map;
    j["recall"] = macro.recall;
    j["mrr"] = macro.mrr;
    return j.dump(2);
}

void write_per_query_csv(const std::string& path,
                         const std::map<std::string, RetrievalMetrics>& per_query) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write per-query csv: " + path);
    out << "query_id,ndcg,map,recall,mrr\n";
    for (const auto& [qid, m] : per_query) {
        out << qid << "," << format_double(m.ndcg) << "," << format_double(m.map) << ","
            << format_double(m.recall) << "," << format_double(m.mrr) << "\n";
    }
}

}  // namespace lirag

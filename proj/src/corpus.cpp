#include "lirag/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lirag/common.hpp"

namespace lirag {

using ordered_json = nlohmann::ordered_json;

const char* to_string(QueryType t) {
    switch (t) {
        case QueryType::fact: return "fact";
        case QueryType::solution_short: return "solution_short";
        case QueryType::solution_long: return "solution_long";
        case QueryType::unknown: return "unknown";
    }
    return "unknown";
}

QueryType query_type_from_string(const std::string& s) {
    if (s == "fact") return QueryType::fact;
    if (s == "solution_short") return QueryType::solution_short;
    if (s == "solution_long") return QueryType::solution_long;
    if (s == "unknown") return QueryType::unknown;
    throw Error("unknown query type: " + s);
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::annotated: return "annotated";
        case Provenance::generated: return "generated";
        case Provenance::seed: return "seed";
    }
    return "generated";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "annotated") return Provenance::annotated;
    if (s == "generated") return Provenance::generated;
    if (s == "seed") return Provenance::seed;
    throw Error("unknown provenance: " + s);
}

namespace {

bool blank(const std::string& s) {
    for (unsigned char c : s)
        if (!std::isspace(c)) return false;
    return true;
}

}  // namespace

Corpus::Corpus(std::string tokenizer_name)
    : tokenizer_name_(std::move(tokenizer_name)), tokenizer_(tokenizer_by_name(tokenizer_name_)) {}

void Corpus::add(Document doc) {
    if (by_id_.count(doc.id)) throw Error("duplicate document id: " + doc.id);
    doc.token_count = tokenizer_(doc.text).size();
    by_id_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document& Corpus::at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error("unknown document id: " + id);
    return docs_[it->second];
}

void Corpus::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write corpus file: " + path);
    for (const auto& d : docs_) {
        ordered_json j;
        j["id"] = d.id;
        j["text"] = d.text;
        if (!d.meta.empty()) j["meta"] = d.meta;
        out << j.dump() << "\n";
    }
}

Corpus Corpus::load(const std::string& path, const std::string& tokenizer_name) {
    auto result = ingest(path, 0, tokenizer_name);
    return std::move(result.corpus);
}

IngestResult ingest(const std::string& path, size_t min_words, const std::string& tokenizer_name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus file: " + path);

    IngestResult result{Corpus(tokenizer_name), {}};
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        result.stats.total++;

        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw Error("malformed record at line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
            !j["text"].is_string()) {
            throw Error("malformed record at line " + std::to_string(line_no) +
                        ": expected object with string fields id, text");
        }

        Document d;
        d.id = j["id"].get<std::string>();
        d.text = j["text"].get<std::string>();
        if (j.contains("meta")) {
            if (!j["meta"].is_object())
                throw Error("malformed record at line " + std::to_string(line_no) +
                            ": meta must be an object");
            for (auto& [k, v] : j["meta"].items()) {
                if (!v.is_string())
                    throw Error("malformed record at line " + std::to_string(line_no) +
                                ": meta values must be strings");
                d.meta[k] = v.get<std::string>();
            }
        }

        size_t n_tokens = result.corpus.tokenizer()(d.text).size();
        if (n_tokens >= min_words) {
            result.corpus.add(std::move(d));
            result.stats.kept++;
        } else {
            result.stats.dropped++;
        }
    }
    return result;
}

std::vector<QDPair> load_qdpairs(const std::string& path, const Corpus& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open pair file: " + path);
    std::vector<QDPair> pairs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw Error("malformed pair at line " + std::to_string(line_no) + ": " + e.what());
        }
        QDPair p;
        p.query.id = j.at("query_id").get<std::string>();
        p.query.text = j.at("query_text").get<std::string>();
        p.query.qtype = query_type_from_string(j.at("qtype").get<std::string>());
        p.doc_id = j.at("doc_id").get<std::string>();
        if (blank(p.query.text))
            throw Error("pair at line " + std::to_string(line_no) + " has empty query text");
        p.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        if (!corpus.contains(p.doc_id))
            throw Error("pair at line " + std::to_string(line_no) + " references unknown doc_id: " +
                        p.doc_id);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void save_qdpairs(const std::string& path, const std::vector<QDPair>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write pair file: " + path);
    for (const auto& p : pairs) {
        ordered_json j;
        j["query_id"] = p.query.id;
        j["query_text"] = p.query.text;
        j["qtype"] = to_string(p.query.qtype);
        j["doc_id"] = p.doc_id;
        j["provenance"] = to_string(p.provenance);
        out << j.dump() << "\n";
    }
}

std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open query file: " + path);
    std::vector<Query> queries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw Error("malformed query at line " + std::to_string(line_no) + ": " + e.what());
        }
        Query q;
        q.id = j.at("id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        if (j.contains("qtype")) q.qtype = query_type_from_string(j["qtype"].get<std::string>());
        if (blank(q.text))
            throw Error("query at line " + std::to_string(line_no) + " has empty text");
        queries.push_back(std::move(q));
    }
    return queries;
}

void save_queries(const std::string& path, const std::vector<Query>& queries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write query file: " + path);
    for (const auto& q : queries) {
        ordered_json j;
        j["id"] = q.id;
        j["text"] = q.text;
        j["qtype"] = to_string(q.qtype);
        out << j.dump() << "\n";
    }
}

}  // namespace lirag

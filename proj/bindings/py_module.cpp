#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lirag/corpus.hpp"
#include "lirag/curriculum.hpp"
#include "lirag/dense_index.hpp"
#include "lirag/encoder.hpp"
#include "lirag/evalkit.hpp"
#include "lirag/generation.hpp"
#include "lirag/llm_client.hpp"
#include "lirag/qgen.hpp"
#include "lirag/sparse_index.hpp"
#include "lirag/tokenizer.hpp"

namespace py = pybind11;
using namespace lirag;

namespace {

TokenEmbeddings embeddings_from_rows(const std::vector<std::vector<double>>& rows,
                                     const std::string& owner) {
    TokenEmbeddings e;
    e.owner_id = owner;
    if (rows.empty()) throw Error("embeddings need at least one row");
    e.dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != e.dim) throw Error("ragged embedding rows");
        e.data.insert(e.data.end(), r.begin(), r.end());
    }
    e.finalize();
    return e;
}

std::vector<std::vector<double>> rows_of(const TokenEmbeddings& e) {
    std::vector<std::vector<double>> rows(e.num_tokens(), std::vector<double>(e.dim));
    for (size_t m = 0; m < e.num_tokens(); ++m)
        for (size_t i = 0; i < e.dim; ++i) rows[m][i] = e.row(m)[i];
    return rows;
}

std::vector<std::pair<std::string, double>> ranked_to_pairs(const RankedList& list) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(list.size());
    for (const auto& sd : list) out.emplace_back(sd.doc_id, sd.score);
    return out;
}

}  // namespace

PYBIND11_MODULE(lirag, m) {
    m.doc() = "late-interaction retrieval and generation pipeline";

    py::register_exception<Error>(m, "LiragError");

    m.def(
        "tokenize",
        [](const std::string& text) { return tokenize(text).tokens; },
        py::arg("text"), "Unicode-aware lowercasing tokenizer used across the pipeline");

    py::class_<Document>(m, "Document")
        .def_readonly("id", &Document::id)
        .def_readonly("text", &Document::text)
        .def_readonly("token_count", &Document::token_count);

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def("add",
             [](Corpus& c, const std::string& id, const std::string& text) {
                 c.add({id, text, 0, {}});
             },
             py::arg("id"), py::arg("text"))
        .def("__len__", &Corpus::size)
        .def("__contains__", &Corpus::contains)
        .def("doc",
             [](const Corpus& c, const std::string& id) -> const Document& { return c.at(id); },
             py::return_value_policy::reference_internal)
        .def("ids",
             [](const Corpus& c) {
                 std::vector<std::string> ids;
                 for (const auto& d : c.docs()) ids.push_back(d.id);
                 return ids;
             })
        .def("save", &Corpus::save)
        .def_static("load", &Corpus::load, py::arg("path"), py::arg("tokenizer") = "default");

    m.def(
        "ingest",
        [](const std::string& path, size_t min_words) {
            auto result = ingest(path, min_words);
            py::dict stats;
            stats["total"] = result.stats.total;
            stats["kept"] = result.stats.kept;
            stats["dropped"] = result.stats.dropped;
            return py::make_tuple(std::move(result.corpus), stats);
        },
        py::arg("path"), py::arg("min_words") = 50,
        "Load a line-delimited JSON corpus, dropping documents under min_words tokens");

    py::class_<InvertedIndex>(m, "InvertedIndex")
        .def_property_readonly("doc_count", &InvertedIndex::doc_count)
        .def_property_readonly("avg_doc_length", &InvertedIndex::avg_doc_length)
        .def("idf", &InvertedIndex::idf)
        .def("topk",
             [](const InvertedIndex& index, const std::string& query_text, size_t k) {
                 return ranked_to_pairs(bm25_topk(index, {"q", query_text, QueryType::unknown}, k));
             },
             py::arg("query"), py::arg("k") = 10)
        .def("save", &InvertedIndex::save)
        .def_static("load", &InvertedIndex::load);

    m.def("build_sparse", &build_sparse, py::arg("corpus"), py::arg("k1") = 0.9,
          py::arg("b") = 0.4, "Build the BM25 inverted index");

    m.def(
        "maxsim_score",
        [](const std::vector<std::vector<double>>& q, const std::vector<std::vector<double>>& d) {
            return maxsim_score(embeddings_from_rows(q, "q"), embeddings_from_rows(d, "d"));
        },
        py::arg("query_rows"), py::arg("doc_rows"),
        "Late-interaction score: sum over query tokens of the max cosine to any doc token");

    m.def("infonce_loss", &infonce_loss, py::arg("s_pos"), py::arg("s_negs"),
          "Contrastive loss over a positive score and negative scores");

    py::class_<TrainBatch>(m, "TrainBatch")
        .def(py::init([](const std::string& query_id, const std::string& query_text,
                         const std::string& positive, const std::vector<std::string>& negatives) {
                 TrainBatch b;
                 b.query = {query_id, query_text, QueryType::unknown};
                 b.positive = positive;
                 b.negatives = negatives;
                 return b;
             }),
             py::arg("query_id"), py::arg("query_text"), py::arg("positive"),
             py::arg("negatives"))
        .def_readonly("positive", &TrainBatch::positive)
        .def_readonly("negatives", &TrainBatch::negatives)
        .def_readonly("short_pool", &TrainBatch::short_pool);

    m.def(
        "mine_negatives",
        [](const InvertedIndex& sparse, const std::string& query_id, const std::string& query_text,
           const std::string& doc_id, size_t k_neg, size_t pool, uint64_t seed) {
            QDPair pair{{query_id, query_text, QueryType::unknown}, doc_id,
                        Provenance::generated};
            return mine_negatives(sparse, pair, k_neg, pool, seed);
        },
        py::arg("sparse"), py::arg("query_id"), py::arg("query_text"), py::arg("doc_id"),
        py::arg("k_neg") = 7, py::arg("pool") = 1000, py::arg("seed") = 42,
        "Sample negatives for a pair from the BM25 top-pool");

    py::class_<TrainableEncoder>(m, "TrainableEncoder")
        .def_static("from_corpus", &TrainableEncoder::from_corpus, py::arg("corpus"),
                    py::arg("dim") = 64, py::arg("seed") = 42)
        .def_property_readonly("dim", &TrainableEncoder::dim)
        .def_property_readonly("vocab_size", &TrainableEncoder::vocab_size)
        .def_property_readonly("version", &TrainableEncoder::version)
        .def("version_string", &TrainableEncoder::version_string)
        .def("encode",
             [](const TrainableEncoder& enc, const std::string& text, size_t max_tokens) {
                 return rows_of(enc.encode(text, "", max_tokens));
             },
             py::arg("text"), py::arg("max_tokens") = 0)
        .def("batch_loss", &TrainableEncoder::batch_loss, py::arg("batch"), py::arg("corpus"),
             py::arg("max_tokens") = 0)
        .def("train_step", &TrainableEncoder::train_step, py::arg("batch"), py::arg("corpus"),
             py::arg("lr"), py::arg("max_tokens") = 0, py::arg("proj_lr") = -1.0)
        .def("save", &TrainableEncoder::save)
        .def_static("load", &TrainableEncoder::load);

    py::class_<DenseIndex>(m, "DenseIndex")
        .def("__len__", &DenseIndex::size)
        .def_property_readonly("dim", &DenseIndex::dim)
        .def_property_readonly("encoder_version", &DenseIndex::encoder_version)
        .def("save", &DenseIndex::save)
        .def_static("load", &DenseIndex::load);

    m.def("build_dense_index", &build_dense_index, py::arg("corpus"), py::arg("encoder"),
          py::arg("max_tokens") = 0, py::arg("threads") = 0);

    m.def(
        "dense_topk",
        [](const DenseIndex& index, const TrainableEncoder& encoder, const std::string& query,
           size_t k, size_t max_tokens) {
            TokenEmbeddings qe = encoder.encode(query, "q", max_tokens);
            return ranked_to_pairs(dense_topk(index, qe, k));
        },
        py::arg("index"), py::arg("encoder"), py::arg("query"), py::arg("k") = 10,
        py::arg("max_tokens") = 0);

    py::class_<CotAnswer>(m, "CotAnswer")
        .def(py::init([](const std::string& doc_id, bool relevant, const std::string& answer_text,
                         double mean_logprob) {
                 CotAnswer a;
                 a.doc_id = doc_id;
                 a.verdict = relevant ? Verdict::relevant : Verdict::irrelevant;
                 a.answer_text = relevant ? answer_text : "";
                 a.mean_logprob = mean_logprob;
                 return a;
             }),
             py::arg("doc_id"), py::arg("relevant"), py::arg("answer_text") = "",
             py::arg("mean_logprob") = 0.0)
        .def_readonly("doc_id", &CotAnswer::doc_id)
        .def_readonly("summary", &CotAnswer::summary)
        .def_readonly("answer_text", &CotAnswer::answer_text)
        .def_readonly("mean_logprob", &CotAnswer::mean_logprob)
        .def_property_readonly("relevant",
                               [](const CotAnswer& a) { return a.verdict == Verdict::relevant; });

    m.def(
        "integrate_answers",
        [](const std::vector<CotAnswer>& answers) -> py::object {
            auto chosen = integrate_answers(answers);
            if (!chosen) return py::none();
            return py::cast(*chosen);
        },
        py::arg("answers"),
        "Pick the relevant answer with the highest mean token logprob, if any");

    m.def(
        "parse_cot_response",
        [](const std::string& text,
           const std::vector<std::pair<std::string, double>>& token_logprobs,
           const std::string& doc_id) {
            LlmResponse resp;
            resp.text = text;
            std::vector<TokenLogprob> lps;
            for (const auto& [tok, lp] : token_logprobs) lps.push_back({tok, lp});
            resp.token_logprobs = std::move(lps);
            return parse_cot_response(resp, doc_id);
        },
        py::arg("text"), py::arg("token_logprobs"), py::arg("doc_id") = "doc");

    m.def("cot_instruction", [] { return cot_instruction(); });
    m.def(
        "build_cot_prompt",
        [](const std::string& doc_text, const std::string& question) {
            return build_cot_prompt({"d", doc_text, 0, {}}, {"q", question, QueryType::unknown})
                .rendered;
        },
        py::arg("doc_text"), py::arg("question"));

    py::class_<MockLlmClient>(m, "MockLlmClient")
        .def(py::init<>())
        .def(
            "generate",
            [](MockLlmClient& client, const std::string& prompt, bool want_logprobs) {
                LlmResponse resp = client.generate({prompt, 256, 0.0, want_logprobs});
                py::dict out;
                out["text"] = resp.text;
                if (resp.token_logprobs) {
                    std::vector<std::pair<std::string, double>> lps;
                    for (const auto& tl : *resp.token_logprobs)
                        lps.emplace_back(tl.token, tl.logprob);
                    out["token_logprobs"] = lps;
                }
                return out;
            },
            py::arg("prompt"), py::arg("want_logprobs") = false);

    m.def("em_f1",
          [](const std::string& pred, const std::string& gold) {
              auto [em, f1] = em_f1(pred, gold);
              return py::make_tuple(em, f1);
          },
          py::arg("pred"), py::arg("gold"));

    m.def("bleu_rouge",
          [](const std::string& pred, const std::string& gold) {
              auto s = bleu_rouge(pred, gold);
              return py::make_tuple(s.bleu, s.rouge_l);
          },
          py::arg("pred"), py::arg("gold"));

    m.def(
        "retrieval_metrics",
        [](const std::map<std::string, std::vector<std::pair<std::string, double>>>& runs,
           const std::map<std::string, std::set<std::string>>& qrels, size_t cutoff) {
            std::map<std::string, RankedList> converted;
            for (const auto& [qid, list] : runs) {
                RankedList rl;
                for (const auto& [doc, score] : list) rl.push_back({doc, score});
                converted[qid] = std::move(rl);
            }
            auto m2 = retrieval_metrics(converted, qrels, cutoff);
            py::dict out;
            out["ndcg"] = m2.ndcg;
            out["map"] = m2.map;
            out["recall"] = m2.recall;
            out["mrr"] = m2.mrr;
            return out;
        },
        py::arg("runs"), py::arg("qrels"), py::arg("cutoff") = 10);
}

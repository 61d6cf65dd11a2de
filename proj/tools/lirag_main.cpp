// lirag: retrieval-generation pipeline driver.
//
// Every command reads its inputs from explicit paths or a prior command's
// run-directory artifact, never mutates inputs, and writes outputs plus a
// manifest into <run-root>/<config-hash>/.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lirag/curriculum.hpp"
#include "lirag/evalkit.hpp"
#include "lirag/generation.hpp"
#include "lirag/llm_client.hpp"
#include "lirag/qgen.hpp"
#include "lirag/synthdata.hpp"
#include "lirag/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace lirag;

namespace {

constexpr const char* kToolVersion = "lirag 0.1.0";

struct MissingArtifact : Error {
    MissingArtifact(const std::string& path, const std::string& producer)
        : Error("missing prerequisite artifact: " + path + " (produce it with `lirag " +
                producer + "`)"),
          path(path), producer(producer) {}
    std::string path;
    std::string producer;
};

struct Options {
    std::string config_file;
    std::string run_root = "runs";
    uint64_t seed = 42;
    size_t threads = 2;

    std::string corpus_path;
    size_t min_words = 50;
    std::string tokenizer = "default";

    double sparse_k1 = 0.9;
    double sparse_b = 0.4;

    size_t dense_dim = 64;
    size_t dense_max_tokens = 350;
    size_t dense_prefilter = 200;

    double train_lr = 2e-5;
    double train_proj_lr = -1.0;
    size_t train_k_neg = 7;
    size_t train_pool = 1000;
    size_t train_n_seed = 1000;
    size_t train_epochs = 1;
    size_t train_recall_cutoff = 10;

    size_t curriculum_iters = 3;
    size_t k_keep = 3;
    size_t k_pass = 3;
    size_t k_bad = 100;

    size_t gen_k = 5;
    size_t gen_max_rounds = 2;
    std::string irrelevance_marker = "irrelevant";
    std::string answer_delimiter = "Answer:";

    std::string client_kind = "mock";
    std::string client_endpoint = "http://localhost:8080";
    int client_timeout_ms = 30000;
    size_t client_max_in_flight = 4;

    size_t qgen_per_doc = 3;
    double qgen_temperature = 0.8;
    int qgen_max_tokens = 256;
    std::string qgen_template = "fact";

    void validate() const {
        if (sparse_k1 <= 0.0) throw Error("config: sparse-k1 must be positive");
        if (sparse_b < 0.0 || sparse_b > 1.0) throw Error("config: sparse-b must lie in [0,1]");
        if (dense_dim == 0) throw Error("config: dense-dim must be >= 1");
        if (train_lr <= 0.0) throw Error("config: train-lr must be positive");
        if (train_k_neg == 0) throw Error("config: train-k-neg must be >= 1");
        if (train_pool == 0) throw Error("config: train-pool must be >= 1");
        if (train_n_seed == 0) throw Error("config: train-n-seed must be >= 1");
        if (curriculum_iters == 0) throw Error("config: curriculum-iters must be >= 1");
        FilterPolicy{k_keep, k_pass, k_bad}.validate();
        if (gen_k == 0) throw Error("config: generation-k must be >= 1");
        if (gen_max_rounds == 0) throw Error("config: generation-max-rounds must be >= 1");
        if (qgen_per_doc == 0) throw Error("config: qgen-per-doc must be >= 1");
        tokenizer_by_name(tokenizer);
        if (client_kind != "mock" && client_kind != "http")
            throw Error("config: client-kind must be mock or http");
        InstructionTemplate::by_name(qgen_template);
    }

    // Canonical key=value listing; hashing it keys the run directory.
    std::map<std::string, std::string> canonical() const {
        std::map<std::string, std::string> kv;
        kv["seed"] = std::to_string(seed);
        kv["threads"] = std::to_string(threads);
        kv["corpus-path"] = corpus_path;
        kv["corpus-min-words"] = std::to_string(min_words);
        kv["corpus-tokenizer"] = tokenizer;
        kv["sparse-k1"] = format_double(sparse_k1);
        kv["sparse-b"] = format_double(sparse_b);
        kv["dense-dim"] = std::to_string(dense_dim);
        kv["dense-max-tokens"] = std::to_string(dense_max_tokens);
        kv["dense-prefilter"] = std::to_string(dense_prefilter);
        kv["train-lr"] = format_double(train_lr);
        kv["train-proj-lr"] = format_double(train_proj_lr);
        kv["train-k-neg"] = std::to_string(train_k_neg);
        kv["train-pool"] = std::to_string(train_pool);
        kv["train-n-seed"] = std::to_string(train_n_seed);
        kv["train-epochs"] = std::to_string(train_epochs);
        kv["train-recall-cutoff"] = std::to_string(train_recall_cutoff);
        kv["curriculum-iters"] = std::to_string(curriculum_iters);
        kv["curriculum-k-keep"] = std::to_string(k_keep);
        kv["curriculum-k-pass"] = std::to_string(k_pass);
        kv["curriculum-k-bad"] = std::to_string(k_bad);
        kv["generation-k"] = std::to_string(gen_k);
        kv["generation-max-rounds"] = std::to_string(gen_max_rounds);
        kv["generation-irrelevance-marker"] = irrelevance_marker;
        kv["generation-answer-delimiter"] = answer_delimiter;
        kv["client-kind"] = client_kind;
        kv["client-endpoint"] = client_endpoint;
        kv["client-timeout-ms"] = std::to_string(client_timeout_ms);
        kv["client-max-in-flight"] = std::to_string(client_max_in_flight);
        kv["qgen-per-doc"] = std::to_string(qgen_per_doc);
        kv["qgen-temperature"] = format_double(qgen_temperature);
        kv["qgen-max-tokens"] = std::to_string(qgen_max_tokens);
        kv["qgen-template"] = qgen_template;
        return kv;
    }

    std::string config_hash() const {
        std::string blob;
        for (const auto& [k, v] : canonical()) blob += k + "=" + v + "\n";
        return to_hex(fnv1a64(blob));
    }
};

struct RunContext {
    Options opts;
    fs::path run_dir;
    std::map<std::string, uint64_t> input_hashes;
    std::vector<std::string> outputs;

    explicit RunContext(const Options& options) : opts(options) {
        run_dir = fs::path(opts.run_root) / opts.config_hash();
        fs::create_directories(run_dir);
    }

    // Resolves an artifact: explicit path if given, else the run-dir default.
    // Missing prerequisites name the producing command. Manifest keys are
    // relative to the run directory so reruns under any root are
    // byte-identical.
    std::string input(const std::string& explicit_path, const std::string& default_name,
                      const std::string& producer) {
        fs::path p = explicit_path.empty() ? run_dir / default_name : fs::path(explicit_path);
        if (!fs::exists(p)) throw MissingArtifact(p.string(), producer);
        std::error_code ec;
        fs::path rel = fs::relative(p, run_dir, ec);
        std::string key = (!ec && !rel.empty() && rel.native().rfind("..", 0) != 0)
                              ? rel.string()
                              : p.filename().string();
        input_hashes[key] = hash_file(p.string());
        return p.string();
    }

    std::string output(const std::string& name) {
        outputs.push_back(name);
        return (run_dir / name).string();
    }

    void write_manifest(const std::string& command) {
        ordered_json j;
        j["command"] = command;
        j["tool_version"] = kToolVersion;
        j["config_hash"] = opts.config_hash();
        ordered_json cfg;
        for (const auto& [k, v] : opts.canonical()) cfg[k] = v;
        j["config"] = cfg;
        ordered_json inputs;
        for (const auto& [path, hash] : input_hashes) inputs[path] = to_hex(hash);
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        write_file((run_dir / ("manifest-" + command + ".json")).string(), j.dump(2) + "\n");
    }
};

Corpus load_corpus_artifact(RunContext& ctx, const std::string& explicit_path) {
    std::string path = ctx.input(explicit_path, "corpus.jsonl", "ingest");
    return Corpus::load(path, ctx.opts.tokenizer);
}

RetrieverFn make_retriever(RunContext& ctx, const std::string& mode,
                           std::vector<std::unique_ptr<InvertedIndex>>& sparse_holder,
                           std::vector<std::unique_ptr<DenseIndex>>& dense_holder,
                           std::vector<std::unique_ptr<TrainableEncoder>>& encoder_holder,
                           const std::string& sparse_path, const std::string& dense_path,
                           const std::string& encoder_path) {
    if (mode == "sparse") {
        auto idx = std::make_unique<InvertedIndex>(
            InvertedIndex::load(ctx.input(sparse_path, "sparse.idx", "index-sparse")));
        InvertedIndex* p = idx.get();
        sparse_holder.push_back(std::move(idx));
        return [p](const Query& q, size_t k) { return bm25_topk(*p, q, k); };
    }
    if (mode == "dense" || mode == "hybrid") {
        auto idx = std::make_unique<DenseIndex>(
            DenseIndex::load(ctx.input(dense_path, "dense.idx", "index-dense")));
        auto enc = std::make_unique<TrainableEncoder>(
            TrainableEncoder::load(ctx.input(encoder_path, "encoder.ckpt", "train-curriculum")));
        DenseIndex* ip = idx.get();
        TrainableEncoder* ep = enc.get();
        dense_holder.push_back(std::move(idx));
        encoder_holder.push_back(std::move(enc));
        size_t max_tokens = ctx.opts.dense_max_tokens;
        size_t threads = ctx.opts.threads;
        if (mode == "dense") {
            return [ip, ep, max_tokens, threads](const Query& q, size_t k) {
                TokenEmbeddings qe = ep->encode(q.text, q.id, max_tokens);
                return dense_topk(*ip, qe, k, std::nullopt, threads);
            };
        }
        auto sidx = std::make_unique<InvertedIndex>(
            InvertedIndex::load(ctx.input(sparse_path, "sparse.idx", "index-sparse")));
        InvertedIndex* sp = sidx.get();
        sparse_holder.push_back(std::move(sidx));
        size_t prefilter = ctx.opts.dense_prefilter;
        return [ip, ep, sp, max_tokens, threads, prefilter](const Query& q, size_t k) {
            RankedList sparse_top = bm25_topk(*sp, q, std::max(prefilter, k));
            if (sparse_top.empty()) return RankedList{};
            std::set<std::string> candidates;
            for (const auto& sd : sparse_top)
                if (ip->contains(sd.doc_id)) candidates.insert(sd.doc_id);
            if (candidates.empty()) return RankedList{};
            TokenEmbeddings qe = ep->encode(q.text, q.id, max_tokens);
            return dense_topk(*ip, qe, k, candidates, threads);
        };
    }
    throw Error("unknown retriever mode: " + mode + " (expected sparse, dense or hybrid)");
}

// ------------------------------------------------------------------ commands

int cmd_synth(RunContext& ctx, size_t docs, size_t group, size_t noise, size_t heldout) {
    SynthConfig cfg;
    cfg.n_docs = docs;
    cfg.group_size = group;
    cfg.n_noise = noise;
    cfg.n_heldout = heldout;
    cfg.seed = ctx.opts.seed;
    SynthWorld world = make_synth_world(cfg);

    world.corpus.save(ctx.output("synth_docs.jsonl"));
    save_qdpairs(ctx.output("pool.jsonl"), world.pool);
    save_qdpairs(ctx.output("heldout.jsonl"), world.heldout);
    std::vector<Query> queries;
    for (const auto& p : world.heldout) queries.push_back(p.query);
    save_queries(ctx.output("queries.jsonl"), queries);
    save_qa_pairs(ctx.output("qa.jsonl"), world.heldout_qa);
    save_qrels(ctx.output("qrels.txt"), world.heldout_qrels);

    ordered_json meta;
    meta["docs"] = world.corpus.size();
    meta["pool"] = world.pool.size();
    meta["noise"] = world.noise_ids.size();
    meta["heldout"] = world.heldout.size();
    write_file(ctx.output("synth_meta.json"), meta.dump(2) + "\n");

    ctx.write_manifest("synth");
    std::cout << "synth: " << world.corpus.size() << " docs, " << world.pool.size()
              << " pool pairs (" << world.noise_ids.size() << " noise), "
              << world.heldout.size() << " heldout\n";
    return 0;
}

int cmd_ingest(RunContext& ctx, const std::string& input) {
    std::string in_path = ctx.input(input, "", "synth (or provide --input)");
    auto result = ingest(in_path, ctx.opts.min_words, ctx.opts.tokenizer);
    result.corpus.save(ctx.output("corpus.jsonl"));

    ordered_json stats;
    stats["total"] = result.stats.total;
    stats["kept"] = result.stats.kept;
    stats["dropped"] = result.stats.dropped;
    stats["min_words"] = ctx.opts.min_words;
    write_file(ctx.output("ingest_stats.json"), stats.dump(2) + "\n");

    ctx.write_manifest("ingest");
    std::cout << "ingest: kept " << result.stats.kept << ", dropped " << result.stats.dropped
              << " of " << result.stats.total << "\n";
    return 0;
}

int cmd_index_sparse(RunContext& ctx, const std::string& corpus_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    InvertedIndex index = build_sparse(corpus, ctx.opts.sparse_k1, ctx.opts.sparse_b);
    index.save(ctx.output("sparse.idx"));
    ctx.write_manifest("index-sparse");
    std::cout << "index-sparse: " << index.doc_count() << " docs, " << index.postings().size()
              << " terms\n";
    return 0;
}

int cmd_index_dense(RunContext& ctx, const std::string& corpus_path,
                    const std::string& encoder_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    TrainableEncoder encoder =
        TrainableEncoder::load(ctx.input(encoder_path, "encoder.ckpt", "train-curriculum"));
    DenseIndex index =
        build_dense_index(corpus, encoder, ctx.opts.dense_max_tokens, ctx.opts.threads);
    index.save(ctx.output("dense.idx"));
    ctx.write_manifest("index-dense");
    std::cout << "index-dense: " << index.size() << " docs, dim " << index.dim() << ", encoder "
              << index.encoder_version() << "\n";
    return 0;
}

int cmd_gen_questions(RunContext& ctx, const std::string& corpus_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    auto client = make_client(ctx.opts.client_kind, ctx.opts.client_endpoint,
                              ctx.opts.client_timeout_ms);
    auto tmpl = InstructionTemplate::by_name(ctx.opts.qgen_template);
    auto result = generate_questions(*client, corpus, tmpl, ctx.opts.qgen_per_doc,
                                     ctx.opts.client_max_in_flight, ctx.opts.qgen_max_tokens,
                                     ctx.opts.qgen_temperature);
    save_qdpairs(ctx.output("pairs.jsonl"), result.pairs);

    ordered_json issues = ordered_json::array();
    for (const auto& issue : result.issues)
        issues.push_back({{"doc_id", issue.doc_id}, {"reason", issue.reason}});
    write_file(ctx.output("gen_issues.json"), issues.dump(2) + "\n");

    ctx.write_manifest("gen-questions");
    std::cout << "gen-questions: " << result.pairs.size() << " pairs, " << result.issues.size()
              << " issues\n";
    return 0;
}

int cmd_filter(RunContext& ctx, const std::string& corpus_path, const std::string& pairs_path,
               const std::string& sparse_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    InvertedIndex index =
        InvertedIndex::load(ctx.input(sparse_path, "sparse.idx", "index-sparse"));
    auto pairs =
        load_qdpairs(ctx.input(pairs_path, "pairs.jsonl", "gen-questions"), corpus);

    RetrieverFn bm25 = [&index](const Query& q, size_t k) { return bm25_topk(index, q, k); };
    auto result = consistency_filter(bm25, pairs, ctx.opts.k_keep);
    save_qdpairs(ctx.output("kept.jsonl"), result.kept);

    std::ofstream rejected(ctx.output("rejected.jsonl"), std::ios::binary);
    for (const auto& r : result.rejected) {
        ordered_json j;
        j["query_id"] = r.pair.query.id;
        j["doc_id"] = r.pair.doc_id;
        j["reason"] = r.reason;
        rejected << j.dump() << "\n";
    }

    ctx.write_manifest("filter");
    std::cout << "filter: kept " << result.kept.size() << ", rejected " << result.rejected.size()
              << "\n";
    return 0;
}

int cmd_train_curriculum(RunContext& ctx, const std::string& corpus_path,
                         const std::string& pairs_path, const std::string& sparse_path,
                         const std::string& heldout_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    InvertedIndex sparse =
        InvertedIndex::load(ctx.input(sparse_path, "sparse.idx", "index-sparse"));
    auto pool = load_qdpairs(ctx.input(pairs_path, "pool.jsonl", "gen-questions"), corpus);

    TrainConfig cfg;
    cfg.dim = ctx.opts.dense_dim;
    cfg.lr = ctx.opts.train_lr;
    cfg.proj_lr = ctx.opts.train_proj_lr;
    cfg.k_neg = ctx.opts.train_k_neg;
    cfg.pool = ctx.opts.train_pool;
    cfg.n_seed = ctx.opts.train_n_seed;
    cfg.epochs = ctx.opts.train_epochs;
    cfg.seed = ctx.opts.seed;
    cfg.max_tokens = ctx.opts.dense_max_tokens;
    cfg.recall_cutoff = ctx.opts.train_recall_cutoff;
    cfg.threads = ctx.opts.threads;
    if (!heldout_path.empty())
        cfg.heldout = load_qdpairs(ctx.input(heldout_path, "", "synth"), corpus);

    FilterPolicy policy{ctx.opts.k_keep, ctx.opts.k_pass, ctx.opts.k_bad};
    CurriculumState state =
        run_curriculum(corpus, sparse, pool, policy, ctx.opts.curriculum_iters, cfg);

    state.encoder.save(ctx.output("encoder.ckpt"));
    write_history_csv(ctx.output("history.csv"), state.history);
    save_qdpairs(ctx.output("trainset.jsonl"), state.train_set);

    ordered_json j;
    j["iterations"] = state.iteration;
    j["status"] = state.status;
    j["trainset_size"] = state.train_set.size();
    j["encoder_version"] = state.encoder.version_string();
    write_file(ctx.output("curriculum.json"), j.dump(2) + "\n");

    ctx.write_manifest("train-curriculum");
    std::cout << "train-curriculum: " << state.status << " after iteration " << state.iteration
              << ", train set " << state.train_set.size() << ", encoder "
              << state.encoder.version_string() << "\n";
    return 0;
}

int cmd_retrieve(RunContext& ctx, const std::string& queries_path, const std::string& mode,
                 size_t k, const std::string& sparse_path, const std::string& dense_path,
                 const std::string& encoder_path, const std::string& run_tag) {
    auto queries = load_queries(ctx.input(queries_path, "queries.jsonl", "synth"));
    std::vector<std::unique_ptr<InvertedIndex>> sh;
    std::vector<std::unique_ptr<DenseIndex>> dh;
    std::vector<std::unique_ptr<TrainableEncoder>> eh;
    RetrieverFn retriever =
        make_retriever(ctx, mode, sh, dh, eh, sparse_path, dense_path, encoder_path);

    std::map<std::string, RankedList> runs;
    for (const auto& q : queries) runs[q.id] = retriever(q, k);
    write_trec_run(ctx.output("run.trec"), runs, run_tag);

    ctx.write_manifest("retrieve");
    std::cout << "retrieve: " << runs.size() << " queries, mode " << mode << ", k " << k << "\n";
    return 0;
}

int cmd_answer(RunContext& ctx, const std::string& corpus_path, const std::string& queries_path,
               const std::string& mode, const std::string& sparse_path,
               const std::string& dense_path, const std::string& encoder_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    auto queries = load_queries(ctx.input(queries_path, "queries.jsonl", "synth"));
    std::vector<std::unique_ptr<InvertedIndex>> sh;
    std::vector<std::unique_ptr<DenseIndex>> dh;
    std::vector<std::unique_ptr<TrainableEncoder>> eh;
    RetrieverFn retriever =
        make_retriever(ctx, mode, sh, dh, eh, sparse_path, dense_path, encoder_path);
    auto client = make_client(ctx.opts.client_kind, ctx.opts.client_endpoint,
                              ctx.opts.client_timeout_ms);

    GenParams params{ctx.opts.irrelevance_marker, ctx.opts.answer_delimiter};
    std::ofstream answers(ctx.output("answers.jsonl"), std::ios::binary);
    std::ofstream traces(ctx.output("traces.jsonl"), std::ios::binary);
    size_t answered = 0;
    for (const auto& q : queries) {
        IntegrationResult result =
            answer_question(q, retriever, corpus, *client, ctx.opts.gen_k,
                            ctx.opts.gen_max_rounds, params, ctx.opts.client_max_in_flight);
        ordered_json j;
        j["query_id"] = q.id;
        j["query_text"] = q.text;
        if (result.final) {
            j["answer"] = result.final->answer_text;
            j["doc_id"] = result.final->doc_id;
            j["mean_logprob"] = result.final->mean_logprob;
            j["probability"] = std::exp(result.final->mean_logprob);
            ++answered;
        } else {
            j["answer"] = nullptr;
        }
        j["rounds"] = result.retrieval_rounds_used;
        j["candidates_examined"] = result.candidates_examined;
        answers << j.dump() << "\n";
        traces << answer_trace_json(q, result) << "\n";
    }

    ctx.write_manifest("answer");
    std::cout << "answer: " << answered << "/" << queries.size() << " answered\n";
    return 0;
}

int cmd_eval(RunContext& ctx, const std::string& run_path, const std::string& qrels_path,
             size_t cutoff) {
    auto runs = load_trec_run(ctx.input(run_path, "run.trec", "retrieve"));
    Qrels qrels = load_qrels(ctx.input(qrels_path, "qrels.txt", "synth"));

    std::set<std::string> run_docs;
    for (const auto& [_, list] : runs)
        for (const auto& sd : list) run_docs.insert(sd.doc_id);
    size_t unknown = 0;
    for (const auto& [_, docs] : qrels)
        for (const auto& doc : docs) unknown += run_docs.count(doc) == 0 ? 1 : 0;
    if (unknown > 0)
        std::cerr << "warning: " << unknown
                  << " qrels doc ids never appear in the run file\n";

    auto per_query = retrieval_metrics_per_query(runs, qrels, cutoff);
    auto macro = retrieval_metrics(runs, qrels, cutoff);
    write_file(ctx.output("metrics.json"), metrics_json(macro, cutoff, per_query.size()) + "\n");
    write_per_query_csv(ctx.output("per_query.csv"), per_query);
    ctx.write_manifest("eval");
    std::cout << "eval: ndcg@" << cutoff << " " << macro.ndcg << ", recall@" << cutoff << " "
              << macro.recall << " over " << per_query.size() << " queries\n";
    return 0;
}

int cmd_export_qgen(RunContext& ctx, const std::string& corpus_path,
                    const std::string& pairs_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    auto pairs = load_qdpairs(ctx.input(pairs_path, "annotated.jsonl", "synth"), corpus);
    auto tmpl = InstructionTemplate::by_name(ctx.opts.qgen_template);
    size_t count = export_qgen_finetune(pairs, corpus, tmpl, ctx.output("qgen_finetune.jsonl"));
    ctx.write_manifest("export-finetune-qgen");
    std::cout << "export-finetune-qgen: " << count << " records\n";
    return 0;
}

int cmd_export_gen(RunContext& ctx, const std::string& corpus_path, const std::string& qa_path,
                   const std::string& mode, const std::string& sparse_path,
                   const std::string& dense_path, const std::string& encoder_path) {
    Corpus corpus = load_corpus_artifact(ctx, corpus_path);
    auto qa = load_qa_pairs(ctx.input(qa_path, "qa.jsonl", "synth"));
    std::vector<std::unique_ptr<InvertedIndex>> sh;
    std::vector<std::unique_ptr<DenseIndex>> dh;
    std::vector<std::unique_ptr<TrainableEncoder>> eh;
    RetrieverFn retriever =
        make_retriever(ctx, mode, sh, dh, eh, sparse_path, dense_path, encoder_path);

    auto log = export_generation_finetune(qa, retriever, corpus, ctx.opts.gen_k,
                                          ctx.output("gen_finetune.jsonl"));
    if (!log.skipped.empty()) {
        ordered_json j = ordered_json::array();
        for (const auto& s : log.skipped) j.push_back(s);
        write_file(ctx.output("gen_finetune_skipped.json"), j.dump(2) + "\n");
    }
    ctx.write_manifest("export-finetune-gen");
    std::cout << "export-finetune-gen: " << log.records << " records, " << log.skipped.size()
              << " skipped\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"late-interaction retrieval and generation pipeline"};
    app.require_subcommand(1);
    Options opts;

    app.set_config("--config", "", "TOML config file; sections map to dotted keys");
    app.allow_config_extras(false);

    app.add_option("--run-root", opts.run_root, "root directory for run outputs")
        ->capture_default_str();
    app.add_option("--seed", opts.seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", opts.threads, "worker threads (0 = single-threaded)")
        ->capture_default_str();

    app.add_option("--corpus-path", opts.corpus_path, "default corpus artifact path")
        ->capture_default_str();
    app.add_option("--corpus-min-words", opts.min_words, "ingest token-count floor")
        ->capture_default_str();
    app.add_option("--corpus-tokenizer", opts.tokenizer, "tokenizer name (default|whitespace)")
        ->capture_default_str();

    app.add_option("--sparse-k1", opts.sparse_k1, "BM25 k1")->capture_default_str();
    app.add_option("--sparse-b", opts.sparse_b, "BM25 b")->capture_default_str();

    app.add_option("--dense-dim", opts.dense_dim, "encoder embedding dimension")
        ->capture_default_str();
    app.add_option("--dense-max-tokens", opts.dense_max_tokens,
                   "encode-time token truncation (stored text is never cut)")
        ->capture_default_str();
    app.add_option("--dense-prefilter", opts.dense_prefilter,
                   "BM25 candidate pool for hybrid retrieval")
        ->capture_default_str();

    app.add_option("--train-lr", opts.train_lr, "Adam learning rate")->capture_default_str();
    app.add_option("--train-proj-lr", opts.train_proj_lr,
                   "projection learning rate (< 0: same as train.lr)")
        ->capture_default_str();
    app.add_option("--train-k-neg", opts.train_k_neg, "negatives per training pair")
        ->capture_default_str();
    app.add_option("--train-pool", opts.train_pool, "BM25 pool for negative mining")
        ->capture_default_str();
    app.add_option("--train-n-seed", opts.train_n_seed, "seed pairs for warm-up")
        ->capture_default_str();
    app.add_option("--train-epochs", opts.train_epochs, "training passes per iteration")
        ->capture_default_str();
    app.add_option("--train-recall-cutoff", opts.train_recall_cutoff,
                   "held-out recall cutoff logged per iteration")
        ->capture_default_str();

    app.add_option("--curriculum-iters", opts.curriculum_iters, "curriculum iterations T")
        ->capture_default_str();
    app.add_option("--curriculum-k-keep", opts.k_keep, "consistency-filter top-k")
        ->capture_default_str();
    app.add_option("--curriculum-k-pass", opts.k_pass, "already-learned rank bound")
        ->capture_default_str();
    app.add_option("--curriculum-k-bad", opts.k_bad, "noise-exclusion rank bound")
        ->capture_default_str();

    app.add_option("--generation-k", opts.gen_k, "documents per retrieval round")
        ->capture_default_str();
    app.add_option("--generation-max-rounds", opts.gen_max_rounds, "retrieval round budget")
        ->capture_default_str();
    app.add_option("--generation-irrelevance-marker", opts.irrelevance_marker,
                   "prefix marking an irrelevant answer")
        ->capture_default_str();
    app.add_option("--generation-answer-delimiter", opts.answer_delimiter,
                   "answer segment delimiter")
        ->capture_default_str();

    app.add_option("--client-kind", opts.client_kind, "llm client backend (mock|http)")
        ->capture_default_str();
    app.add_option("--client-endpoint", opts.client_endpoint, "http client endpoint")
        ->envname("LIRAG_CLIENT_ENDPOINT")
        ->capture_default_str();
    app.add_option("--client-timeout-ms", opts.client_timeout_ms, "http client timeout")
        ->capture_default_str();
    app.add_option("--client-max-in-flight", opts.client_max_in_flight,
                   "bounded client concurrency")
        ->capture_default_str();

    app.add_option("--qgen-per-doc", opts.qgen_per_doc, "questions kept per document")
        ->capture_default_str();
    app.add_option("--qgen-temperature", opts.qgen_temperature, "question sampling temperature")
        ->capture_default_str();
    app.add_option("--qgen-max-tokens", opts.qgen_max_tokens, "client max tokens for questions")
        ->capture_default_str();
    app.add_option("--qgen-template", opts.qgen_template,
                   "instruction template (fact|solution)")
        ->capture_default_str();

    // Subcommands. Artifact path options default to the run directory.
    auto* synth = app.add_subcommand("synth", "materialize the bundled synthetic corpus");
    size_t synth_docs = 2000, synth_group = 40, synth_noise = 500, synth_heldout = 200;
    synth->add_option("--docs", synth_docs, "documents")->capture_default_str();
    synth->add_option("--group-size", synth_group, "anchor hosting degree")
        ->capture_default_str();
    synth->add_option("--noise", synth_noise, "injected noise queries")->capture_default_str();
    synth->add_option("--heldout", synth_heldout, "held-out questions")->capture_default_str();

    auto* ingest_cmd = app.add_subcommand("ingest", "filter and persist a document collection");
    std::string ingest_input;
    ingest_cmd->add_option("--input", ingest_input, "line-delimited JSON documents")->required();

    std::string corpus_path, pairs_path, sparse_path, dense_path, encoder_path, heldout_path;
    std::string queries_path, run_path, qrels_path, qa_path, mode = "sparse", run_tag = "lirag";
    size_t retrieve_k = 10, eval_cutoff = 10;

    auto* isparse = app.add_subcommand("index-sparse", "build the BM25 inverted index");
    isparse->add_option("--corpus", corpus_path, "corpus artifact");

    auto* idense = app.add_subcommand("index-dense", "encode the corpus into a dense index");
    idense->add_option("--corpus", corpus_path, "corpus artifact");
    idense->add_option("--encoder", encoder_path, "encoder checkpoint");

    auto* genq = app.add_subcommand("gen-questions", "generate pseudo question-document pairs");
    genq->add_option("--corpus", corpus_path, "corpus artifact");

    auto* filter = app.add_subcommand("filter", "BM25 consistency filtering of pairs");
    filter->add_option("--corpus", corpus_path, "corpus artifact");
    filter->add_option("--pairs", pairs_path, "pair file");
    filter->add_option("--sparse", sparse_path, "sparse index");

    auto* train = app.add_subcommand("train-curriculum",
                                     "teacher-student curriculum training of the encoder");
    train->add_option("--corpus", corpus_path, "corpus artifact");
    train->add_option("--pairs", pairs_path, "generated pair pool");
    train->add_option("--sparse", sparse_path, "sparse index");
    train->add_option("--heldout", heldout_path, "held-out pairs for recall logging");

    auto* retrieve = app.add_subcommand("retrieve", "run retrieval and export a TREC run file");
    retrieve->add_option("--queries", queries_path, "query file");
    retrieve->add_option("--mode", mode, "sparse|dense|hybrid")->capture_default_str();
    retrieve->add_option("--k", retrieve_k, "results per query")->capture_default_str();
    retrieve->add_option("--sparse", sparse_path, "sparse index");
    retrieve->add_option("--dense", dense_path, "dense index");
    retrieve->add_option("--encoder", encoder_path, "encoder checkpoint");
    retrieve->add_option("--run-tag", run_tag, "TREC run tag")->capture_default_str();

    auto* answer = app.add_subcommand("answer", "answer questions over retrieved documents");
    answer->add_option("--corpus", corpus_path, "corpus artifact");
    answer->add_option("--queries", queries_path, "query file");
    answer->add_option("--mode", mode, "sparse|dense|hybrid")->capture_default_str();
    answer->add_option("--sparse", sparse_path, "sparse index");
    answer->add_option("--dense", dense_path, "dense index");
    answer->add_option("--encoder", encoder_path, "encoder checkpoint");

    auto* eval = app.add_subcommand("eval", "score a run file against qrels");
    eval->add_option("--run", run_path, "TREC run file");
    eval->add_option("--qrels", qrels_path, "qrels file");
    eval->add_option("--cutoff", eval_cutoff, "metric cutoff")->capture_default_str();

    auto* exq = app.add_subcommand("export-finetune-qgen",
                                   "export the question-generation tuning dataset");
    exq->add_option("--corpus", corpus_path, "corpus artifact");
    exq->add_option("--pairs", pairs_path, "annotated pair file");

    auto* exg = app.add_subcommand("export-finetune-gen",
                                   "export the answer-generation tuning dataset");
    exg->add_option("--corpus", corpus_path, "corpus artifact");
    exg->add_option("--qa", qa_path, "annotated question-answer file");
    exg->add_option("--mode", mode, "sparse|dense|hybrid")->capture_default_str();
    exg->add_option("--sparse", sparse_path, "sparse index");
    exg->add_option("--dense", dense_path, "dense index");
    exg->add_option("--encoder", encoder_path, "encoder checkpoint");

    CLI11_PARSE(app, argc, argv);

    try {
        opts.validate();
        RunContext ctx(opts);
        if (synth->parsed())
            return cmd_synth(ctx, synth_docs, synth_group, synth_noise, synth_heldout);
        if (ingest_cmd->parsed()) return cmd_ingest(ctx, ingest_input);
        if (isparse->parsed()) return cmd_index_sparse(ctx, corpus_path);
        if (idense->parsed()) return cmd_index_dense(ctx, corpus_path, encoder_path);
        if (genq->parsed()) return cmd_gen_questions(ctx, corpus_path);
        if (filter->parsed()) return cmd_filter(ctx, corpus_path, pairs_path, sparse_path);
        if (train->parsed())
            return cmd_train_curriculum(ctx, corpus_path, pairs_path, sparse_path, heldout_path);
        if (retrieve->parsed())
            return cmd_retrieve(ctx, queries_path, mode, retrieve_k, sparse_path, dense_path,
                                encoder_path, run_tag);
        if (answer->parsed())
            return cmd_answer(ctx, corpus_path, queries_path, mode, sparse_path, dense_path,
                              encoder_path);
        if (eval->parsed()) return cmd_eval(ctx, run_path, qrels_path, eval_cutoff);
        if (exq->parsed()) return cmd_export_qgen(ctx, corpus_path, pairs_path);
        if (exg->parsed())
            return cmd_export_gen(ctx, corpus_path, qa_path, mode, sparse_path, dense_path,
                                  encoder_path);
        throw Error("no command selected");
    } catch (const MissingArtifact& e) {
        ordered_json j;
        j["error"] = {{"message", e.what()}, {"missing", e.path}, {"produced_by", e.producer}};
        std::cerr << j.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        ordered_json j;
        j["error"] = {{"message", e.what()}};
        std::cerr << j.dump() << "\n";
        return 1;
    }
}

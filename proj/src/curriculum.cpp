#include "lirag/curriculum.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "lirag/util.hpp"

namespace lirag {

void FilterPolicy::validate() const {
    if (k_pass < 1 || k_pass > k_keep || k_keep > k_bad)
        throw Error("filter policy requires 1 <= k_pass <= k_keep <= k_bad");
}

FilterResult consistency_filter(const RetrieverFn& retriever, const std::vector<QDPair>& pairs,
                                size_t k_keep) {
    if (k_keep < 1) throw Error("consistency_filter: k_keep must be >= 1");
    FilterResult result;
    for (const auto& pair : pairs) {
        RankedList top;
        try {
            top = retriever(pair.query, k_keep);
        } catch (const std::exception& e) {
            result.rejected.push_back({pair, std::string("retriever failure: ") + e.what()});
            continue;
        }
        bool found = false;
        for (const auto& sd : top) {
            if (sd.doc_id == pair.doc_id) {
                found = true;
                break;
            }
        }
        if (found) {
            result.kept.push_back(pair);
        } else {
            result.rejected.push_back({pair, "source doc not in top-" + std::to_string(k_keep)});
        }
    }
    return result;
}

std::vector<QDPair> select_seed(const InvertedIndex& sparse, const std::vector<QDPair>& pairs,
                                size_t n_seed, size_t k_keep) {
    if (n_seed < 1) throw Error("select_seed: n_seed must be >= 1");

    struct Survivor {
        QDPair pair;
        size_t rank;
    };
    std::vector<Survivor> survivors;
    for (const auto& pair : pairs) {
        RankedList top = bm25_topk(sparse, pair.query, k_keep);
        for (size_t r = 0; r < top.size(); ++r) {
            if (top[r].doc_id == pair.doc_id) {
                survivors.push_back({pair, r + 1});
                break;
            }
        }
    }
    if (survivors.empty()) throw Error("select_seed: no pairs survive consistency filtering");

    std::stable_sort(survivors.begin(), survivors.end(), [](const Survivor& a, const Survivor& b) {
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.pair.doc_id < b.pair.doc_id;
    });

    std::vector<QDPair> seed;
    seed.reserve(std::min(n_seed, survivors.size()));
    for (const auto& s : survivors) {
        if (seed.size() == n_seed) break;
        QDPair p = s.pair;
        p.provenance = Provenance::seed;
        seed.push_back(std::move(p));
    }
    return seed;
}

SelectionResult select_next(const DenseIndex& index, const TrainableEncoder& encoder,
                            const std::vector<QDPair>& pairs, const FilterPolicy& policy,
                            const std::set<std::string>& already, size_t max_tokens,
                            size_t threads, const InvertedIndex* sparse,
                            size_t full_rank_limit) {
    policy.validate();
    const bool approximate = index.size() > full_rank_limit;
    if (approximate && sparse == nullptr)
        throw Error("select_next: corpus above the full-rank limit needs a sparse index");

    std::vector<const QDPair*> candidates;
    for (const auto& pair : pairs)
        if (!already.count(pair.query.id)) candidates.push_back(&pair);

    std::vector<size_t> ranks(candidates.size(), 0);
    size_t n_threads = threads == 0 ? 1 : threads;
    auto compute = [&](size_t i) {
        const QDPair& pair = *candidates[i];
        TokenEmbeddings q = encoder.encode(pair.query.text, pair.query.id, max_tokens);
        if (!approximate) {
            ranks[i] = dense_rank_of(index, q, pair.doc_id);
            return;
        }
        // Rank within BM25 top-1000 plus the source document.
        RankedList top = bm25_topk(*sparse, pair.query, 1000);
        double own = maxsim_score(q, index.entries().at(pair.doc_id));
        size_t before = 0;
        for (const auto& sd : top) {
            if (sd.doc_id == pair.doc_id) continue;
            auto it = index.entries().find(sd.doc_id);
            if (it == index.entries().end()) continue;
            double s = maxsim_score(q, it->second);
            if (s > own || (s == own && sd.doc_id < pair.doc_id)) ++before;
        }
        ranks[i] = before + 1;
    };
    if (n_threads <= 1 || candidates.size() < 8) {
        for (size_t i = 0; i < candidates.size(); ++i) compute(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= candidates.size()) break;
                    compute(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    SelectionResult result;
    for (size_t i = 0; i < candidates.size(); ++i) {
        size_t r = ranks[i];
        if (r <= policy.k_pass) {
            result.already_learned.push_back(*candidates[i]);
        } else if (r <= policy.k_bad) {
            result.selected.push_back(*candidates[i]);
        } else {
            result.excluded.push_back({*candidates[i], r});
        }
    }
    return result;
}

double heldout_recall(const Corpus& corpus, const TrainableEncoder& encoder,
                      const std::vector<QDPair>& heldout, size_t cutoff, size_t max_tokens,
                      size_t threads) {
    if (heldout.empty()) return std::nan("");
    DenseIndex index = build_dense_index(corpus, encoder, max_tokens, threads);

    std::vector<int> hits(heldout.size(), 0);
    size_t n_threads = threads == 0 ? 1 : threads;
    auto compute = [&](size_t i) {
        TokenEmbeddings q = encoder.encode(heldout[i].query.text, heldout[i].query.id, max_tokens);
        RankedList top = dense_topk(index, q, cutoff);
        for (const auto& sd : top) {
            if (sd.doc_id == heldout[i].doc_id) {
                hits[i] = 1;
                break;
            }
        }
    };
    if (n_threads <= 1 || heldout.size() < 8) {
        for (size_t i = 0; i < heldout.size(); ++i) compute(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= heldout.size()) break;
                    compute(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    size_t total = 0;
    for (int h : hits) total += static_cast<size_t>(h);
    return static_cast<double>(total) / static_cast<double>(heldout.size());
}

namespace {

// One pass over the train set in a seeded shuffle; returns mean pre-step loss.
double train_pass(TrainableEncoder& encoder, const Corpus& corpus, const InvertedIndex& sparse,
                  const std::vector<QDPair>& train_set, const TrainConfig& cfg,
                  uint64_t stream_seed, size_t* steps_out) {
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(stream_seed);
    for (size_t i = order.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }

    double total_loss = 0.0;
    size_t steps = 0;
    for (size_t idx : order) {
        const QDPair& pair = train_set[idx];
        TrainBatch batch;
        try {
            batch = mine_negatives(sparse, pair, cfg.k_neg, cfg.pool,
                                   mix64(stream_seed, fnv1a64(pair.query.id)));
        } catch (const Error&) {
            continue;  // no usable negatives for this pair
        }
        total_loss += encoder.train_step(batch, corpus, cfg.lr, cfg.max_tokens, cfg.proj_lr);
        ++steps;
    }
    if (steps_out) *steps_out = steps;
    return steps == 0 ? 0.0 : total_loss / static_cast<double>(steps);
}

double train_iteration(TrainableEncoder& encoder, const Corpus& corpus,
                       const InvertedIndex& sparse, const std::vector<QDPair>& train_set,
                       const TrainConfig& cfg, size_t iteration) {
    double mean = 0.0;
    size_t total_steps = 0;
    for (size_t epoch = 0; epoch < std::max<size_t>(cfg.epochs, 1); ++epoch) {
        size_t steps = 0;
        double m = train_pass(encoder, corpus, sparse, train_set, cfg,
                              mix64(mix64(cfg.seed, iteration), epoch), &steps);
        mean += m * static_cast<double>(steps);
        total_steps += steps;
    }
    return total_steps == 0 ? 0.0 : mean / static_cast<double>(total_steps);
}

}  // namespace

TrainableEncoder train_plain(const Corpus& corpus, const InvertedIndex& sparse,
                             const std::vector<QDPair>& train_pairs,
                             const std::vector<QDPair>& vocab_pairs, const TrainConfig& cfg) {
    std::vector<std::string> vocab;
    auto add_tokens = [&](const std::string& text) {
        TokenSeq toks = corpus.tokenizer()(text);
        vocab.insert(vocab.end(), toks.tokens.begin(), toks.tokens.end());
    };
    for (const auto& doc : corpus.docs()) add_tokens(doc.text);
    for (const auto& pair : vocab_pairs) add_tokens(pair.query.text);
    for (const auto& pair : cfg.heldout) add_tokens(pair.query.text);

    TrainableEncoder encoder(std::move(vocab), cfg.dim, cfg.seed, corpus.tokenizer_name());
    train_iteration(encoder, corpus, sparse, train_pairs, cfg, 1);
    return encoder;
}

CurriculumState run_curriculum(const Corpus& corpus, const InvertedIndex& sparse,
                               const std::vector<QDPair>& pool, const FilterPolicy& policy,
                               size_t iterations, const TrainConfig& cfg) {
    if (iterations < 1) throw Error("run_curriculum: iterations must be >= 1");
    policy.validate();

    // Vocabulary spans the documents plus every query the run can see.
    std::vector<std::string> vocab;
    auto add_tokens = [&](const std::string& text) {
        TokenSeq toks = corpus.tokenizer()(text);
        vocab.insert(vocab.end(), toks.tokens.begin(), toks.tokens.end());
    };
    for (const auto& doc : corpus.docs()) add_tokens(doc.text);
    for (const auto& pair : pool) add_tokens(pair.query.text);
    for (const auto& pair : cfg.heldout) add_tokens(pair.query.text);

    CurriculumState state{0,
                          {},
                          TrainableEncoder(std::move(vocab), cfg.dim, cfg.seed,
                                           corpus.tokenizer_name()),
                          {},
                          "running"};

    // Warm-up: BM25-selected seed, then the first training phase.
    std::vector<QDPair> seed = select_seed(sparse, pool, cfg.n_seed, policy.k_keep);
    std::unordered_set<std::string> seen;
    std::set<std::string> seen_ordered;
    for (auto& p : seed) {
        state.train_set.push_back(p);
        seen.insert(p.query.id);
        seen_ordered.insert(p.query.id);
    }

    double loss_mean = train_iteration(state.encoder, corpus, sparse, state.train_set, cfg, 1);
    state.iteration = 1;
    {
        IterationStats row;
        row.iteration = 1;
        row.pool_size = pool.size();
        row.added = state.train_set.size();
        row.excluded = pool.size() - state.train_set.size();
        row.trainset_size = state.train_set.size();
        row.heldout_recall =
            heldout_recall(corpus, state.encoder, cfg.heldout, cfg.recall_cutoff, cfg.max_tokens,
                           cfg.threads);
        row.loss_mean = loss_mean;
        row.status = "warmup";
        state.history.push_back(std::move(row));
    }

    for (size_t t = 2; t <= iterations; ++t) {
        DenseIndex index = build_dense_index(corpus, state.encoder, cfg.max_tokens, cfg.threads);
        SelectionResult sel =
            select_next(index, state.encoder, pool, policy, seen_ordered, cfg.max_tokens,
                        cfg.threads, &sparse);

        IterationStats row;
        row.iteration = t;
        row.pool_size = pool.size() - state.train_set.size();
        row.added = sel.selected.size();
        row.excluded = sel.excluded.size();

        if (sel.selected.empty()) {
            row.trainset_size = state.train_set.size();
            row.heldout_recall = heldout_recall(corpus, state.encoder, cfg.heldout,
                                                cfg.recall_cutoff, cfg.max_tokens, cfg.threads);
            row.loss_mean = 0.0;
            row.status = "terminated: empty selection";
            state.history.push_back(std::move(row));
            state.iteration = t;
            state.status = "terminated_early";
            return state;
        }

        for (auto& p : sel.selected) {
            if (seen.insert(p.query.id).second) {
                seen_ordered.insert(p.query.id);
                state.train_set.push_back(p);
            }
        }

        row.trainset_size = state.train_set.size();
        row.loss_mean = train_iteration(state.encoder, corpus, sparse, state.train_set, cfg, t);
        row.heldout_recall = heldout_recall(corpus, state.encoder, cfg.heldout, cfg.recall_cutoff,
                                            cfg.max_tokens, cfg.threads);
        row.status = "trained";
        state.history.push_back(std::move(row));
        state.iteration = t;
    }
    state.status = "completed";
    return state;
}

void write_history_csv(const std::string& path, const std::vector<IterationStats>& history) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write history csv: " + path);
    out << "iteration,pool_size,added,excluded,trainset_size,heldout_recall@10,loss_mean,status\n";
    for (const auto& row : history) {
        out << row.iteration << "," << row.pool_size << "," << row.added << "," << row.excluded
            << "," << row.trainset_size << "," << format_double(row.heldout_recall) << ","
            << format_double(row.loss_mean) << "," << row.status << "\n";
    }
}

}  // namespace lirag

#include "lirag/encoder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lirag/util.hpp"

namespace lirag {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sqnorm(const double* v, size_t dim) {
    double s = 0.0;
    for (size_t i = 0; i < dim; ++i) s += v[i] * v[i];
    return s;
}

void check_batch(const TrainBatch& batch) {
    for (size_t i = 0; i < batch.negatives.size(); ++i) {
        if (batch.negatives[i] == batch.positive)
            throw Error("train batch: positive appears among negatives");
        for (size_t j = i + 1; j < batch.negatives.size(); ++j)
            if (batch.negatives[i] == batch.negatives[j])
                throw Error("train batch: duplicate negative " + batch.negatives[i]);
    }
}

}  // namespace

double infonce_loss(double s_pos, const std::vector<double>& s_negs) {
    if (!std::isfinite(s_pos)) throw Error("infonce_loss: non-finite positive score");
    for (double s : s_negs)
        if (!std::isfinite(s)) throw Error("infonce_loss: non-finite negative score");
    if (s_negs.empty()) return 0.0;

    double m = s_pos;
    for (double s : s_negs) m = std::max(m, s);
    double denom = std::exp(s_pos - m);
    for (double s : s_negs) denom += std::exp(s - m);
    return (m + std::log(denom)) - s_pos;
}

TrainableEncoder::TrainableEncoder(std::vector<std::string> vocab, size_t dim, uint64_t seed,
                                   std::string tokenizer_name)
    : dim_(dim), seed_(seed), tokenizer_name_(std::move(tokenizer_name)),
      tokenizer_(tokenizer_by_name(tokenizer_name_)) {
    if (dim_ == 0) throw Error("encoder dim must be positive");

    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());

    vocab_tokens_.reserve(vocab.size() + 1);
    vocab_tokens_.push_back("<unk>");
    for (auto& t : vocab)
        if (t != "<unk>") vocab_tokens_.push_back(std::move(t));
    for (size_t i = 0; i < vocab_tokens_.size(); ++i) vocab_[vocab_tokens_[i]] = i;

    const size_t v = vocab_tokens_.size();
    embedding_.resize(v * dim_);
    projection_.assign(dim_ * dim_, 0.0);

    std::mt19937_64 rng(seed);
    const double scale = 0.5 / std::sqrt(static_cast<double>(dim_));
    std::uniform_real_distribution<double> unif(-scale, scale);
    for (size_t r = 0; r < v; ++r) {
        double* row = embedding_.data() + r * dim_;
        do {
            for (size_t i = 0; i < dim_; ++i) row[i] = unif(rng);
        } while (sqnorm(row, dim_) < 1e-6);  // keep every row away from zero
    }
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    for (size_t i = 0; i < dim_; ++i)
        for (size_t j = 0; j < dim_; ++j)
            projection_[i * dim_ + j] = (i == j ? 1.0 : 0.0) + jitter(rng);

    adam_m_emb_.assign(embedding_.size(), 0.0);
    adam_v_emb_.assign(embedding_.size(), 0.0);
    adam_m_proj_.assign(projection_.size(), 0.0);
    adam_v_proj_.assign(projection_.size(), 0.0);
}

TrainableEncoder TrainableEncoder::from_corpus(const Corpus& corpus, size_t dim, uint64_t seed) {
    std::vector<std::string> vocab;
    for (const auto& doc : corpus.docs()) {
        TokenSeq toks = corpus.tokenizer()(doc.text);
        vocab.insert(vocab.end(), toks.tokens.begin(), toks.tokens.end());
    }
    return TrainableEncoder(std::move(vocab), dim, seed, corpus.tokenizer_name());
}

size_t TrainableEncoder::token_row(const std::string& token) const {
    auto it = vocab_.find(token);
    return it == vocab_.end() ? 0 : it->second;
}

std::string TrainableEncoder::version_string() const {
    std::ostringstream ss;
    ss << "enc-v" << version_ << "-seed" << seed_ << "-dim" << dim_;
    return ss.str();
}

TrainableEncoder::Encoded TrainableEncoder::encode_rows(std::string_view text,
                                                        const std::string& owner_id,
                                                        size_t max_tokens) const {
    TokenSeq toks = tokenizer_(text);
    if (toks.empty()) throw Error("encode: text tokenizes to nothing");
    size_t n = toks.size();
    if (max_tokens > 0 && n > max_tokens) n = max_tokens;

    Encoded enc;
    enc.rows.reserve(n);
    enc.emb.owner_id = owner_id;
    enc.emb.dim = dim_;
    enc.emb.data.resize(n * dim_);
    for (size_t m = 0; m < n; ++m) {
        size_t row = token_row(toks.tokens[m]);
        enc.rows.push_back(row);
        const double* w = embedding_.data() + row * dim_;
        double* out = enc.emb.data.data() + m * dim_;
        for (size_t j = 0; j < dim_; ++j) {
            double acc = 0.0;
            const double* pj = projection_.data() + j * dim_;
            for (size_t kk = 0; kk < dim_; ++kk) acc += pj[kk] * w[kk];
            out[j] = acc;
        }
    }
    enc.emb.finalize();
    return enc;
}

TokenEmbeddings TrainableEncoder::encode(std::string_view text, const std::string& owner_id,
                                         size_t max_tokens) const {
    return encode_rows(text, owner_id, max_tokens).emb;
}

double TrainableEncoder::batch_loss(const TrainBatch& batch, const Corpus& corpus,
                                    size_t max_tokens) const {
    check_batch(batch);
    TokenEmbeddings q = encode(batch.query.text, batch.query.id, max_tokens);
    double s_pos = maxsim_score(q, encode(corpus.at(batch.positive).text, batch.positive, max_tokens));
    std::vector<double> s_negs;
    s_negs.reserve(batch.negatives.size());
    for (const auto& id : batch.negatives)
        s_negs.push_back(maxsim_score(q, encode(corpus.at(id).text, id, max_tokens)));
    return infonce_loss(s_pos, s_negs);
}

ParameterGradients TrainableEncoder::infonce_grad(const TrainBatch& batch, const Corpus& corpus,
                                                  size_t max_tokens) const {
    check_batch(batch);

    Encoded q = encode_rows(batch.query.text, batch.query.id, max_tokens);
    std::vector<Encoded> docs;
    docs.reserve(1 + batch.negatives.size());
    docs.push_back(encode_rows(corpus.at(batch.positive).text, batch.positive, max_tokens));
    for (const auto& id : batch.negatives)
        docs.push_back(encode_rows(corpus.at(id).text, id, max_tokens));

    const size_t nq = q.emb.num_tokens();
    const size_t n_docs = docs.size();

    // Forward: per-score argmax bookkeeping. Ties keep the lowest doc index.
    std::vector<double> scores(n_docs, 0.0);
    std::vector<std::vector<size_t>> best_idx(n_docs, std::vector<size_t>(nq));
    for (size_t di = 0; di < n_docs; ++di) {
        const TokenEmbeddings& d = docs[di].emb;
        const size_t nd = d.num_tokens();
        double total = 0.0;
        for (size_t m = 0; m < nq; ++m) {
            const double* qv = q.emb.row(m);
            double qn = q.emb.row_sqnorm[m];
            double best = -2.0;
            size_t arg = 0;
            for (size_t n = 0; n < nd; ++n) {
                double dn = d.row_sqnorm[n];
                double c;
                if (qn == 0.0 || dn == 0.0) {
                    c = 0.0;
                } else {
                    double dot = 0.0;
                    const double* dv = d.row(n);
                    for (size_t i = 0; i < dim_; ++i) dot += qv[i] * dv[i];
                    c = dot / std::sqrt(qn * dn);
                }
                if (c > best) {
                    best = c;
                    arg = n;
                }
            }
            total += best;
            best_idx[di][m] = arg;
        }
        scores[di] = total;
    }

    double s_pos = scores[0];
    std::vector<double> s_negs(scores.begin() + 1, scores.end());

    ParameterGradients grads;
    grads.loss = infonce_loss(s_pos, s_negs);
    grads.projection.assign(dim_ * dim_, 0.0);

    // Softmax coefficients: dL/ds_i = p_i - [i == positive].
    double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    std::vector<double> coef(n_docs);
    for (size_t i = 0; i < n_docs; ++i) coef[i] = std::exp(scores[i] - m) / z;
    coef[0] -= 1.0;

    // Token-position gradients for the query accumulate across all scores.
    std::vector<double> gq(nq * dim_, 0.0);

    auto backprop_rows = [&](const Encoded& enc, const std::vector<double>& g) {
        const size_t n = enc.rows.size();
        for (size_t pos = 0; pos < n; ++pos) {
            const double* gv = g.data() + pos * dim_;
            bool nonzero = false;
            for (size_t j = 0; j < dim_; ++j)
                if (gv[j] != 0.0) {
                    nonzero = true;
                    break;
                }
            if (!nonzero) continue;
            size_t row = enc.rows[pos];
            const double* w = embedding_.data() + row * dim_;
            auto [it, inserted] = grads.embedding_rows.try_emplace(row);
            if (inserted) it->second.assign(dim_, 0.0);
            double* gw = it->second.data();
            for (size_t j = 0; j < dim_; ++j) {
                double gj = gv[j];
                const double* pj = projection_.data() + j * dim_;
                double* gp = grads.projection.data() + j * dim_;
                for (size_t kk = 0; kk < dim_; ++kk) {
                    gp[kk] += gj * w[kk];
                    gw[kk] += gj * pj[kk];
                }
            }
        }
    };

    for (size_t di = 0; di < n_docs; ++di) {
        if (coef[di] == 0.0) continue;
        const TokenEmbeddings& d = docs[di].emb;
        std::vector<double> gd(d.num_tokens() * dim_, 0.0);
        for (size_t mq = 0; mq < nq; ++mq) {
            size_t n = best_idx[di][mq];
            const double* x = q.emb.row(mq);
            const double* y = d.row(n);
            double nx2 = q.emb.row_sqnorm[mq];
            double ny2 = d.row_sqnorm[n];
            if (nx2 == 0.0 || ny2 == 0.0) continue;  // cosine pinned to 0, no gradient
            double denom = std::sqrt(nx2 * ny2);
            double dot = 0.0;
            for (size_t i = 0; i < dim_; ++i) dot += x[i] * y[i];
            double c = dot / denom;
            double* gx = gq.data() + mq * dim_;
            double* gy = gd.data() + n * dim_;
            for (size_t i = 0; i < dim_; ++i) {
                gx[i] += coef[di] * (y[i] / denom - c * x[i] / nx2);
                gy[i] += coef[di] * (x[i] / denom - c * y[i] / ny2);
            }
        }
        backprop_rows(docs[di], gd);
    }
    backprop_rows(q, gq);

    return grads;
}

double TrainableEncoder::train_step(const TrainBatch& batch, const Corpus& corpus, double lr,
                                    size_t max_tokens, double proj_lr) {
    if (!(lr > 0.0)) throw Error("train_step: lr must be positive");
    if (proj_lr < 0.0) proj_lr = lr;
    ParameterGradients grads = infonce_grad(batch, corpus, max_tokens);

    uint64_t t = adam_t_ + 1;
    double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));

    // Candidate values; commit only after validating everything is finite.
    struct RowUpdate {
        size_t row;
        std::vector<double> theta, m, v;
    };
    std::vector<RowUpdate> row_updates;
    row_updates.reserve(grads.embedding_rows.size());

    auto adam = [&](double theta, double g, double& m, double& v, double rate) {
        m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
        v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
        double mhat = m / bc1;
        double vhat = v / bc2;
        return theta - rate * mhat / (std::sqrt(vhat) + kAdamEps);
    };

    bool finite = true;
    for (const auto& [row, g] : grads.embedding_rows) {
        RowUpdate u;
        u.row = row;
        u.theta.resize(dim_);
        u.m.resize(dim_);
        u.v.resize(dim_);
        for (size_t i = 0; i < dim_; ++i) {
            size_t idx = row * dim_ + i;
            u.m[i] = adam_m_emb_[idx];
            u.v[i] = adam_v_emb_[idx];
            u.theta[i] = adam(embedding_[idx], g[i], u.m[i], u.v[i], lr);
            finite = finite && std::isfinite(u.theta[i]) && std::isfinite(u.m[i]) &&
                     std::isfinite(u.v[i]);
        }
        row_updates.push_back(std::move(u));
    }

    std::vector<double> proj_theta(projection_.size()), proj_m(adam_m_proj_),
        proj_v(adam_v_proj_);
    for (size_t i = 0; i < projection_.size(); ++i) {
        proj_theta[i] = adam(projection_[i], grads.projection[i], proj_m[i], proj_v[i], proj_lr);
        finite = finite && std::isfinite(proj_theta[i]) && std::isfinite(proj_m[i]) &&
                 std::isfinite(proj_v[i]);
    }

    if (!finite) throw Error("train_step: rejected non-finite update; encoder unchanged");

    for (const auto& u : row_updates) {
        for (size_t i = 0; i < dim_; ++i) {
            size_t idx = u.row * dim_ + i;
            embedding_[idx] = u.theta[i];
            adam_m_emb_[idx] = u.m[i];
            adam_v_emb_[idx] = u.v[i];
        }
    }
    projection_ = std::move(proj_theta);
    adam_m_proj_ = std::move(proj_m);
    adam_v_proj_ = std::move(proj_v);
    adam_t_ = t;
    version_ += 1;
    return grads.loss;
}

void TrainableEncoder::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write encoder checkpoint: " + path);
    out.write("LIRAGENC", 8);
    binio::put_u32(out, 1);  // format version
    binio::put_u64(out, version_);
    binio::put_u64(out, seed_);
    binio::put_u32(out, static_cast<uint32_t>(dim_));
    binio::put_u64(out, vocab_tokens_.size());
    binio::put_string(out, tokenizer_name_);
    for (double v : embedding_) binio::put_f32(out, static_cast<float>(v));
    for (double v : projection_) binio::put_f32(out, static_cast<float>(v));
    for (const auto& t : vocab_tokens_) binio::put_string(out, t);
    if (!out) throw Error("write failed: " + path);
}

TrainableEncoder TrainableEncoder::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open encoder checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "LIRAGENC")
        throw Error("bad encoder checkpoint magic: " + path);
    uint32_t fmt = binio::get_u32(in);
    if (fmt != 1) throw Error("unsupported encoder checkpoint version");
    uint64_t version = binio::get_u64(in);
    uint64_t seed = binio::get_u64(in);
    uint32_t dim = binio::get_u32(in);
    uint64_t v = binio::get_u64(in);
    std::string tokenizer_name = binio::get_string(in);

    std::vector<double> embedding(v * dim);
    for (auto& x : embedding) x = static_cast<double>(binio::get_f32(in));
    std::vector<double> projection(static_cast<size_t>(dim) * dim);
    for (auto& x : projection) x = static_cast<double>(binio::get_f32(in));
    std::vector<std::string> vocab(v);
    for (auto& t : vocab) t = binio::get_string(in);

    TrainableEncoder enc({}, dim, seed, tokenizer_name);
    enc.vocab_tokens_ = std::move(vocab);
    enc.vocab_.clear();
    for (size_t i = 0; i < enc.vocab_tokens_.size(); ++i) enc.vocab_[enc.vocab_tokens_[i]] = i;
    enc.embedding_ = std::move(embedding);
    enc.projection_ = std::move(projection);
    enc.version_ = version;
    enc.adam_m_emb_.assign(enc.embedding_.size(), 0.0);
    enc.adam_v_emb_.assign(enc.embedding_.size(), 0.0);
    enc.adam_m_proj_.assign(enc.projection_.size(), 0.0);
    enc.adam_v_proj_.assign(enc.projection_.size(), 0.0);
    return enc;
}

TrainBatch mine_negatives(const InvertedIndex& sparse, const QDPair& pair, size_t k_neg,
                          size_t pool, uint64_t seed) {
    if (k_neg < 1) throw Error("mine_negatives: k_neg must be >= 1");
    if (pool < 1) throw Error("mine_negatives: pool must be >= 1");

    RankedList top = bm25_topk(sparse, pair.query, pool);
    std::vector<std::string> candidates;
    candidates.reserve(top.size());
    for (const auto& sd : top)
        if (sd.doc_id != pair.doc_id) candidates.push_back(sd.doc_id);
    if (candidates.empty())
        throw Error("mine_negatives: no negatives available for query " + pair.query.id);

    TrainBatch batch;
    batch.query = pair.query;
    batch.positive = pair.doc_id;

    if (candidates.size() <= k_neg) {
        batch.negatives = std::move(candidates);
        batch.short_pool = batch.negatives.size() < k_neg;
        return batch;
    }

    // Partial Fisher-Yates; stable across standard library implementations.
    std::mt19937_64 rng(mix64(seed, fnv1a64(pair.query.id)));
    for (size_t i = 0; i < k_neg; ++i) {
        size_t j = i + static_cast<size_t>(rng() % (candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
        batch.negatives.push_back(candidates[i]);
    }
    return batch;
}

DenseIndex build_dense_index(const Corpus& corpus, const TrainableEncoder& encoder,
                             size_t max_tokens, size_t threads) {
    DenseIndex index(encoder.dim(), encoder.version_string());
    const auto& docs = corpus.docs();
    std::vector<TokenEmbeddings> encoded(docs.size());

    size_t n_threads = threads == 0 ? 1 : threads;
    if (n_threads <= 1 || docs.size() < 64) {
        for (size_t i = 0; i < docs.size(); ++i)
            encoded[i] = encoder.encode(docs[i].text, docs[i].id, max_tokens);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    size_t i = next.fetch_add(16);
                    if (i >= docs.size()) break;
                    size_t end = std::min(i + 16, docs.size());
                    for (; i < end; ++i)
                        encoded[i] = encoder.encode(docs[i].text, docs[i].id, max_tokens);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (auto& e : encoded) index.add(std::move(e));
    return index;
}

}  // namespace lirag

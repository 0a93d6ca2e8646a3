#include "clmx/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "clmx/errors.hpp"
#include "clmx/rng.hpp"

namespace clmx {

namespace {

void glorot_fill(Matrix& m, int fan_in, int fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
    for (double& x : m.v) x = rng.uniform(-bound, bound);
}

}  // namespace

void adagrad_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  double lr) {
    auto ps = params.tensors();
    auto gs = grads.tensors();
    auto as = state.accumulators.tensors();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix& p = *ps[i].tensor;
        const Matrix& g = *gs[i].tensor;
        Matrix& acc = *as[i].tensor;
        if (!p.same_shape(g) || !p.same_shape(acc)) throw Error("adagrad shape mismatch");
        for (std::size_t k = 0; k < p.v.size(); ++k) {
            double gv = g.v[k];
            if (gv == 0.0) continue;
            acc.v[k] += gv * gv;
            p.v[k] -= lr * gv / (std::sqrt(acc.v[k]) + state.epsilon);
            if (!std::isfinite(p.v[k])) throw NonFinite("non-finite parameter after update");
        }
    }
}

ModelCheckpoint init_model(const Arch& arch, const std::string& vocab_hash,
                           std::uint64_t seed) {
    if (arch.vocab <= 0 || arch.embed <= 0 || arch.hidden <= 0) {
        throw Error("architecture dimensions must be positive");
    }
    ModelCheckpoint ckpt;
    ckpt.params = ModelParams(arch);
    ckpt.vocab_hash = vocab_hash;
    ModelParams& p = ckpt.params;

    Rng rng(seed);
    glorot_fill(p.embedding, arch.vocab, arch.embed, rng);
    int zdim = arch.embed + arch.hidden;
    glorot_fill(p.w_i, zdim, arch.hidden, rng);
    glorot_fill(p.w_f, zdim, arch.hidden, rng);
    glorot_fill(p.w_o, zdim, arch.hidden, rng);
    glorot_fill(p.w_g, zdim, arch.hidden, rng);
    glorot_fill(p.w_transform, arch.hidden, arch.hidden, rng);
    glorot_fill(p.w_linear, arch.hidden, arch.hidden, rng);
    glorot_fill(p.w_out, arch.hidden, arch.vocab, rng);
    // forget gate starts open, transform gate starts mostly closed (carry)
    p.b_f.fill(1.0);
    p.b_transform.fill(-1.0);
    return ckpt;
}

ModelCheckpoint transfer_initialize(const ModelCheckpoint& source, int l,
                                    const std::string& target_vocab_hash,
                                    std::uint64_t seed) {
    if (l < 0 || l > 4) throw BadDepth("transfer depth must be in 0..4");
    if (source.vocab_hash != target_vocab_hash) {
        throw VocabMismatch("source and target vocabulary hashes differ");
    }
    ModelCheckpoint ckpt = init_model(source.params.arch, target_vocab_hash, seed);
    auto dst = ckpt.params.tensors();
    auto src = source.params.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].layer <= l) *dst[i].tensor = *src[i].tensor;
    }
    ckpt.provenance.transferred_from = source.id;
    ckpt.provenance.transfer_depth = l;
    return ckpt;
}

void TrainingHistory::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write history file: " + path.string());
    out << "epoch\ttrain_nll_sum\ttrain_token_count\tdev_word_ppl\tlr\n";
    char buf[128];
    for (const EpochRecord& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%ld\t%.17g\t%.17g\n", e.epoch,
                      e.train_nll_sum, e.train_token_count, e.dev_word_ppl, e.learning_rate);
        out << buf;
    }
}

double dev_word_perplexity(const ModelParams& params, const EncodedCorpus& dev,
                           int batch_size, int seq_len) {
    if (dev.word_count <= 0) throw EmptyStream("empty dev corpus");
    double total = 0.0;
    for (const Batch& b : make_batches(dev, batch_size, seq_len, 0, false)) {
        ForwardResult fr = forward(params, b, Mode::eval());
        total += masked_nll_sum(fr.nll, b);
    }
    return std::exp(total / static_cast<double>(dev.word_count));
}

TrainResult train(const ModelCheckpoint& start, const EncodedCorpus& train_corpus,
                  const EncodedCorpus& dev_corpus, const TrainConfig& config) {
    ModelParams params = start.params;
    OptimizerState opt(params.arch, config.adagrad_eps);
    double lr = config.learning_rate;

    TrainingHistory history;
    double best_ppl = dev_word_perplexity(params, dev_corpus, config.batch_size, config.seq_len);
    ModelParams best_params = params;
    int best_epoch = 0;
    history.epochs.push_back({0, 0.0, 0, best_ppl, lr});

    int halvings = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::uint64_t epoch_seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch);
        auto batches = make_batches(train_corpus, config.batch_size, config.seq_len,
                                    epoch_seed, true);
        double nll_sum = 0.0;
        long token_count = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            Mode mode = Mode::training(config.dropout, epoch_seed * 131ULL + bi);
            ForwardResult fr;
            try {
                fr = forward(params, batches[bi], mode);
                ModelParams grads = backward(params, fr.cache);
                adagrad_step(params, grads, opt, lr);
            } catch (const NonFinite& e) {
                throw NonFinite("epoch " + std::to_string(epoch) + ": " + e.what());
            }
            nll_sum += masked_nll_sum(fr.nll, batches[bi]);
            for (std::uint8_t m : batches[bi].mask) token_count += m;
        }

        double dev_ppl = dev_word_perplexity(params, dev_corpus, config.batch_size,
                                             config.seq_len);
        history.epochs.push_back({epoch, nll_sum, token_count, dev_ppl, lr});

        if (dev_ppl < best_ppl) {
            best_ppl = dev_ppl;
            best_params = params;
            best_epoch = epoch;
        } else {
            if (halvings >= config.max_lr_halvings) break;
            ++halvings;
            lr *= 0.5;
            params = best_params;
        }
    }

    TrainResult result;
    result.checkpoint = start;
    result.checkpoint.params = std::move(best_params);
    result.checkpoint.provenance.epochs = best_epoch;
    result.checkpoint.provenance.final_dev_ppl = best_ppl;
    result.history = std::move(history);
    result.history.best_epoch = best_epoch;
    return result;
}

}  // namespace clmx

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clmx/checkpoint.hpp"
#include "clmx/corpus.hpp"
#include "clmx/network.hpp"

namespace clmx {

struct TrainConfig {
    double learning_rate = 0.1;
    double dropout = 0.2;
    int batch_size = 64;
    int seq_len = 100;
    int max_epochs = 50;
    int max_lr_halvings = 4;
    double adagrad_eps = 1e-6;
    std::uint64_t seed = 1;
};

struct OptimizerState {
    ModelParams accumulators;  // squared-gradient sums, same shapes as the params
    double epsilon = 1e-6;

    explicit OptimizerState(const Arch& arch, double eps = 1e-6)
        : accumulators(arch), epsilon(eps) {}
};

// acc += g^2; theta -= lr * g / (sqrt(acc) + eps), elementwise.
void adagrad_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  double lr);

ModelCheckpoint init_model(const Arch& arch, const std::string& vocab_hash,
                           std::uint64_t seed);

// Copies layers 1..l from the source checkpoint and draws the rest fresh
// from init_model(seed). l=0 degenerates to a pure random init.
ModelCheckpoint transfer_initialize(const ModelCheckpoint& source, int l,
                                    const std::string& target_vocab_hash,
                                    std::uint64_t seed);

struct EpochRecord {
    int epoch = 0;
    double train_nll_sum = 0.0;
    long train_token_count = 0;
    double dev_word_ppl = 0.0;
    double learning_rate = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;

    void save(const std::filesystem::path& path) const;
};

struct TrainResult {
    ModelCheckpoint checkpoint;
    TrainingHistory history;
};

// Dev word perplexity in eval mode, batched like training.
double dev_word_perplexity(const ModelParams& params, const EncodedCorpus& dev,
                           int batch_size, int seq_len);

// Epochs of shuffled mini-batch Adagrad with best-dev selection. The dev
// perplexity of the starting model is evaluated before any update (epoch 0),
// so the returned checkpoint is never worse than the start. On a
// non-improving epoch the learning rate is halved and the best weights
// restored; training stops after max_lr_halvings halvings or max_epochs.
TrainResult train(const ModelCheckpoint& start, const EncodedCorpus& train_corpus,
                  const EncodedCorpus& dev_corpus, const TrainConfig& config);

}  // namespace clmx

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clmx/errors.hpp"
#include "clmx/rng.hpp"
#include "clmx/training.hpp"

using namespace clmx;

namespace {

EncodedCorpus toy_corpus(const Vocabulary& vocab, const std::string& text) {
    std::istringstream in(text);
    return encode_corpus(in, vocab);
}

Vocabulary toy_vocab() {
    std::istringstream in("abc bd ca\ncb ad\n");
    std::vector<std::istream*> streams{&in};
    return build_vocabulary(streams, {"toy"});
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    auto ta = a.tensors();
    auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].tensor->v != tb[i].tensor->v) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init_model is deterministic per seed") {
    Arch arch{12, 4, 8};
    CHECK(params_equal(init_model(arch, "h", 3).params, init_model(arch, "h", 3).params));
    CHECK_FALSE(params_equal(init_model(arch, "h", 3).params, init_model(arch, "h", 4).params));
}

TEST_CASE("init_model respects the Glorot bound and bias conventions") {
    Arch arch{30, 6, 10};
    ModelParams p = init_model(arch, "h", 5).params;
    double bound = std::sqrt(6.0 / (arch.vocab + arch.embed));
    for (double x : p.embedding.v) CHECK(std::fabs(x) <= bound);
    for (double x : p.b_f.v) CHECK(x == 1.0);
    for (double x : p.b_transform.v) CHECK(x == -1.0);
    for (double x : p.b_i.v) CHECK(x == 0.0);
}

TEST_CASE("adagrad step arithmetic") {
    Arch arch{4, 2, 3};
    ModelParams params(arch);
    OptimizerState state(arch, 1e-6);
    double lr = 0.1;

    SUBCASE("zero gradient leaves everything unchanged") {
        ModelParams grads(arch);
        ModelParams before = params;
        adagrad_step(params, grads, state, lr);
        CHECK(params_equal(params, before));
        for (double x : state.accumulators.w_i.v) CHECK(x == 0.0);
    }

    SUBCASE("first and second step follow the closed form") {
        ModelParams grads(arch);
        double g = 0.7;
        grads.w_out.at(0, 0) = g;
        adagrad_step(params, grads, state, lr);
        double first = lr * g / (g + 1e-6);
        CHECK(params.w_out.at(0, 0) == doctest::Approx(-first).epsilon(1e-12));

        adagrad_step(params, grads, state, lr);
        double second = lr * g / (std::sqrt(2.0) * g + 1e-6);
        CHECK(params.w_out.at(0, 0) == doctest::Approx(-(first + second)).epsilon(1e-12));
        CHECK(second < first);
    }
}

TEST_CASE("adagrad accumulators are monotone") {
    Arch arch{5, 2, 3};
    ModelParams params = init_model(arch, "h", 6).params;
    OptimizerState state(arch);
    Rng rng(7);
    ModelParams prev_acc = state.accumulators;
    for (int step = 0; step < 5; ++step) {
        ModelParams grads(arch);
        for (NamedTensor nt : grads.tensors()) {
            for (double& x : nt.tensor->v) x = rng.uniform(-1.0, 1.0);
        }
        adagrad_step(params, grads, state, 0.05);
        auto now = state.accumulators.tensors();
        auto before = prev_acc.tensors();
        for (std::size_t i = 0; i < now.size(); ++i) {
            for (std::size_t k = 0; k < now[i].tensor->v.size(); ++k) {
                CHECK(now[i].tensor->v[k] >= before[i].tensor->v[k]);
            }
        }
        prev_acc = state.accumulators;
    }
}

TEST_CASE("transfer_initialize copies exactly the requested layers") {
    Arch arch{10, 4, 6};
    ModelCheckpoint source = init_model(arch, "hash", 42);
    source.id = "src";

    for (int l = 0; l <= 4; ++l) {
        ModelCheckpoint t = transfer_initialize(source, l, "hash", 5);
        auto st = source.params.tensors();
        auto tt = t.params.tensors();
        for (std::size_t i = 0; i < st.size(); ++i) {
            if (st[i].layer <= l) {
                CHECK(st[i].tensor->v == tt[i].tensor->v);
            }
        }
        CHECK(t.provenance.transfer_depth == l);
        CHECK(t.provenance.transferred_from == "src");
    }

    // l = 0 equals a fresh init with the same seed
    ModelCheckpoint zero = transfer_initialize(source, 0, "hash", 5);
    CHECK(params_equal(zero.params, init_model(arch, "hash", 5).params));

    // fresh layers differ from the source (weight tensors, not constant biases)
    ModelCheckpoint one = transfer_initialize(source, 1, "hash", 5);
    CHECK(one.params.embedding.v == source.params.embedding.v);
    CHECK(one.params.w_i.v != source.params.w_i.v);
    CHECK(one.params.w_transform.v != source.params.w_transform.v);
    CHECK(one.params.w_out.v != source.params.w_out.v);
}

TEST_CASE("transfer_initialize validates depth and vocabulary hash") {
    Arch arch{6, 3, 4};
    ModelCheckpoint source = init_model(arch, "hash", 1);
    CHECK_THROWS_AS(transfer_initialize(source, 5, "hash", 1), BadDepth);
    CHECK_THROWS_AS(transfer_initialize(source, -1, "hash", 1), BadDepth);
    CHECK_THROWS_AS(transfer_initialize(source, 2, "other", 1), VocabMismatch);
}

TEST_CASE("train is deterministic and never returns a worse dev model") {
    Vocabulary vocab = toy_vocab();
    EncodedCorpus train_c = toy_corpus(vocab, "abc bd\nca cb\nad abc\n");
    EncodedCorpus dev_c = toy_corpus(vocab, "abc ca\nbd\n");

    Arch arch{vocab.size(), 3, 6};
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.seq_len = 8;
    cfg.max_epochs = 4;
    cfg.dropout = 0.1;
    cfg.seed = 21;

    ModelCheckpoint start = init_model(arch, "h", 21);
    TrainResult a = train(start, train_c, dev_c, cfg);
    TrainResult b = train(start, train_c, dev_c, cfg);

    CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
        CHECK(a.history.epochs[i].dev_word_ppl == b.history.epochs[i].dev_word_ppl);
        CHECK(a.history.epochs[i].train_nll_sum == b.history.epochs[i].train_nll_sum);
    }

    // epoch 0 is the starting model; best-dev selection includes it
    CHECK(a.history.epochs[0].epoch == 0);
    double start_ppl = a.history.epochs[0].dev_word_ppl;
    CHECK(a.checkpoint.provenance.final_dev_ppl <= start_ppl);

    // learning rate never increases
    for (std::size_t i = 1; i < a.history.epochs.size(); ++i) {
        CHECK(a.history.epochs[i].learning_rate <= a.history.epochs[i - 1].learning_rate);
    }
}

TEST_CASE("fine-tuning from l=0 equals training from scratch") {
    Vocabulary vocab = toy_vocab();
    EncodedCorpus train_c = toy_corpus(vocab, "abc bd\nca cb\n");
    EncodedCorpus dev_c = toy_corpus(vocab, "abc\n");

    Arch arch{vocab.size(), 3, 4};
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.seq_len = 8;
    cfg.max_epochs = 3;
    cfg.seed = 33;

    ModelCheckpoint source = init_model(arch, "h", 99);
    ModelCheckpoint transferred = transfer_initialize(source, 0, "h", 33);
    ModelCheckpoint scratch = init_model(arch, "h", 33);

    TrainResult a = train(transferred, train_c, dev_c, cfg);
    TrainResult b = train(scratch, train_c, dev_c, cfg);
    CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
}

TEST_CASE("training history file format") {
    TrainingHistory h;
    h.epochs.push_back({0, 0.0, 0, 12.5, 0.1});
    h.epochs.push_back({1, 34.25, 100, 11.0, 0.1});
    auto path = std::filesystem::temp_directory_path() / "clmx_history_test.tsv";
    h.save(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch\ttrain_nll_sum\ttrain_token_count\tdev_word_ppl\tlr");
    std::getline(in, line);
    CHECK(line.substr(0, 2) == "0\t");
    std::filesystem::remove(path);
}

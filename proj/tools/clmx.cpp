// Command-line front end for the character LM toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clmx/analysis.hpp"
#include "clmx/checkpoint.hpp"
#include "clmx/corpus.hpp"
#include "clmx/digest.hpp"
#include "clmx/errors.hpp"
#include "clmx/evaluation.hpp"
#include "clmx/grid.hpp"
#include "clmx/rng.hpp"
#include "clmx/synth.hpp"
#include "clmx/training.hpp"

namespace fs = std::filesystem;
using namespace clmx;

namespace {

struct TrainFlags {
    std::string vocab_path, train_path, dev_path, out_path, history_path, id;
    int embed = 32, hidden = 128;
    TrainConfig config;
};

void add_train_options(CLI::App* cmd, TrainFlags& f, bool with_arch) {
    cmd->add_option("--vocab", f.vocab_path, "vocabulary file")->required();
    cmd->add_option("--train", f.train_path, "training corpus")->required();
    cmd->add_option("--dev", f.dev_path, "development corpus")->required();
    cmd->add_option("--out", f.out_path, "output checkpoint path")->required();
    cmd->add_option("--history", f.history_path, "write per-epoch history to this file");
    cmd->add_option("--id", f.id, "checkpoint id");
    if (with_arch) {
        cmd->add_option("--embed", f.embed, "projection layer size");
        cmd->add_option("--hidden", f.hidden, "LSTM/highway layer size");
    }
    cmd->add_option("--lr", f.config.learning_rate, "initial learning rate");
    cmd->add_option("--dropout", f.config.dropout, "dropout probability");
    cmd->add_option("--batch-size", f.config.batch_size, "mini-batch size");
    cmd->add_option("--seq-len", f.config.seq_len, "sequence length");
    cmd->add_option("--max-epochs", f.config.max_epochs, "epoch limit");
    cmd->add_option("--seed", f.config.seed, "random seed")->required();
}

void run_training(const TrainFlags& f, ModelCheckpoint start) {
    Vocabulary vocab = Vocabulary::load(f.vocab_path);
    EncodedCorpus train_corpus = encode_corpus_file(f.train_path, vocab);
    EncodedCorpus dev_corpus = encode_corpus_file(f.dev_path, vocab);
    TrainResult res = train(start, train_corpus, dev_corpus, f.config);
    save_checkpoint(res.checkpoint, f.out_path);
    if (!f.history_path.empty()) res.history.save(f.history_path);
    std::printf("best epoch %d, dev word ppl %.6f -> %s\n", res.history.best_epoch,
                res.checkpoint.provenance.final_dev_ppl, f.out_path.c_str());
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const std::string& l : lines) out << l << '\n';
}

void print_ppl_report(const NllStream& stream) {
    PplReport rep = make_ppl_report(stream);
    std::printf("records %zu  words %ld\n", stream.records.size(), stream.word_count);
    std::printf("word ppl %.6f\nchar ppl %.6f\n", rep.word_ppl, rep.char_ppl);
    for (const auto& [code, cls] : rep.per_class) {
        std::printf("  %-3s ppl %12.6f  count %ld\n", code.c_str(), cls.ppl, cls.count);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"character-level LM toolkit with cross-lingual pretraining"};
    app.require_subcommand(1);

    // build-vocab
    auto* cmd_vocab = app.add_subcommand("build-vocab", "build the shared character vocabulary");
    std::vector<std::string> corpus_specs;
    std::string vocab_out;
    cmd_vocab->add_option("--corpus", corpus_specs, "language=path, repeatable")->required();
    cmd_vocab->add_option("--out", vocab_out, "output vocabulary file")->required();

    // synth-gen
    auto* cmd_synth = app.add_subcommand("synth-gen", "generate a synthetic language pair");
    SynthSpec spec;
    int source_train = 1200, target_train = 60, dev_sentences = 40, test_sentences = 80;
    std::string synth_dir;
    cmd_synth->add_option("--alphabet-size", spec.alphabet_size);
    cmd_synth->add_option("--n-states", spec.n_states);
    cmd_synth->add_option("--epsilon", spec.relatedness, "relatedness: 0 shared, 1 independent");
    cmd_synth->add_option("--mean-word-len", spec.mean_word_len);
    cmd_synth->add_option("--mean-sent-len", spec.mean_sent_len);
    cmd_synth->add_option("--source-train-sentences", source_train);
    cmd_synth->add_option("--target-train-sentences", target_train);
    cmd_synth->add_option("--dev-sentences", dev_sentences);
    cmd_synth->add_option("--test-sentences", test_sentences);
    cmd_synth->add_option("--seed", spec.seed, "random seed")->required();
    cmd_synth->add_option("--out-dir", synth_dir)->required();

    // train / finetune
    auto* cmd_train = app.add_subcommand("train", "train a model from random initialization");
    TrainFlags train_flags;
    add_train_options(cmd_train, train_flags, true);

    auto* cmd_finetune = app.add_subcommand("finetune", "continue training from a checkpoint");
    TrainFlags ft_flags;
    std::string ft_start;
    cmd_finetune->add_option("--start", ft_start, "starting checkpoint")->required();
    add_train_options(cmd_finetune, ft_flags, false);

    // transfer
    auto* cmd_transfer = app.add_subcommand("transfer", "partially initialize from a source model");
    std::string tr_source, tr_vocab, tr_out, tr_id;
    int tr_depth = 1;
    std::uint64_t tr_seed = 0;
    cmd_transfer->add_option("--source", tr_source, "source checkpoint")->required();
    cmd_transfer->add_option("--depth", tr_depth, "layers to copy, 0..4")->required();
    cmd_transfer->add_option("--vocab", tr_vocab, "shared vocabulary file")->required();
    cmd_transfer->add_option("--seed", tr_seed, "seed for the fresh layers")->required();
    cmd_transfer->add_option("--id", tr_id, "checkpoint id");
    cmd_transfer->add_option("--out", tr_out)->required();

    // score
    auto* cmd_score = app.add_subcommand("score", "score a corpus and emit a per-token stream");
    std::string sc_ckpt, sc_vocab, sc_corpus, sc_out, sc_vowels = "english";
    cmd_score->add_option("--ckpt", sc_ckpt)->required();
    cmd_score->add_option("--vocab", sc_vocab)->required();
    cmd_score->add_option("--corpus", sc_corpus)->required();
    cmd_score->add_option("--out", sc_out, "stream output path");
    cmd_score->add_option("--vowels", sc_vowels, "vowel set: finnish, swedish or english");

    // interpolate
    auto* cmd_interp = app.add_subcommand("interpolate", "mix two scored streams");
    std::string in_a, in_b, in_dev_a, in_dev_b, in_out;
    double lambda = -1.0;
    cmd_interp->add_option("--a", in_a, "stream A")->required();
    cmd_interp->add_option("--b", in_b, "stream B")->required();
    cmd_interp->add_option("--lambda", lambda, "mixture weight for A; omit to optimize");
    cmd_interp->add_option("--dev-a", in_dev_a, "dev stream A for weight optimization");
    cmd_interp->add_option("--dev-b", in_dev_b, "dev stream B for weight optimization");
    cmd_interp->add_option("--out", in_out, "write the mixed stream here");

    // analyze-embeddings
    auto* cmd_embed = app.add_subcommand("analyze-embeddings",
                                         "affine-align output embeddings and report cosine");
    std::string em_candidate, em_baseline;
    cmd_embed->add_option("--candidate", em_candidate)->required();
    cmd_embed->add_option("--baseline", em_baseline)->required();

    // grid / sweep / report
    auto* cmd_grid = app.add_subcommand("grid", "run the transfer grid experiment");
    std::string grid_config;
    cmd_grid->add_option("--config", grid_config)->required();

    auto* cmd_sweep = app.add_subcommand("sweep", "run the target data-size sweep");
    std::string sweep_config;
    cmd_sweep->add_option("--config", sweep_config)->required();

    auto* cmd_report = app.add_subcommand("report", "re-render a saved report");
    std::string rp_in, rp_out, rp_format = "text";
    cmd_report->add_option("--in", rp_in, "report.tsv produced by grid/sweep")->required();
    cmd_report->add_option("--format", rp_format, "text or tsv");
    cmd_report->add_option("--out", rp_out, "output path; stdout if omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (cmd_vocab->parsed()) {
        std::vector<fs::path> paths;
        std::vector<std::string> names;
        for (const std::string& s : corpus_specs) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw Error("--corpus expects language=path");
            names.push_back(s.substr(0, eq));
            paths.push_back(s.substr(eq + 1));
        }
        Vocabulary v = build_vocabulary_from_files(paths, names);
        v.save(vocab_out);
        std::printf("%d units -> %s (sha256 %s)\n", v.size(), vocab_out.c_str(),
                    sha256_file_hex(vocab_out).c_str());
    } else if (cmd_synth->parsed()) {
        fs::create_directories(synth_dir);
        Rng rng(spec.seed);
        MarkovChain source_chain = random_chain(spec.n_states, spec.alphabet_size, rng);
        MarkovChain independent = random_chain(spec.n_states, spec.alphabet_size, rng);
        MarkovChain target_chain = mix_chains(source_chain, independent, spec.relatedness);
        fs::path dir(synth_dir);
        write_lines(dir / "source_train.txt",
                    sample_corpus(source_chain, source_train, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        write_lines(dir / "source_dev.txt",
                    sample_corpus(source_chain, dev_sentences, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        write_lines(dir / "source_test.txt",
                    sample_corpus(source_chain, test_sentences, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        write_lines(dir / "target_train.txt",
                    sample_corpus(target_chain, target_train, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        write_lines(dir / "target_dev.txt",
                    sample_corpus(target_chain, dev_sentences, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        write_lines(dir / "target_test.txt",
                    sample_corpus(target_chain, test_sentences, spec.mean_word_len,
                                  spec.mean_sent_len, rng));
        std::printf("synthetic pair (epsilon %.2f) written to %s\n", spec.relatedness,
                    synth_dir.c_str());
    } else if (cmd_train->parsed()) {
        Vocabulary vocab = Vocabulary::load(train_flags.vocab_path);
        std::string hash = sha256_file_hex(train_flags.vocab_path);
        Arch arch{vocab.size(), train_flags.embed, train_flags.hidden};
        ModelCheckpoint start = init_model(arch, hash, train_flags.config.seed);
        start.id = train_flags.id.empty() ? "model" : train_flags.id;
        run_training(train_flags, std::move(start));
    } else if (cmd_finetune->parsed()) {
        ModelCheckpoint start = load_checkpoint(ft_start);
        std::string hash = sha256_file_hex(ft_flags.vocab_path);
        if (start.vocab_hash != hash) {
            throw VocabMismatch("checkpoint vocabulary differs from --vocab file");
        }
        if (!ft_flags.id.empty()) start.id = ft_flags.id;
        run_training(ft_flags, std::move(start));
    } else if (cmd_transfer->parsed()) {
        ModelCheckpoint source = load_checkpoint(tr_source);
        std::string hash = sha256_file_hex(tr_vocab);
        ModelCheckpoint out = transfer_initialize(source, tr_depth, hash, tr_seed);
        out.id = tr_id.empty() ? source.id + "-l" + std::to_string(tr_depth) : tr_id;
        save_checkpoint(out, tr_out);
        std::printf("transferred layers 1..%d from %s -> %s\n", tr_depth, tr_source.c_str(),
                    tr_out.c_str());
    } else if (cmd_score->parsed()) {
        ModelCheckpoint ckpt = load_checkpoint(sc_ckpt);
        Vocabulary vocab = Vocabulary::load(sc_vocab);
        std::string hash = sha256_file_hex(sc_vocab);
        NllStream stream = score_corpus(ckpt, encode_corpus_file(sc_corpus, vocab), vocab,
                                        default_vowels(sc_vowels), hash);
        if (!sc_out.empty()) stream.save(sc_out);
        print_ppl_report(stream);
    } else if (cmd_interp->parsed()) {
        NllStream a = NllStream::load(in_a);
        NllStream b = NllStream::load(in_b);
        if (lambda < 0.0) {
            NllStream dev_a = in_dev_a.empty() ? a : NllStream::load(in_dev_a);
            NllStream dev_b = in_dev_b.empty() ? b : NllStream::load(in_dev_b);
            LambdaSearchResult res = optimize_lambda(dev_a, dev_b);
            lambda = res.lambda;
            std::printf("lambda* %.6f (dev word ppl %.6f)\n", res.lambda, res.dev_ppl);
        }
        NllStream mixed = interpolate(a, b, lambda);
        if (!in_out.empty()) mixed.save(in_out);
        std::printf("interpolated word ppl %.6f, char ppl %.6f\n", word_perplexity(mixed),
                    char_perplexity(mixed));
    } else if (cmd_embed->parsed()) {
        ModelCheckpoint candidate = load_checkpoint(em_candidate);
        ModelCheckpoint baseline = load_checkpoint(em_baseline);
        AlignmentReport rep = align_and_compare(candidate, baseline);
        std::printf("alignment residual %.8g\nmean cosine similarity %.6f\n", rep.residual,
                    rep.mean_cosine);
    } else if (cmd_grid->parsed()) {
        GridReport report = run_transfer_grid(load_experiment_config(grid_config));
        render_report(report, ReportFormat::TextTable, std::cout);
    } else if (cmd_sweep->parsed()) {
        GridReport report = run_datasize_sweep(load_experiment_config(sweep_config));
        render_report(report, ReportFormat::TextTable, std::cout);
    } else if (cmd_report->parsed()) {
        GridReport report = read_report(rp_in);
        ReportFormat fmt =
            rp_format == "tsv" ? ReportFormat::Delimited : ReportFormat::TextTable;
        if (rp_out.empty()) {
            render_report(report, fmt, std::cout);
        } else {
            write_report(report, fmt, rp_out);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NonFinite& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

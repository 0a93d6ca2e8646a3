#include "clmx/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "clmx/analysis.hpp"
#include "clmx/digest.hpp"
#include "clmx/errors.hpp"
#include "clmx/evaluation.hpp"

namespace clmx {

namespace fs = std::filesystem;

namespace {

std::string format_double(double x) {
    if (std::isnan(x)) return "-";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "-") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

bool same_value(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out.empty() ? "-" : out;
}

const LanguagePaths& find_language(const ExperimentConfig& cfg, const std::string& name) {
    for (const LanguagePaths& l : cfg.languages) {
        if (l.name == name) return l;
    }
    throw Error("language not configured: " + name);
}

struct ScoredModel {
    ModelCheckpoint ckpt;
    NllStream dev_stream;
    NllStream test_stream;
};

// Shared state of one grid run.
struct GridContext {
    Vocabulary vocab;
    std::string vocab_hash;
    Arch arch;
    EncodedCorpus target_train, target_dev, target_test;
    std::map<std::string, ModelCheckpoint> source_models;
    fs::path ckpt_dir, stream_dir;
};

GridContext prepare(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);

    GridContext ctx;
    std::vector<fs::path> paths;
    std::vector<std::string> names;
    for (const LanguagePaths& l : cfg.languages) {
        paths.push_back(l.train);
        names.push_back(l.name);
    }
    ctx.vocab = build_vocabulary_from_files(paths, names);
    fs::path vocab_path = cfg.output_dir / "vocab.txt";
    ctx.vocab.save(vocab_path);
    ctx.vocab_hash = sha256_file_hex(vocab_path);
    ctx.arch = Arch{ctx.vocab.size(), cfg.embed_dim, cfg.hidden_dim};

    const LanguagePaths& tgt = find_language(cfg, cfg.target);
    ctx.target_train = encode_corpus_file(tgt.train, ctx.vocab);
    ctx.target_dev = encode_corpus_file(tgt.dev, ctx.vocab);
    ctx.target_test = encode_corpus_file(tgt.test, ctx.vocab);

    ctx.ckpt_dir = cfg.output_dir / "checkpoints";
    ctx.stream_dir = cfg.output_dir / "streams";
    fs::create_directories(ctx.ckpt_dir);
    fs::create_directories(ctx.stream_dir);

    // one source model per source, trained with the first configured seed
    for (const std::string& src_name : cfg.sources) {
        const LanguagePaths& src = find_language(cfg, src_name);
        EncodedCorpus src_train = encode_corpus_file(src.train, ctx.vocab);
        EncodedCorpus src_dev = encode_corpus_file(src.dev, ctx.vocab);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seeds.front();
        ModelCheckpoint init = init_model(ctx.arch, ctx.vocab_hash, tc.seed);
        init.id = "source-" + src_name;
        init.provenance.trained_on = {src_name};
        TrainResult res = train(init, src_train, src_dev, tc);
        save_checkpoint(res.checkpoint, ctx.ckpt_dir / (init.id + ".clmx"));
        res.history.save(ctx.ckpt_dir / (init.id + ".history.tsv"));
        ctx.source_models.emplace(src_name, std::move(res.checkpoint));
    }
    return ctx;
}

ScoredModel train_and_score(const GridContext& ctx, const ExperimentConfig& cfg,
                            ModelCheckpoint start, const EncodedCorpus& train_corpus,
                            std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    TrainResult res = train(start, train_corpus, ctx.target_dev, tc);

    const auto& vowels = default_vowels(cfg.vowel_language);
    ScoredModel out;
    out.dev_stream = score_corpus(res.checkpoint, ctx.target_dev, ctx.vocab, vowels,
                                  ctx.vocab_hash, tc.batch_size, tc.seq_len);
    out.test_stream = score_corpus(res.checkpoint, ctx.target_test, ctx.vocab, vowels,
                                   ctx.vocab_hash, tc.batch_size, tc.seq_len);
    save_checkpoint(res.checkpoint, ctx.ckpt_dir / (res.checkpoint.id + ".clmx"));
    res.history.save(ctx.ckpt_dir / (res.checkpoint.id + ".history.tsv"));
    out.dev_stream.save(ctx.stream_dir / (res.checkpoint.id + ".dev.nll"));
    out.test_stream.save(ctx.stream_dir / (res.checkpoint.id + ".test.nll"));
    out.ckpt = std::move(res.checkpoint);
    return out;
}

GridReport run(const ExperimentConfig& cfg, const std::vector<double>& fractions) {
    GridContext ctx = prepare(cfg);
    GridReport report;

    for (double fraction : fractions) {
        for (std::uint64_t seed : cfg.seeds) {
            EncodedCorpus train_corpus =
                subsample_sentences(ctx.target_train, fraction, seed);

            std::string tag = "s" + std::to_string(seed) +
                              (fraction == 1.0 ? "" : "-f" + format_double(fraction));

            // baseline for this (seed, fraction)
            GridRow base_row;
            base_row.source = "-";
            base_row.depth = 0;
            base_row.seed = seed;
            base_row.fraction = fraction;
            base_row.lambda = std::numeric_limits<double>::quiet_NaN();
            base_row.interp_test_ppl = std::numeric_limits<double>::quiet_NaN();
            base_row.mean_cosine = std::numeric_limits<double>::quiet_NaN();

            ScoredModel baseline;
            bool baseline_ok = false;
            try {
                ModelCheckpoint init = init_model(ctx.arch, ctx.vocab_hash, seed);
                init.id = "baseline-" + tag;
                init.provenance.trained_on = {cfg.target};
                baseline = train_and_score(ctx, cfg, std::move(init), train_corpus, seed);
                base_row.dev_ppl = baseline.ckpt.provenance.final_dev_ppl;
                base_row.test_word_ppl = word_perplexity(baseline.test_stream);
                base_row.test_char_ppl = char_perplexity(baseline.test_stream);
                baseline_ok = true;
            } catch (const Error& e) {
                base_row.error = e.what();
                base_row.dev_ppl = base_row.test_word_ppl = base_row.test_char_ppl =
                    std::numeric_limits<double>::quiet_NaN();
            }
            report.rows.push_back(base_row);

            for (const std::string& src_name : cfg.sources) {
                for (int depth : cfg.depths) {
                    GridRow row;
                    row.source = src_name;
                    row.depth = depth;
                    row.seed = seed;
                    row.fraction = fraction;
                    try {
                        ModelCheckpoint init = transfer_initialize(
                            ctx.source_models.at(src_name), depth, ctx.vocab_hash, seed);
                        init.id = src_name + "-l" + std::to_string(depth) + "-" + tag;
                        init.provenance.trained_on = {src_name, cfg.target};
                        ScoredModel cell =
                            train_and_score(ctx, cfg, std::move(init), train_corpus, seed);
                        row.dev_ppl = cell.ckpt.provenance.final_dev_ppl;
                        row.test_word_ppl = word_perplexity(cell.test_stream);
                        row.test_char_ppl = char_perplexity(cell.test_stream);
                        if (baseline_ok) {
                            LambdaSearchResult lam =
                                optimize_lambda(cell.dev_stream, baseline.dev_stream);
                            row.lambda = lam.lambda;
                            row.interp_test_ppl = word_perplexity(interpolate(
                                cell.test_stream, baseline.test_stream, lam.lambda));
                            row.mean_cosine =
                                align_and_compare(cell.ckpt, baseline.ckpt).mean_cosine;
                        } else {
                            row.lambda = std::numeric_limits<double>::quiet_NaN();
                            row.interp_test_ppl = std::numeric_limits<double>::quiet_NaN();
                            row.mean_cosine = std::numeric_limits<double>::quiet_NaN();
                        }
                    } catch (const Error& e) {
                        row.error = e.what();
                        row.dev_ppl = row.test_word_ppl = row.test_char_ppl =
                            std::numeric_limits<double>::quiet_NaN();
                        row.lambda = row.interp_test_ppl = row.mean_cosine =
                            std::numeric_limits<double>::quiet_NaN();
                    }
                    report.rows.push_back(row);
                }
            }
        }
    }

    write_report(report, ReportFormat::Delimited, cfg.output_dir / "report.tsv");
    write_report(report, ReportFormat::TextTable, cfg.output_dir / "report.txt");
    return report;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (languages.empty()) throw Error("config: no languages");
    if (target.empty()) throw Error("config: no target language");
    find_language(*this, target);
    for (const std::string& s : sources) {
        if (s == target) throw Error("config: target may not be a source");
        find_language(*this, s);
    }
    for (int d : depths) {
        if (d < 0 || d > 4) throw BadDepth("config: depth outside 0..4");
    }
    for (double f : data_fractions) {
        if (f <= 0.0 || f > 1.0) throw Error("config: data fraction outside (0, 1]");
    }
    if (seeds.empty()) throw Error("config: at least one seed required");
    if (embed_dim < 1 || hidden_dim < 1) throw Error("config: bad architecture dims");
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad config JSON: ") + e.what());
    }

    fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return base / p; };

    ExperimentConfig cfg;
    try {
        for (const auto& [name, lang] : j.at("languages").items()) {
            LanguagePaths lp;
            lp.name = name;
            lp.train = resolve(lang.at("train").get<std::string>());
            lp.dev = resolve(lang.at("dev").get<std::string>());
            lp.test = resolve(lang.at("test").get<std::string>());
            cfg.languages.push_back(std::move(lp));
        }
        cfg.target = j.at("target").get<std::string>();
        cfg.sources = j.value("sources", std::vector<std::string>{});
        cfg.depths = j.value("depths", std::vector<int>{1});
        if (j.contains("arch")) {
            cfg.embed_dim = j["arch"].value("embed", cfg.embed_dim);
            cfg.hidden_dim = j["arch"].value("hidden", cfg.hidden_dim);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.dropout = t.value("dropout", cfg.train.dropout);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.seq_len = t.value("seq_len", cfg.train.seq_len);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.max_lr_halvings = t.value("max_lr_halvings", cfg.train.max_lr_halvings);
        }
        cfg.data_fractions = j.value("data_fractions", std::vector<double>{});
        cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{1});
        cfg.output_dir = resolve(j.value("output_dir", std::string("out")));
        cfg.vowel_language = j.value("vowels", cfg.vowel_language);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

bool rows_equal(const GridRow& a, const GridRow& b) {
    return a.source == b.source && a.depth == b.depth && a.seed == b.seed &&
           same_value(a.fraction, b.fraction) && same_value(a.dev_ppl, b.dev_ppl) &&
           same_value(a.test_word_ppl, b.test_word_ppl) &&
           same_value(a.test_char_ppl, b.test_char_ppl) && same_value(a.lambda, b.lambda) &&
           same_value(a.interp_test_ppl, b.interp_test_ppl) &&
           same_value(a.mean_cosine, b.mean_cosine) &&
           sanitize(a.error) == sanitize(b.error);
}

GridReport run_transfer_grid(const ExperimentConfig& config) {
    return run(config, {1.0});
}

GridReport run_datasize_sweep(const ExperimentConfig& config) {
    std::vector<double> fractions = config.data_fractions;
    if (fractions.empty()) fractions = {1.0};
    return run(config, fractions);
}

static const char* kColumns[] = {"source", "depth", "seed", "fraction", "dev_ppl",
                                 "test_word_ppl", "test_char_ppl", "lambda",
                                 "interp_test_ppl", "mean_cosine", "error"};

void render_report(const GridReport& report, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::Delimited) {
        for (std::size_t i = 0; i < std::size(kColumns); ++i) {
            out << (i ? "\t" : "") << kColumns[i];
        }
        out << '\n';
        for (const GridRow& r : report.rows) {
            out << r.source << '\t' << r.depth << '\t' << r.seed << '\t'
                << format_double(r.fraction) << '\t' << format_double(r.dev_ppl) << '\t'
                << format_double(r.test_word_ppl) << '\t' << format_double(r.test_char_ppl)
                << '\t' << format_double(r.lambda) << '\t'
                << format_double(r.interp_test_ppl) << '\t' << format_double(r.mean_cosine)
                << '\t' << sanitize(r.error) << '\n';
        }
        return;
    }

    // fixed-width table; best transfer row (lowest test word ppl) marked
    std::size_t best = report.rows.size();
    double best_ppl = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const GridRow& r = report.rows[i];
        if (!r.is_baseline() && r.error.empty() && r.test_word_ppl < best_ppl) {
            best_ppl = r.test_word_ppl;
            best = i;
        }
    }
    auto num = [](double x) {
        if (std::isnan(x)) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", x);
        return std::string(buf);
    };
    out << std::left << std::setw(12) << "source" << std::setw(6) << "l" << std::setw(8)
        << "seed" << std::setw(10) << "frac" << std::setw(12) << "dev_ppl" << std::setw(14)
        << "test_w_ppl" << std::setw(14) << "test_c_ppl" << std::setw(10) << "lambda"
        << std::setw(14) << "interp_ppl" << std::setw(12) << "cosine" << "note\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const GridRow& r = report.rows[i];
        std::string note = !r.error.empty() ? sanitize(r.error) : (i == best ? "*best*" : "");
        out << std::left << std::setw(12) << r.source << std::setw(6) << r.depth
            << std::setw(8) << r.seed << std::setw(10) << num(r.fraction) << std::setw(12)
            << num(r.dev_ppl) << std::setw(14) << num(r.test_word_ppl) << std::setw(14)
            << num(r.test_char_ppl) << std::setw(10) << num(r.lambda) << std::setw(14)
            << num(r.interp_test_ppl) << std::setw(12) << num(r.mean_cosine) << note << '\n';
    }
}

void write_report(const GridReport& report, ReportFormat format, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write report: " + path.string());
    render_report(report, format, out);
}

GridReport parse_report(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty report");
    GridReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != std::size(kColumns)) {
            throw FormatError("report row has " + std::to_string(fields.size()) + " fields");
        }
        GridRow r;
        r.source = fields[0];
        r.depth = std::stoi(fields[1]);
        r.seed = std::stoull(fields[2]);
        r.fraction = parse_double(fields[3]);
        r.dev_ppl = parse_double(fields[4]);
        r.test_word_ppl = parse_double(fields[5]);
        r.test_char_ppl = parse_double(fields[6]);
        r.lambda = parse_double(fields[7]);
        r.interp_test_ppl = parse_double(fields[8]);
        r.mean_cosine = parse_double(fields[9]);
        r.error = fields[10] == "-" ? "" : fields[10];
        report.rows.push_back(std::move(r));
    }
    return report;
}

GridReport read_report(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read report: " + path.string());
    return parse_report(in);
}

}  // namespace clmx

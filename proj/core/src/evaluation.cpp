#include "clmx/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "clmx/errors.hpp"
#include "clmx/network.hpp"

namespace clmx {

namespace {

void check_aligned(const NllStream& a, const NllStream& b) {
    if (a.records.size() != b.records.size()) {
        throw StreamMismatch("streams have different record counts");
    }
    if (a.word_count != b.word_count) throw StreamMismatch("streams have different word counts");
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const TokenRecord& ra = a.records[i];
        const TokenRecord& rb = b.records[i];
        if (ra.token_id != rb.token_id || ra.sentence_index != rb.sentence_index ||
            ra.word_index != rb.word_index) {
            throw StreamMismatch("streams disagree at record " + std::to_string(i));
        }
    }
}

double nll_sum(const NllStream& s) {
    double sum = 0.0;
    for (const TokenRecord& r : s.records) sum += r.nll;
    return sum;
}

// word perplexity of the lambda-mix without materializing the stream
double interpolated_word_ppl(const NllStream& a, const NllStream& b, double lambda) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        double p = lambda * a.records[i].probability + (1.0 - lambda) * b.records[i].probability;
        sum += -std::log(p);
    }
    return std::exp(sum / static_cast<double>(a.word_count));
}

}  // namespace

NllStream score_corpus(const ModelCheckpoint& ckpt, const EncodedCorpus& corpus,
                       const Vocabulary& vocab, const std::set<std::string>& vowel_set,
                       const std::string& vocab_hash, int batch_size, int seq_len) {
    if (!vocab_hash.empty() && !ckpt.vocab_hash.empty() && ckpt.vocab_hash != vocab_hash) {
        throw VocabMismatch("checkpoint was built with a different vocabulary");
    }
    if (ckpt.params.arch.vocab != vocab.size()) {
        throw VocabMismatch("checkpoint vocabulary size differs from the given vocabulary");
    }

    // cache per-id classes
    std::vector<UnitClass> classes;
    classes.reserve(static_cast<std::size_t>(vocab.size()));
    for (int id = 0; id < vocab.size(); ++id) {
        classes.push_back(classify_unit(vocab.unit(id), vowel_set));
    }

    // collect records per (sentence, position), then flatten in corpus order
    std::vector<std::vector<TokenRecord>> per_sentence(corpus.sentences.size());
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        per_sentence[s].resize(corpus.sentences[s].size() - 1);
    }

    for (const Batch& b : make_batches(corpus, batch_size, seq_len, 0, false)) {
        ForwardResult fr = forward(ckpt.params, b, Mode::eval());
        for (int r = 0; r < b.batch_size; ++r) {
            auto [sent, start] = b.row_origin[static_cast<std::size_t>(r)];
            for (int t = 0; t < b.seq_len; ++t) {
                if (!b.masked_in(r, t)) break;
                int position = start + t + 1;  // position of the predicted token
                int target = b.target(r, t);
                TokenRecord rec;
                rec.token_id = target;
                rec.nll = fr.nll.at(r, t);
                rec.probability = fr.cache.probs[static_cast<std::size_t>(t)].at(r, target);
                rec.unit_class = classes[static_cast<std::size_t>(target)];
                rec.sentence_index = static_cast<int>(sent);
                rec.word_index = corpus.word_index_of(sent, position);
                per_sentence[static_cast<std::size_t>(sent)][static_cast<std::size_t>(position - 1)] = rec;
            }
        }
    }

    NllStream stream;
    stream.word_count = corpus.word_count;
    stream.model_id = ckpt.id;
    stream.vocab_hash = ckpt.vocab_hash;
    for (auto& sent : per_sentence) {
        for (TokenRecord& r : sent) stream.records.push_back(r);
    }
    return stream;
}

double word_perplexity(const NllStream& stream) {
    if (stream.word_count <= 0) throw EmptyStream("stream has no words");
    return std::exp(nll_sum(stream) / static_cast<double>(stream.word_count));
}

double char_perplexity(const NllStream& stream) {
    if (stream.records.empty()) throw EmptyStream("stream has no records");
    return std::exp(nll_sum(stream) / static_cast<double>(stream.records.size()));
}

std::map<std::string, ClassPpl> class_perplexity(const NllStream& stream) {
    if (stream.records.empty()) throw EmptyStream("stream has no records");
    std::map<std::string, std::pair<double, long>> sums;
    for (const TokenRecord& r : stream.records) {
        auto& [sum, count] = sums[r.unit_class.code()];
        sum += r.nll;
        ++count;
    }
    std::map<std::string, ClassPpl> out;
    for (const auto& [code, sc] : sums) {
        out[code] = {std::exp(sc.first / static_cast<double>(sc.second)), sc.second};
    }
    return out;
}

PplReport make_ppl_report(const NllStream& stream) {
    PplReport r;
    r.word_ppl = word_perplexity(stream);
    r.char_ppl = char_perplexity(stream);
    r.per_class = class_perplexity(stream);
    return r;
}

std::map<std::string, double> relative_ppl_difference(const PplReport& baseline,
                                                      const PplReport& candidate) {
    std::map<std::string, double> out;
    for (const auto& [code, base] : baseline.per_class) {
        auto it = candidate.per_class.find(code);
        if (it == candidate.per_class.end()) {
            throw MissingClass("class " + code + " missing from candidate report");
        }
        out[code] = 100.0 * (base.ppl - it->second.ppl) / base.ppl;
    }
    for (const auto& [code, unused] : candidate.per_class) {
        (void)unused;
        if (!baseline.per_class.count(code)) {
            throw MissingClass("class " + code + " missing from baseline report");
        }
    }
    return out;
}

NllStream interpolate(const NllStream& a, const NllStream& b, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must be in [0, 1]");
    check_aligned(a, b);
    NllStream out = a;
    out.model_id = "interp(" + a.model_id + "," + b.model_id + ")";
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        double p = lambda * a.records[i].probability + (1.0 - lambda) * b.records[i].probability;
        out.records[i].probability = p;
        out.records[i].nll = -std::log(p);
    }
    return out;
}

LambdaSearchResult optimize_lambda(const NllStream& dev_a, const NllStream& dev_b) {
    check_aligned(dev_a, dev_b);
    auto f = [&](double lam) { return interpolated_word_ppl(dev_a, dev_b, lam); };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-3) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    double mid = 0.5 * (lo + hi);
    LambdaSearchResult best{mid, f(mid)};
    for (double lam : {0.0, 1.0}) {
        double ppl = f(lam);
        if (ppl < best.dev_ppl) best = {lam, ppl};
    }
    return best;
}

void NllStream::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write stream file: " + path.string());
    out << records.size() << ' ' << word_count << ' '
        << (model_id.empty() ? "-" : model_id) << ' '
        << (vocab_hash.empty() ? "-" : vocab_hash) << '\n';
    char buf[128];
    for (const TokenRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%d %.17g %s %d %d\n", r.token_id, r.probability,
                      r.unit_class.code().c_str(), r.sentence_index, r.word_index);
        out << buf;
    }
}

NllStream NllStream::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read stream file: " + path.string());
    NllStream s;
    std::size_t n = 0;
    std::string header;
    if (!std::getline(in, header)) throw FormatError("empty stream file: " + path.string());
    {
        std::istringstream hs(header);
        if (!(hs >> n >> s.word_count >> s.model_id >> s.vocab_hash)) {
            throw FormatError("bad stream header: " + path.string());
        }
        if (s.model_id == "-") s.model_id.clear();
        if (s.vocab_hash == "-") s.vocab_hash.clear();
    }
    s.records.reserve(n);
    std::string code;
    for (std::size_t i = 0; i < n; ++i) {
        TokenRecord r;
        if (!(in >> r.token_id >> r.probability >> code >> r.sentence_index >> r.word_index)) {
            throw TruncatedFile("stream file ends after " + std::to_string(i) + " records");
        }
        if (r.probability <= 0.0 || r.probability > 1.0) {
            throw FormatError("record probability out of (0, 1]");
        }
        r.nll = -std::log(r.probability);
        r.unit_class = UnitClass::from_code(code);
        s.records.push_back(r);
    }
    return s;
}

}  // namespace clmx

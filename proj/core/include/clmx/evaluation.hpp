#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clmx/checkpoint.hpp"
#include "clmx/corpus.hpp"

namespace clmx {

struct TokenRecord {
    int token_id = 0;
    double probability = 0.0;
    double nll = 0.0;  // always -ln(probability)
    UnitClass unit_class;
    int sentence_index = 0;
    int word_index = 0;
};

// Per-token record stream in corpus order; every metric derives from it.
struct NllStream {
    std::vector<TokenRecord> records;
    long word_count = 0;
    std::string model_id;
    std::string vocab_hash;

    void save(const std::filesystem::path& path) const;
    static NllStream load(const std::filesystem::path& path);
};

struct ClassPpl {
    double ppl = 0.0;
    long count = 0;
};

struct PplReport {
    double word_ppl = 0.0;
    double char_ppl = 0.0;
    std::map<std::string, ClassPpl> per_class;  // keyed by class code
};

NllStream score_corpus(const ModelCheckpoint& ckpt, const EncodedCorpus& corpus,
                       const Vocabulary& vocab, const std::set<std::string>& vowel_set,
                       const std::string& vocab_hash, int batch_size = 64,
                       int seq_len = 100);

double word_perplexity(const NllStream& stream);
double char_perplexity(const NllStream& stream);
std::map<std::string, ClassPpl> class_perplexity(const NllStream& stream);
PplReport make_ppl_report(const NllStream& stream);

// Per class: 100 * (baseline - candidate) / baseline, positive = improvement.
std::map<std::string, double> relative_ppl_difference(const PplReport& baseline,
                                                      const PplReport& candidate);

NllStream interpolate(const NllStream& a, const NllStream& b, double lambda);

struct LambdaSearchResult {
    double lambda = 0.0;
    double dev_ppl = 0.0;
};

// Golden-section search for the word-perplexity-minimizing mixture weight,
// tolerance 1e-3 in lambda; both endpoints are evaluated explicitly so the
// result never exceeds the better endpoint.
LambdaSearchResult optimize_lambda(const NllStream& dev_a, const NllStream& dev_b);

}  // namespace clmx

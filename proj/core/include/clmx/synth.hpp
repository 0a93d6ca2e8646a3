#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clmx/matrix.hpp"

namespace clmx {

// Desk-scale surrogate for language relatedness: two character-level Markov
// generators whose transition matrices are mixed by epsilon. epsilon = 0
// means the target shares the source generator exactly; epsilon = 1 means
// an independently drawn generator.
struct SynthSpec {
    int alphabet_size = 18;
    int n_states = 18;
    double relatedness = 0.2;  // epsilon
    int sentences = 100;
    double mean_word_len = 4.0;
    double mean_sent_len = 6.0;
    std::uint64_t seed = 1;
};

// First-order chain over n_states states; state s emits the character
// 'a' + (s % alphabet_size).
struct MarkovChain {
    int n_states = 0;
    int alphabet_size = 0;
    Matrix transitions;  // [n_states x n_states], rows sum to 1

    // stationary distribution over states by power iteration
    std::vector<double> stationary(int iterations = 2000) const;
    // stationary distribution projected onto characters
    std::vector<double> stationary_char_distribution() const;

    char emit(int state) const { return static_cast<char>('a' + state % alphabet_size); }
};

class Rng;

MarkovChain random_chain(int n_states, int alphabet_size, Rng& rng);
MarkovChain mix_chains(const MarkovChain& base, const MarkovChain& other, double epsilon);

// One sentence per line, words separated by single spaces.
std::vector<std::string> sample_corpus(const MarkovChain& chain, int sentences,
                                       double mean_word_len, double mean_sent_len, Rng& rng);

struct SynthPair {
    MarkovChain source_chain;
    MarkovChain target_chain;
    std::vector<std::string> source;
    std::vector<std::string> target;
};

SynthPair generate_synthetic_pair(const SynthSpec& spec);

}  // namespace clmx

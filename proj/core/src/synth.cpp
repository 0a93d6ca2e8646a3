#include "clmx/synth.hpp"

#include <cmath>

#include "clmx/errors.hpp"
#include "clmx/rng.hpp"

namespace clmx {

std::vector<double> MarkovChain::stationary(int iterations) const {
    int n = n_states;
    std::vector<double> pi(static_cast<std::size_t>(n), 1.0 / n);
    std::vector<double> next(static_cast<std::size_t>(n));
    for (int it = 0; it < iterations; ++it) {
        for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(j)] = 0.0;
        for (int i = 0; i < n; ++i) {
            double p = pi[static_cast<std::size_t>(i)];
            const double* row = transitions.row(i);
            for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(j)] += p * row[j];
        }
        double delta = 0.0;
        for (int j = 0; j < n; ++j) {
            delta += std::fabs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]);
        }
        pi.swap(next);
        if (delta < 1e-14) break;
    }
    return pi;
}

std::vector<double> MarkovChain::stationary_char_distribution() const {
    std::vector<double> pi = stationary();
    std::vector<double> chars(static_cast<std::size_t>(alphabet_size), 0.0);
    for (int s = 0; s < n_states; ++s) {
        chars[static_cast<std::size_t>(s % alphabet_size)] += pi[static_cast<std::size_t>(s)];
    }
    return chars;
}

MarkovChain random_chain(int n_states, int alphabet_size, Rng& rng) {
    if (n_states < 1 || alphabet_size < 1 || alphabet_size > 26) {
        throw Error("chain needs 1..26 alphabet characters and at least one state");
    }
    MarkovChain chain;
    chain.n_states = n_states;
    chain.alphabet_size = alphabet_size;
    chain.transitions = Matrix(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
        double* row = chain.transitions.row(i);
        double sum = 0.0;
        for (int j = 0; j < n_states; ++j) {
            // squared uniforms concentrate mass so chains have character
            double u = rng.uniform();
            row[j] = u * u + 1e-4;
            sum += row[j];
        }
        for (int j = 0; j < n_states; ++j) row[j] /= sum;
    }
    return chain;
}

MarkovChain mix_chains(const MarkovChain& base, const MarkovChain& other, double epsilon) {
    if (base.n_states != other.n_states || base.alphabet_size != other.alphabet_size) {
        throw Error("cannot mix chains with different shapes");
    }
    if (epsilon < 0.0 || epsilon > 1.0) throw Error("epsilon must be in [0, 1]");
    MarkovChain out = base;
    for (std::size_t k = 0; k < out.transitions.v.size(); ++k) {
        out.transitions.v[k] = (1.0 - epsilon) * base.transitions.v[k] +
                               epsilon * other.transitions.v[k];
    }
    return out;
}

std::vector<std::string> sample_corpus(const MarkovChain& chain, int sentences,
                                       double mean_word_len, double mean_sent_len, Rng& rng) {
    std::vector<double> start = chain.stationary();
    auto sample_start = [&]() {
        double u = rng.uniform();
        double acc = 0.0;
        for (int s = 0; s < chain.n_states; ++s) {
            acc += start[static_cast<std::size_t>(s)];
            if (u < acc) return s;
        }
        return chain.n_states - 1;
    };
    auto step = [&](int state) {
        double u = rng.uniform();
        double acc = 0.0;
        const double* row = chain.transitions.row(state);
        for (int s = 0; s < chain.n_states; ++s) {
            acc += row[s];
            if (u < acc) return s;
        }
        return chain.n_states - 1;
    };

    std::vector<std::string> lines;
    lines.reserve(static_cast<std::size_t>(sentences));
    for (int i = 0; i < sentences; ++i) {
        int words = rng.geometric(mean_sent_len);
        std::string line;
        int state = sample_start();
        for (int w = 0; w < words; ++w) {
            if (w > 0) line += ' ';
            int len = rng.geometric(mean_word_len);
            for (int k = 0; k < len; ++k) {
                line += chain.emit(state);
                state = step(state);
            }
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

SynthPair generate_synthetic_pair(const SynthSpec& spec) {
    Rng rng(spec.seed);
    SynthPair pair;
    pair.source_chain = random_chain(spec.n_states, spec.alphabet_size, rng);
    MarkovChain independent = random_chain(spec.n_states, spec.alphabet_size, rng);
    pair.target_chain = mix_chains(pair.source_chain, independent, spec.relatedness);
    pair.source = sample_corpus(pair.source_chain, spec.sentences, spec.mean_word_len,
                                spec.mean_sent_len, rng);
    pair.target = sample_corpus(pair.target_chain, spec.sentences, spec.mean_word_len,
                                spec.mean_sent_len, rng);
    return pair;
}

}  // namespace clmx

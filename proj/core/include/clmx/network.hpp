#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clmx/corpus.hpp"
#include "clmx/matrix.hpp"

namespace clmx {

// Network topology: projection -> LSTM -> highway -> softmax. The paper
// dimensions are 200/1000; desk-scale runs use smaller ones with the same
// topology.
struct Arch {
    int vocab = 0;
    int embed = 200;
    int hidden = 1000;

    bool operator==(const Arch&) const = default;
};

// Transfer depth indices: 1 = projection, 2 = LSTM, 3 = highway, 4 = output.
enum : int {
    kLayerEmbedding = 1,
    kLayerLstm = 2,
    kLayerHighway = 3,
    kLayerOutput = 4,
};

struct NamedTensor {
    std::string name;
    int layer;
    Matrix* tensor;
};

struct ModelParams {
    Arch arch;

    Matrix embedding;  // [V x E]

    // gate weights take the concatenated [x, h] input, [(E+H) x H]
    Matrix w_i, w_f, w_o, w_g;
    Matrix b_i, b_f, b_o, b_g;  // [1 x H]

    Matrix w_transform, w_linear;  // [H x H]
    Matrix b_transform, b_linear;  // [1 x H]

    Matrix w_out;  // [H x V]
    Matrix b_out;  // [1 x V]

    ModelParams() = default;
    explicit ModelParams(const Arch& a);

    std::vector<NamedTensor> tensors();
    std::vector<NamedTensor> tensors() const;

    bool operator==(const ModelParams&) const = default;
};

struct Mode {
    bool train = false;
    double dropout_p = 0.0;
    std::uint64_t seed = 0;

    static Mode eval() { return {}; }
    static Mode training(double dropout_p, std::uint64_t seed) { return {true, dropout_p, seed}; }
};

// Per-timestep activations kept for the backward pass.
struct ForwardCache {
    const ModelParams* params = nullptr;
    Batch batch;
    Mode mode;
    // all [B x *] per timestep
    std::vector<Matrix> z;        // [B x (E+H)] concatenated input
    std::vector<Matrix> gate_i, gate_f, gate_o, gate_g;
    std::vector<Matrix> cell, tanh_cell, hidden;
    std::vector<Matrix> drop1;    // scaled dropout mask after LSTM (empty in eval)
    std::vector<Matrix> highway_in, tgate, hpath, highway_out;
    std::vector<Matrix> drop2;    // scaled dropout mask after highway
    std::vector<Matrix> probs;    // [B x V]
};

struct ForwardResult {
    Matrix nll;  // [B x T], 0 at masked positions
    ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const Batch& batch, const Mode& mode);

// Gradients of the summed masked NLL with respect to every parameter.
ModelParams backward(const ModelParams& params, const ForwardCache& cache);

double masked_nll_sum(const Matrix& nll, const Batch& batch);

// Central-difference gradient check over `samples` randomly chosen
// parameters in eval mode; returns the max relative error
// |a - n| / max(|a|, |n|, 1e-8).
double finite_difference_check(ModelParams& params, const Batch& batch, double epsilon,
                               int samples, std::uint64_t seed);

}  // namespace clmx

#pragma once

#include <string>

#include "clmx/checkpoint.hpp"
#include "clmx/matrix.hpp"

namespace clmx {

// Rows of the output layer weight, one per character unit: [V x H].
struct EmbeddingSet {
    Matrix matrix;
    std::string vocab_hash;
};

EmbeddingSet extract_output_embeddings(const ModelCheckpoint& ckpt);

struct AffineMap {
    Matrix w;               // [d x d]
    std::vector<double> b;  // [d]
};

// Least squares with intercept minimizing sum_i ||x_i W + b - y_i||^2,
// solved via normal equations with Tikhonov damping 1e-8 on the Gram
// matrix. Throws DegenerateInput when V < d+1.
AffineMap fit_affine_alignment(const EmbeddingSet& source, const EmbeddingSet& target);

EmbeddingSet apply_alignment(const EmbeddingSet& source, const AffineMap& map);

double alignment_residual(const EmbeddingSet& source, const AffineMap& map,
                          const EmbeddingSet& target);

// Mean over rows of cos(x_i, y_i). Rows that are bitwise equal contribute
// exactly 1; zero-norm rows contribute 0 and are counted unless
// exclude_zero_rows is set.
double mean_cosine_similarity(const EmbeddingSet& aligned, const EmbeddingSet& target,
                              bool exclude_zero_rows = false);

struct AlignmentReport {
    double residual = 0.0;
    double mean_cosine = 0.0;
};

AlignmentReport align_and_compare(const ModelCheckpoint& candidate,
                                  const ModelCheckpoint& baseline);

}  // namespace clmx

#include "clmx/analysis.hpp"

#include <cmath>
#include <cstring>

#include "clmx/errors.hpp"

namespace clmx {

namespace {

constexpr double kDamping = 1e-8;

// in-place Cholesky solve of the SPD system A X = B, where B has
// multiple right-hand-side columns
void cholesky_solve(Matrix& a, Matrix& b) {
    int n = a.rows;
    for (int j = 0; j < n; ++j) {
        double d = a.at(j, j);
        for (int k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
        if (d <= 0.0) throw DegenerateInput("Gram matrix is not positive definite");
        d = std::sqrt(d);
        a.at(j, j) = d;
        for (int i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
            a.at(i, j) = s / d;
        }
    }
    // forward then backward substitution per column
    for (int c = 0; c < b.cols; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = b.at(i, c);
            for (int k = 0; k < i; ++k) s -= a.at(i, k) * b.at(k, c);
            b.at(i, c) = s / a.at(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = b.at(i, c);
            for (int k = i + 1; k < n; ++k) s -= a.at(k, i) * b.at(k, c);
            b.at(i, c) = s / a.at(i, i);
        }
    }
}

}  // namespace

EmbeddingSet extract_output_embeddings(const ModelCheckpoint& ckpt) {
    const Matrix& w = ckpt.params.w_out;  // [H x V]
    EmbeddingSet set;
    set.vocab_hash = ckpt.vocab_hash;
    set.matrix = Matrix(w.cols, w.rows);
    for (int h = 0; h < w.rows; ++h) {
        for (int v = 0; v < w.cols; ++v) set.matrix.at(v, h) = w.at(h, v);
    }
    return set;
}

AffineMap fit_affine_alignment(const EmbeddingSet& source, const EmbeddingSet& target) {
    const Matrix& x = source.matrix;
    const Matrix& y = target.matrix;
    if (!x.same_shape(y)) throw Error("embedding sets have different shapes");
    if (!source.vocab_hash.empty() && !target.vocab_hash.empty() &&
        source.vocab_hash != target.vocab_hash) {
        throw VocabMismatch("embedding sets come from different vocabularies");
    }
    int n = x.rows;
    int d = x.cols;
    if (n < d + 1) throw DegenerateInput("fewer rows than unknowns; system underdetermined");

    // augmented design [X 1]: Gram = Xa^T Xa + damping*I, rhs = Xa^T Y
    Matrix gram(d + 1, d + 1);
    Matrix rhs(d + 1, d);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        const double* yi = y.row(i);
        for (int a = 0; a < d; ++a) {
            double xa = xi[a];
            if (xa != 0.0) {
                double* grow = gram.row(a);
                for (int b = 0; b < d; ++b) grow[b] += xa * xi[b];
                grow[d] += xa;
                double* rrow = rhs.row(a);
                for (int b = 0; b < d; ++b) rrow[b] += xa * yi[b];
            }
        }
        double* glast = gram.row(d);
        for (int b = 0; b < d; ++b) glast[b] += xi[b];
        glast[d] += 1.0;
        double* rlast = rhs.row(d);
        for (int b = 0; b < d; ++b) rlast[b] += yi[b];
    }
    for (int a = 0; a <= d; ++a) gram.at(a, a) += kDamping;

    cholesky_solve(gram, rhs);

    AffineMap map;
    map.w = Matrix(d, d);
    map.b.resize(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) map.w.at(a, b) = rhs.at(a, b);
    }
    for (int b = 0; b < d; ++b) map.b[static_cast<std::size_t>(b)] = rhs.at(d, b);
    return map;
}

EmbeddingSet apply_alignment(const EmbeddingSet& source, const AffineMap& map) {
    EmbeddingSet out;
    out.vocab_hash = source.vocab_hash;
    out.matrix = Matrix(source.matrix.rows, source.matrix.cols);
    matmul_accum(source.matrix, map.w, out.matrix);
    for (int r = 0; r < out.matrix.rows; ++r) {
        double* row = out.matrix.row(r);
        for (int c = 0; c < out.matrix.cols; ++c) row[c] += map.b[static_cast<std::size_t>(c)];
    }
    return out;
}

double alignment_residual(const EmbeddingSet& source, const AffineMap& map,
                          const EmbeddingSet& target) {
    EmbeddingSet mapped = apply_alignment(source, map);
    double sum = 0.0;
    for (std::size_t k = 0; k < mapped.matrix.v.size(); ++k) {
        double d = mapped.matrix.v[k] - target.matrix.v[k];
        sum += d * d;
    }
    return sum;
}

double mean_cosine_similarity(const EmbeddingSet& aligned, const EmbeddingSet& target,
                              bool exclude_zero_rows) {
    const Matrix& x = aligned.matrix;
    const Matrix& y = target.matrix;
    if (!x.same_shape(y)) throw Error("embedding sets have different shapes");
    int d = x.cols;
    double sum = 0.0;
    long counted = 0;
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* yr = y.row(r);
        if (std::memcmp(xr, yr, sizeof(double) * static_cast<std::size_t>(d)) == 0) {
            bool zero = true;
            for (int c = 0; c < d; ++c) {
                if (xr[c] != 0.0) { zero = false; break; }
            }
            if (zero) {
                if (!exclude_zero_rows) ++counted;  // contributes 0
            } else {
                sum += 1.0;
                ++counted;
            }
            continue;
        }
        double dot = 0.0, nx = 0.0, ny = 0.0;
        for (int c = 0; c < d; ++c) {
            dot += xr[c] * yr[c];
            nx += xr[c] * xr[c];
            ny += yr[c] * yr[c];
        }
        if (nx == 0.0 || ny == 0.0) {
            if (!exclude_zero_rows) ++counted;  // cosine defined as 0
            continue;
        }
        double cos = dot / std::sqrt(nx * ny);
        cos = std::min(1.0, std::max(-1.0, cos));
        sum += cos;
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

AlignmentReport align_and_compare(const ModelCheckpoint& candidate,
                                  const ModelCheckpoint& baseline) {
    EmbeddingSet src = extract_output_embeddings(candidate);
    EmbeddingSet tgt = extract_output_embeddings(baseline);
    AffineMap map = fit_affine_alignment(src, tgt);
    AlignmentReport rep;
    rep.residual = alignment_residual(src, map, tgt);
    rep.mean_cosine = mean_cosine_similarity(apply_alignment(src, map), tgt);
    return rep;
}

}  // namespace clmx

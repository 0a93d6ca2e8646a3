#pragma once

#include <cstddef>
#include <vector>

namespace clmx {

// Dense row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return v.size(); }
    void fill(double x) { v.assign(v.size(), x); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Matrix&) const = default;
};

// C += A * B           (A: MxK, B: KxN, C: MxN)
void matmul_accum(const Matrix& a, const Matrix& b, Matrix& c);
// C += A^T * B         (A: MxK, B: MxN, C: KxN)
void matmul_accum_at(const Matrix& a, const Matrix& b, Matrix& c);
// C += A * B^T         (A: MxN, B: KxN, C: MxK)
void matmul_accum_bt(const Matrix& a, const Matrix& b, Matrix& c);

bool all_finite(const Matrix& m);

}  // namespace clmx

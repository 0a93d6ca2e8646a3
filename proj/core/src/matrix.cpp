#include "clmx/matrix.hpp"

#include <cmath>

#include "clmx/errors.hpp"

namespace clmx {

namespace {

void check_shapes(bool ok) {
    if (!ok) throw Error("matmul shape mismatch");
}

}  // namespace

void matmul_accum(const Matrix& a, const Matrix& b, Matrix& c) {
    check_shapes(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
    for (int m = 0; m < a.rows; ++m) {
        const double* arow = a.row(m);
        double* crow = c.row(m);
        for (int k = 0; k < a.cols; ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int n = 0; n < b.cols; ++n) crow[n] += av * brow[n];
        }
    }
}

void matmul_accum_at(const Matrix& a, const Matrix& b, Matrix& c) {
    check_shapes(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
    for (int m = 0; m < a.rows; ++m) {
        const double* arow = a.row(m);
        const double* brow = b.row(m);
        for (int k = 0; k < a.cols; ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            double* crow = c.row(k);
            for (int n = 0; n < b.cols; ++n) crow[n] += av * brow[n];
        }
    }
}

void matmul_accum_bt(const Matrix& a, const Matrix& b, Matrix& c) {
    check_shapes(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
    for (int m = 0; m < a.rows; ++m) {
        const double* arow = a.row(m);
        double* crow = c.row(m);
        for (int k = 0; k < b.rows; ++k) {
            const double* brow = b.row(k);
            double acc = 0.0;
            for (int n = 0; n < a.cols; ++n) acc += arow[n] * brow[n];
            crow[k] += acc;
        }
    }
}

bool all_finite(const Matrix& m) {
    for (double x : m.v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace clmx

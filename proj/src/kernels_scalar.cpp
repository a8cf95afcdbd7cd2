#include "gestgan/kernels.hpp"

#include <algorithm>

// Scalar reference kernels. These define the numeric contract: every SIMD
// backend must reproduce them bitwise (same operation per element, same
// accumulation order over k in matmul).

namespace gestgan::kern {
namespace {

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

// i-k-j loop: for each output row, accumulate rank-1 updates in increasing k.
// Each c[i*n+j] sees round(c + round(a*b)) per k, in order.
void matmul_scalar(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] = crow[j] + av * brow[j];
            }
        }
    }
}

}  // namespace

const KernelTable scalar_table = {
    "scalar", add_scalar, sub_scalar, mul_scalar, scale_scalar, axpy_scalar, matmul_scalar,
};

}  // namespace gestgan::kern

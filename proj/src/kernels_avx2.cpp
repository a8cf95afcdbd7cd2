#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

#include "gestgan/kernels.hpp"

// AVX2 variants. No FMA anywhere: each element must see the same
// round(mul) -> round(add) sequence as the scalar reference so that the
// two backends agree bitwise (TU is also built with -ffp-contract=off).

namespace gestgan::kern {
namespace {

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    }
    for (; i < n; ++i) out[i] = a[i] * s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

// Scalar accumulation for edge tiles; same p-order as the vector body.
inline void matmul_edge(const double* a, const double* b, double* c,
                        std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1,
                        std::size_t k, std::size_t ncols) {
    for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc = acc + a[i * k + p] * b[p * ncols + j];
            }
            c[i * ncols + j] = acc;
        }
    }
}

// 4x8 register tile: 8 accumulators + 2 B vectors + broadcasts stay in ymm.
void matmul_avx2(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t mb = m - m % 4;
    const std::size_t nb = n - n % 8;
    for (std::size_t i0 = 0; i0 < mb; i0 += 4) {
        const double* a0 = a + (i0 + 0) * k;
        const double* a1 = a + (i0 + 1) * k;
        const double* a2 = a + (i0 + 2) * k;
        const double* a3 = a + (i0 + 3) * k;
        for (std::size_t j0 = 0; j0 < nb; j0 += 8) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * n + j0;
                const __m256d b0 = _mm256_loadu_pd(brow);
                const __m256d b1 = _mm256_loadu_pd(brow + 4);
                __m256d av;
                av = _mm256_set1_pd(a0[p]);
                c00 = _mm256_add_pd(c00, _mm256_mul_pd(av, b0));
                c01 = _mm256_add_pd(c01, _mm256_mul_pd(av, b1));
                av = _mm256_set1_pd(a1[p]);
                c10 = _mm256_add_pd(c10, _mm256_mul_pd(av, b0));
                c11 = _mm256_add_pd(c11, _mm256_mul_pd(av, b1));
                av = _mm256_set1_pd(a2[p]);
                c20 = _mm256_add_pd(c20, _mm256_mul_pd(av, b0));
                c21 = _mm256_add_pd(c21, _mm256_mul_pd(av, b1));
                av = _mm256_set1_pd(a3[p]);
                c30 = _mm256_add_pd(c30, _mm256_mul_pd(av, b0));
                c31 = _mm256_add_pd(c31, _mm256_mul_pd(av, b1));
            }
            double* crow = c + i0 * n + j0;
            _mm256_storeu_pd(crow, c00);
            _mm256_storeu_pd(crow + 4, c01);
            _mm256_storeu_pd(crow + n, c10);
            _mm256_storeu_pd(crow + n + 4, c11);
            _mm256_storeu_pd(crow + 2 * n, c20);
            _mm256_storeu_pd(crow + 2 * n + 4, c21);
            _mm256_storeu_pd(crow + 3 * n, c30);
            _mm256_storeu_pd(crow + 3 * n + 4, c31);
        }
        matmul_edge(a, b, c, i0, i0 + 4, nb, n, k, n);
    }
    matmul_edge(a, b, c, mb, m, 0, n, k, n);
}

}  // namespace

const KernelTable avx2_table = {
    "avx2", add_avx2, sub_avx2, mul_avx2, scale_avx2, axpy_avx2, matmul_avx2,
};

}  // namespace gestgan::kern

#endif  // x86_64

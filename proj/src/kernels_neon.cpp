#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

#include "gestgan/kernels.hpp"

// NEON variants (2-wide float64x2). Structured exactly like the AVX2 set:
// mul then add, never vfma, so results match the scalar reference bitwise.

namespace gestgan::kern {
namespace {

void add_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_neon(const double* a, double s, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vs));
    }
    for (; i < n; ++i) out[i] = a[i] * s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

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

// 4x4 register tile (8 accumulators of 2 lanes each).
void matmul_neon(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t mb = m - m % 4;
    const std::size_t nb = n - n % 4;
    for (std::size_t i0 = 0; i0 < mb; i0 += 4) {
        const double* a0 = a + (i0 + 0) * k;
        const double* a1 = a + (i0 + 1) * k;
        const double* a2 = a + (i0 + 2) * k;
        const double* a3 = a + (i0 + 3) * k;
        for (std::size_t j0 = 0; j0 < nb; j0 += 4) {
            float64x2_t c00 = vdupq_n_f64(0.0), c01 = vdupq_n_f64(0.0);
            float64x2_t c10 = vdupq_n_f64(0.0), c11 = vdupq_n_f64(0.0);
            float64x2_t c20 = vdupq_n_f64(0.0), c21 = vdupq_n_f64(0.0);
            float64x2_t c30 = vdupq_n_f64(0.0), c31 = vdupq_n_f64(0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * n + j0;
                const float64x2_t b0 = vld1q_f64(brow);
                const float64x2_t b1 = vld1q_f64(brow + 2);
                float64x2_t av;
                av = vdupq_n_f64(a0[p]);
                c00 = vaddq_f64(c00, vmulq_f64(av, b0));
                c01 = vaddq_f64(c01, vmulq_f64(av, b1));
                av = vdupq_n_f64(a1[p]);
                c10 = vaddq_f64(c10, vmulq_f64(av, b0));
                c11 = vaddq_f64(c11, vmulq_f64(av, b1));
                av = vdupq_n_f64(a2[p]);
                c20 = vaddq_f64(c20, vmulq_f64(av, b0));
                c21 = vaddq_f64(c21, vmulq_f64(av, b1));
                av = vdupq_n_f64(a3[p]);
                c30 = vaddq_f64(c30, vmulq_f64(av, b0));
                c31 = vaddq_f64(c31, vmulq_f64(av, b1));
            }
            double* crow = c + i0 * n + j0;
            vst1q_f64(crow, c00);
            vst1q_f64(crow + 2, c01);
            vst1q_f64(crow + n, c10);
            vst1q_f64(crow + n + 2, c11);
            vst1q_f64(crow + 2 * n, c20);
            vst1q_f64(crow + 2 * n + 2, c21);
            vst1q_f64(crow + 3 * n, c30);
            vst1q_f64(crow + 3 * n + 2, c31);
        }
        matmul_edge(a, b, c, i0, i0 + 4, nb, n, k, n);
    }
    matmul_edge(a, b, c, mb, m, 0, n, k, n);
}

}  // namespace

const KernelTable neon_table = {
    "neon", add_neon, sub_neon, mul_neon, scale_neon, axpy_neon, matmul_neon,
};

}  // namespace gestgan::kern

#endif  // __aarch64__

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gestgan::kern {

// Data-parallel inner loops behind the tensor layer. Every backend computes
// the exact same per-element operation sequence as the scalar reference
// (mul then add, accumulation in increasing k), so results are required to
// be bitwise identical across backends; the equivalence tests assert this.
// Reductions (sum, dot) are deliberately not dispatched: they stay scalar
// in the tensor layer to keep one summation order everywhere.
struct KernelTable {
    const char* name;
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double s, double* out, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
    // c = a(m x k) @ b(k x n), row-major, c overwritten.
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
};

enum class Backend { scalar, avx2, neon };

extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif

// Backends usable on this machine, best first.
std::vector<Backend> supported_backends();

// Active table. First call picks the best supported backend, honoring the
// GESTGAN_KERNELS env var (scalar|avx2|neon) if set.
const KernelTable& active();
Backend active_backend();

// Returns false (and leaves the selection unchanged) if unsupported here.
bool select_backend(Backend b);

std::string backend_name(Backend b);

}  // namespace gestgan::kern

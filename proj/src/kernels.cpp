#include "gestgan/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace gestgan::kern {
namespace {

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* table_for(Backend b) {
    switch (b) {
        case Backend::scalar:
            return &scalar_table;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return &avx2_table;
#else
            return nullptr;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return &neon_table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

Backend initial_backend() {
    if (const char* env = std::getenv("GESTGAN_KERNELS")) {
        const std::string want(env);
        for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
            if (want == backend_name(b) && backend_supported(b)) return b;
        }
    }
    for (Backend b : supported_backends()) return b;
    return Backend::scalar;
}

// Process-wide selection; set once at startup, changed only by tests.
Backend g_backend = [] { return initial_backend(); }();

}  // namespace

std::vector<Backend> supported_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::avx2, Backend::neon, Backend::scalar}) {
        if (backend_supported(b)) out.push_back(b);
    }
    return out;
}

const KernelTable& active() { return *table_for(g_backend); }

Backend active_backend() { return g_backend; }

bool select_backend(Backend b) {
    if (!backend_supported(b)) return false;
    g_backend = b;
    return true;
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    throw std::invalid_argument("unknown backend");
}

}  // namespace gestgan::kern

#include "sparsedet/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace sparsedet::simd {

#if SPARSEDET_HAVE_AVX2
const KernelTable* avx2_kernels_table();  // defined in kernels_avx2.cpp
#else
static const KernelTable* avx2_kernels_table() { return nullptr; }
#endif

const KernelTable* avx2_kernels_if_supported() {
#if SPARSEDET_HAVE_AVX2 && (defined(__x86_64__) || defined(__i386__))
    if (__builtin_cpu_supports("avx2")) return avx2_kernels_table();
#endif
    return nullptr;
}

const KernelTable& active_kernels() {
    static const KernelTable* chosen = [] {
        const char* want = std::getenv("SPARSEDET_SIMD");
        if (want != nullptr && std::strcmp(want, "scalar") == 0)
            return &scalar_kernels();
        const KernelTable* vec = avx2_kernels_if_supported();
        if (want != nullptr && std::strcmp(want, "avx2") == 0 && vec == nullptr)
            return &scalar_kernels();  // requested but unavailable: fall back
        return vec != nullptr ? vec : &scalar_kernels();
    }();
    return *chosen;
}

}  // namespace sparsedet::simd

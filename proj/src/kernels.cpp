// Runtime kernel selection: AVX2 when both the binary and the CPU support
// it, scalar otherwise. ICSAD_KERNELS=scalar|avx2 overrides; force() is the
// programmatic equivalent used by the equivalence tests.

#include "icsad/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "kernels_detail.hpp"

namespace icsad::kern {
namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* usable_avx2() {
    const Kernels* t = detail::avx2_table();
    return (t != nullptr && cpu_has_avx2_fma()) ? t : nullptr;
}

const Kernels* pick_default() {
    if (const char* env = std::getenv("ICSAD_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
        if (std::strcmp(env, "avx2") == 0) {
            if (const Kernels* t = usable_avx2()) return t;
            std::fprintf(stderr,
                         "warning: ICSAD_KERNELS=avx2 but AVX2+FMA is unavailable; "
                         "using scalar kernels\n");
            return &scalar_kernels();
        }
        std::fprintf(stderr, "warning: unknown ICSAD_KERNELS value '%s' ignored\n", env);
    }
    if (const Kernels* t = usable_avx2()) return t;
    return &scalar_kernels();
}

const Kernels*& slot() {
    static const Kernels* active = pick_default();
    return active;
}

}  // namespace

const Kernels* avx2_kernels() { return usable_avx2(); }

const Kernels& active() { return *slot(); }

bool force(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        slot() = &scalar_kernels();
        return true;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (const Kernels* t = usable_avx2()) {
            slot() = t;
            return true;
        }
        return false;
    }
    return false;
}

}  // namespace icsad::kern

#include <cstdlib>
#include <string>

#include "snnforge/error.hpp"
#include "snnforge/kernels.hpp"

namespace snnforge::kernels {

#if defined(SNNFORGE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(SNNFORGE_HAVE_NEON)
const KernelTable& neon_table();
#endif

std::string_view to_string(Isa isa) {
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
    }
    return "?";
}

Isa parse_isa(std::string_view s) {
    if (s == "scalar") return Isa::Scalar;
    if (s == "avx2") return Isa::Avx2;
    if (s == "neon") return Isa::Neon;
    if (s == "auto") return best();
    throw UsageError("unknown ISA '" + std::string(s) + "' (expected scalar, avx2, neon, auto)");
}

bool is_available(Isa isa) {
    switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(SNNFORGE_HAVE_AVX2)
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Isa::Neon:
#if defined(SNNFORGE_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

std::vector<Isa> available() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
        if (is_available(isa)) out.push_back(isa);
    }
    return out;
}

const KernelTable& table(Isa isa) {
    if (!is_available(isa)) {
        throw UsageError("ISA '" + std::string(to_string(isa)) + "' is not available on this machine");
    }
    switch (isa) {
#if defined(SNNFORGE_HAVE_AVX2)
    case Isa::Avx2: return avx2_table();
#endif
#if defined(SNNFORGE_HAVE_NEON)
    case Isa::Neon: return neon_table();
#endif
    default: return scalar_table();
    }
}

Isa best() {
    if (const char* env = std::getenv("SNNFORGE_ISA"); env && *env && std::string_view(env) != "auto") {
        const Isa requested = parse_isa(env);
        if (is_available(requested)) return requested;
    }
    if (is_available(Isa::Avx2)) return Isa::Avx2;
    if (is_available(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
}

const KernelTable& active() {
    static const KernelTable& t = table(best());
    return t;
}

} // namespace snnforge::kernels

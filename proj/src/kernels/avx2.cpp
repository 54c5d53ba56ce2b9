// Every function carries target("avx2") so the TU builds without -mavx2 and
// no shared inline code picks up AVX2 encodings. Reached only after a runtime
// CPU check.

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "snnforge/kernels.hpp"

namespace snnforge::kernels {
namespace {

#define SNNFORGE_AVX2 __attribute__((target("avx2")))

constexpr std::size_t kLanes = 8;

// Byte expansion of an 8-bit lane mask: bit k -> byte k set to 1.
constexpr std::array<std::uint64_t, 256> make_byte_masks() {
    std::array<std::uint64_t, 256> t{};
    for (unsigned m = 0; m < 256; ++m) {
        std::uint64_t v = 0;
        for (unsigned k = 0; k < 8; ++k) {
            if (m & (1u << k)) v |= std::uint64_t{1} << (8 * k);
        }
        t[m] = v;
    }
    return t;
}
constexpr auto kByteMasks = make_byte_masks();

SNNFORGE_AVX2 inline __m256i load(const std::int32_t* p) { return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)); }
SNNFORGE_AVX2 inline void store(std::int32_t* p, __m256i v) { _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), v); }

SNNFORGE_AVX2 inline __m256i clamp(__m256i v, __m256i lo, __m256i hi) { return _mm256_min_epi32(_mm256_max_epi32(v, lo), hi); }

// 32-bit add/sub saturating at INT32 limits; the sign of `a` picks the limit on overflow.
SNNFORGE_AVX2 inline __m256i sat_limit(__m256i a) {
    return _mm256_xor_si256(_mm256_srai_epi32(a, 31), _mm256_set1_epi32(0x7fffffff));
}

SNNFORGE_AVX2 inline __m256i adds_epi32(__m256i a, __m256i b) {
    const __m256i sum = _mm256_add_epi32(a, b);
    const __m256i ovf = _mm256_and_si256(_mm256_xor_si256(a, sum), _mm256_xor_si256(b, sum));
    return _mm256_blendv_epi8(sum, sat_limit(a), _mm256_srai_epi32(ovf, 31));
}

SNNFORGE_AVX2 inline __m256i subs_epi32(__m256i a, __m256i b) {
    const __m256i diff = _mm256_sub_epi32(a, b);
    const __m256i ovf = _mm256_and_si256(_mm256_xor_si256(a, b), _mm256_xor_si256(a, diff));
    return _mm256_blendv_epi8(diff, sat_limit(a), _mm256_srai_epi32(ovf, 31));
}

SNNFORGE_AVX2 inline std::size_t store_spikes(std::uint8_t* out, __m256i mask) {
    const auto m = static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(mask)));
    const std::uint64_t bytes = kByteMasks[m];
    std::memcpy(out, &bytes, sizeof bytes);
    return static_cast<std::size_t>(std::popcount(m));
}

SNNFORGE_AVX2 void add_sat(std::span<std::int32_t> acc, std::span<const std::int32_t> add, Bounds b) {
    const __m256i lo = _mm256_set1_epi32(b.lo);
    const __m256i hi = _mm256_set1_epi32(b.hi);
    std::size_t i = 0;
    for (; i + kLanes <= acc.size(); i += kLanes) {
        store(&acc[i], clamp(adds_epi32(load(&acc[i]), load(&add[i])), lo, hi));
    }
    scalar_table().add_sat(acc.subspan(i), add.subspan(i), b);
}

SNNFORGE_AVX2 void add_wide(std::span<std::int64_t> acc, std::span<const std::int32_t> add) {
    std::size_t i = 0;
    for (; i + 4 <= acc.size(); i += 4) {
        auto* p = reinterpret_cast<__m256i*>(&acc[i]);
        const __m256i w = _mm256_cvtepi32_epi64(_mm_loadu_si128(reinterpret_cast<const __m128i*>(&add[i])));
        _mm256_storeu_si256(p, _mm256_add_epi64(_mm256_loadu_si256(p), w));
    }
    scalar_table().add_wide(acc.subspan(i), add.subspan(i));
}

SNNFORGE_AVX2 void narrow(std::span<std::int32_t> out, std::span<const std::int64_t> in, Bounds b) {
    const __m256i lo = _mm256_set1_epi64x(b.lo);
    const __m256i hi = _mm256_set1_epi64x(b.hi);
    // Gathers the low dword of each 64-bit lane into the bottom 128 bits.
    const __m256i pick = _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0);
    std::size_t i = 0;
    for (; i + 4 <= out.size(); i += 4) {
        __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(&in[i]));
        v = _mm256_blendv_epi8(v, lo, _mm256_cmpgt_epi64(lo, v));
        v = _mm256_blendv_epi8(v, hi, _mm256_cmpgt_epi64(v, hi));
        const __m256i packed = _mm256_permutevar8x32_epi32(v, pick);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(&out[i]), _mm256_castsi256_si128(packed));
    }
    scalar_table().narrow(out.subspan(i), in.subspan(i), b);
}

SNNFORGE_AVX2 void decay(std::span<std::int32_t> v, int shift) {
    const __m128i count = _mm_cvtsi32_si128(std::min(shift, 31));
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const __m256i x = load(&v[i]);
        store(&v[i], _mm256_sub_epi32(x, _mm256_sra_epi32(x, count)));
    }
    scalar_table().decay(v.subspan(i), shift);
}

SNNFORGE_AVX2 std::size_t fire_subtractive(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                             Bounds b) {
    const __m256i thv = _mm256_set1_epi32(th);
    const __m256i lo = _mm256_set1_epi32(b.lo);
    const __m256i hi = _mm256_set1_epi32(b.hi);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const __m256i x = load(&v[i]);
        const __m256i fire = _mm256_cmpgt_epi32(x, thv);
        const __m256i reset = clamp(subs_epi32(x, thv), lo, hi);
        store(&v[i], _mm256_blendv_epi8(x, reset, fire));
        count += store_spikes(&spikes[i], fire);
    }
    return count + scalar_table().fire_subtractive(v.subspan(i), spikes.subspan(i), th, b);
}

SNNFORGE_AVX2 std::size_t fire_static(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                        std::int32_t v_reset) {
    const __m256i thv = _mm256_set1_epi32(th);
    const __m256i rv = _mm256_set1_epi32(v_reset);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const __m256i x = load(&v[i]);
        const __m256i fire = _mm256_cmpgt_epi32(x, thv);
        store(&v[i], _mm256_blendv_epi8(x, rv, fire));
        count += store_spikes(&spikes[i], fire);
    }
    return count + scalar_table().fire_static(v.subspan(i), spikes.subspan(i), th, v_reset);
}

SNNFORGE_AVX2 bool any(std::span<const std::uint8_t> bits) {
    std::size_t i = 0;
    for (; i + 32 <= bits.size(); i += 32) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(&bits[i]));
        if (!_mm256_testz_si256(x, x)) return true;
    }
    return scalar_table().any(bits.subspan(i));
}

} // namespace

const KernelTable& avx2_table() {
    static constexpr KernelTable t{Isa::Avx2, add_sat, add_wide, narrow, decay,
                                   fire_subtractive, fire_static, any};
    return t;
}

} // namespace snnforge::kernels

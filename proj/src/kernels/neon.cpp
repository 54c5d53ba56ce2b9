// AArch64 only; NEON is architecturally guaranteed there.

#include <arm_neon.h>

#include <algorithm>

#include "snnforge/kernels.hpp"

namespace snnforge::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline int32x4_t clamp(int32x4_t v, int32x4_t lo, int32x4_t hi) { return vminq_s32(vmaxq_s32(v, lo), hi); }

inline std::size_t store_spikes(std::uint8_t* out, uint32x4_t mask) {
    const uint16x4_t half = vmovn_u32(mask);
    const uint8x8_t bytes = vand_u8(vmovn_u16(vcombine_u16(half, half)), vdup_n_u8(1));
    std::uint8_t tmp[8];
    vst1_u8(tmp, bytes);
    std::copy_n(tmp, kLanes, out);
    return static_cast<std::size_t>(tmp[0] + tmp[1] + tmp[2] + tmp[3]);
}

void add_sat(std::span<std::int32_t> acc, std::span<const std::int32_t> add, Bounds b) {
    const int32x4_t lo = vdupq_n_s32(b.lo);
    const int32x4_t hi = vdupq_n_s32(b.hi);
    std::size_t i = 0;
    for (; i + kLanes <= acc.size(); i += kLanes) {
        const int32x4_t s = vqaddq_s32(vld1q_s32(&acc[i]), vld1q_s32(&add[i]));
        vst1q_s32(&acc[i], clamp(s, lo, hi));
    }
    scalar_table().add_sat(acc.subspan(i), add.subspan(i), b);
}

void add_wide(std::span<std::int64_t> acc, std::span<const std::int32_t> add) {
    std::size_t i = 0;
    for (; i + 2 <= acc.size(); i += 2) {
        const int64x2_t w = vmovl_s32(vld1_s32(&add[i]));
        vst1q_s64(&acc[i], vaddq_s64(vld1q_s64(&acc[i]), w));
    }
    scalar_table().add_wide(acc.subspan(i), add.subspan(i));
}

void narrow(std::span<std::int32_t> out, std::span<const std::int64_t> in, Bounds b) {
    const int64x2_t lo = vdupq_n_s64(b.lo);
    const int64x2_t hi = vdupq_n_s64(b.hi);
    std::size_t i = 0;
    for (; i + 2 <= out.size(); i += 2) {
        int64x2_t v = vld1q_s64(&in[i]);
        v = vbslq_s64(vcgtq_s64(lo, v), lo, v);
        v = vbslq_s64(vcgtq_s64(v, hi), hi, v);
        vst1_s32(&out[i], vmovn_s64(v));
    }
    scalar_table().narrow(out.subspan(i), in.subspan(i), b);
}

void decay(std::span<std::int32_t> v, int shift) {
    const int32x4_t count = vdupq_n_s32(-std::min(shift, 31));
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const int32x4_t x = vld1q_s32(&v[i]);
        vst1q_s32(&v[i], vsubq_s32(x, vshlq_s32(x, count)));
    }
    scalar_table().decay(v.subspan(i), shift);
}

std::size_t fire_subtractive(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                             Bounds b) {
    const int32x4_t thv = vdupq_n_s32(th);
    const int32x4_t lo = vdupq_n_s32(b.lo);
    const int32x4_t hi = vdupq_n_s32(b.hi);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const int32x4_t x = vld1q_s32(&v[i]);
        const uint32x4_t fire = vcgtq_s32(x, thv);
        const int32x4_t reset = clamp(vqsubq_s32(x, thv), lo, hi);
        vst1q_s32(&v[i], vbslq_s32(fire, reset, x));
        count += store_spikes(&spikes[i], fire);
    }
    return count + scalar_table().fire_subtractive(v.subspan(i), spikes.subspan(i), th, b);
}

std::size_t fire_static(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                        std::int32_t v_reset) {
    const int32x4_t thv = vdupq_n_s32(th);
    const int32x4_t rv = vdupq_n_s32(v_reset);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + kLanes <= v.size(); i += kLanes) {
        const int32x4_t x = vld1q_s32(&v[i]);
        const uint32x4_t fire = vcgtq_s32(x, thv);
        vst1q_s32(&v[i], vbslq_s32(fire, rv, x));
        count += store_spikes(&spikes[i], fire);
    }
    return count + scalar_table().fire_static(v.subspan(i), spikes.subspan(i), th, v_reset);
}

bool any(std::span<const std::uint8_t> bits) {
    std::size_t i = 0;
    for (; i + 16 <= bits.size(); i += 16) {
        if (vmaxvq_u8(vld1q_u8(&bits[i])) != 0) return true;
    }
    return scalar_table().any(bits.subspan(i));
}

} // namespace

const KernelTable& neon_table() {
    static constexpr KernelTable t{Isa::Neon, add_sat, add_wide, narrow, decay,
                                   fire_subtractive, fire_static, any};
    return t;
}

} // namespace snnforge::kernels

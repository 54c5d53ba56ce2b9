#include <algorithm>

#include "snnforge/kernels.hpp"

namespace snnforge::kernels {
namespace {

std::int32_t clamp64(std::int64_t v, Bounds b) {
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, b.lo, b.hi));
}

void add_sat(std::span<std::int32_t> acc, std::span<const std::int32_t> add, Bounds b) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] = clamp64(std::int64_t{acc[i]} + add[i], b);
    }
}

void add_wide(std::span<std::int64_t> acc, std::span<const std::int32_t> add) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
}

void narrow(std::span<std::int32_t> out, std::span<const std::int64_t> in, Bounds b) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clamp64(in[i], b);
}

void decay(std::span<std::int32_t> v, int shift) {
    const int s = std::min(shift, 31);
    for (auto& x : v) x -= x >> s;
}

std::size_t fire_subtractive(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                             Bounds b) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool fire = v[i] > th;
        spikes[i] = fire;
        if (fire) {
            v[i] = clamp64(std::int64_t{v[i]} - th, b);
            ++count;
        }
    }
    return count;
}

std::size_t fire_static(std::span<std::int32_t> v, std::span<std::uint8_t> spikes, std::int32_t th,
                        std::int32_t v_reset) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool fire = v[i] > th;
        spikes[i] = fire;
        if (fire) {
            v[i] = v_reset;
            ++count;
        }
    }
    return count;
}

bool any(std::span<const std::uint8_t> bits) {
    return std::any_of(bits.begin(), bits.end(), [](std::uint8_t x) { return x != 0; });
}

} // namespace

const KernelTable& scalar_table() {
    static constexpr KernelTable t{Isa::Scalar, add_sat, add_wide, narrow, decay,
                                   fire_subtractive, fire_static, any};
    return t;
}

} // namespace snnforge::kernels

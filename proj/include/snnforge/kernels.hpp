#pragma once

// Lane kernels for the layer update. One lane per neuron: the accelerator
// updates every neuron of a layer concurrently, so the inner loops run over
// neurons with identical control flow.
//
// The scalar table is the reference. SIMD tables must be bit-identical to it
// for every input (tests/test_kernels.cpp checks this on random data).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace snnforge::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);
Isa parse_isa(std::string_view s); // "scalar", "avx2", "neon", "auto"

/// Inclusive clamp range of a lane word.
struct Bounds {
    std::int32_t lo;
    std::int32_t hi;
};

struct KernelTable {
    Isa isa;

    // acc[i] = clamp(acc[i] + add[i]). Operands lie inside b; the sum may not fit in 32 bits.
    void (*add_sat)(std::span<std::int32_t> acc, std::span<const std::int32_t> add, Bounds b);

    // acc[i] += add[i] in 64-bit lanes, no clamping.
    void (*add_wide)(std::span<std::int64_t> acc, std::span<const std::int32_t> add);

    // out[i] = clamp(in[i]).
    void (*narrow)(std::span<std::int32_t> out, std::span<const std::int64_t> in, Bounds b);

    // v[i] = v[i] - (v[i] >> shift), arithmetic shift, shift >= 1.
    void (*decay)(std::span<std::int32_t> v, int shift);

    // spike[i] = v[i] > th; spiking lanes get clamp(v[i] - th). Returns the spike count.
    std::size_t (*fire_subtractive)(std::span<std::int32_t> v, std::span<std::uint8_t> spikes,
                                    std::int32_t th, Bounds b);

    // spike[i] = v[i] > th; spiking lanes are set to v_reset. Returns the spike count.
    std::size_t (*fire_static)(std::span<std::int32_t> v, std::span<std::uint8_t> spikes,
                               std::int32_t th, std::int32_t v_reset);

    // True if any byte is non-zero (the layer's OR-gate).
    bool (*any)(std::span<const std::uint8_t> bits);
};

const KernelTable& scalar_table();

/// ISAs compiled into this binary and supported by the running CPU.
std::vector<Isa> available();
bool is_available(Isa isa);

/// Table for a specific ISA; throws UsageError if it is not available.
const KernelTable& table(Isa isa);

/// Fastest available ISA, unless SNNFORGE_ISA names another one.
Isa best();
const KernelTable& active();

} // namespace snnforge::kernels

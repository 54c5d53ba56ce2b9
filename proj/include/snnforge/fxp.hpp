#pragma once

// Saturating two's complement integer words, bit-compatible with the
// accelerator datapath. Every value is a plain N-bit integer; no fractional
// scale is tracked here (the quantizer owns the one global scale).

#include <algorithm>
#include <cstdint>
#include <string>

namespace snnforge {

inline constexpr int kMaxBits = 32;

class FxpFormat {
public:
    /// Throws UsageError unless 1 <= bits <= 32.
    explicit FxpFormat(int bits);

    constexpr int bits() const noexcept { return bits_; }
    constexpr std::int64_t min() const noexcept { return -(std::int64_t{1} << (bits_ - 1)); }
    constexpr std::int64_t max() const noexcept { return (std::int64_t{1} << (bits_ - 1)) - 1; }
    constexpr bool contains(std::int64_t v) const noexcept { return v >= min() && v <= max(); }
    constexpr std::int32_t clamp(std::int64_t v) const noexcept {
        return static_cast<std::int32_t>(std::clamp(v, min(), max()));
    }

    /// Width 1 only holds {-1, 0}; results at that width are flagged degenerate.
    constexpr bool degenerate() const noexcept { return bits_ <= 1; }

    friend bool operator==(FxpFormat a, FxpFormat b) noexcept { return a.bits_ == b.bits_; }

private:
    int bits_;
};

class FxpValue {
public:
    /// Exact construction; throws UsageError if raw is outside the format range.
    FxpValue(std::int64_t raw, FxpFormat fmt);

    /// Clamping construction.
    static FxpValue saturate(std::int64_t raw, FxpFormat fmt) noexcept;
    static FxpValue zero(FxpFormat fmt) noexcept { return saturate(0, fmt); }

    std::int32_t raw() const noexcept { return raw_; }
    FxpFormat format() const noexcept { return fmt_; }

    friend bool operator==(const FxpValue& a, const FxpValue& b) noexcept {
        return a.raw_ == b.raw_ && a.fmt_ == b.fmt_;
    }

private:
    struct Unchecked {};
    FxpValue(std::int32_t raw, FxpFormat fmt, Unchecked) noexcept : raw_(raw), fmt_(fmt) {}

    std::int32_t raw_;
    FxpFormat fmt_;
};

FxpValue sat_add(FxpValue a, FxpValue b);
FxpValue sat_sub(FxpValue a, FxpValue b);

/// v * (1 - 2^-shift) computed as v - (v >> shift) with an arithmetic
/// (floor) shift. Positive values below 2^shift are frozen by the floor.
FxpValue decay(FxpValue v, int shift);

FxpValue requantize(FxpValue v, FxpFormat target) noexcept;

std::string to_string(FxpValue v);

} // namespace snnforge

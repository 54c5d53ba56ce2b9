#include "snnforge/fxp.hpp"

#include "snnforge/error.hpp"

namespace snnforge {

FxpFormat::FxpFormat(int bits) : bits_(bits) {
    if (bits < 1 || bits > kMaxBits) {
        throw UsageError("fixed-point width must be in [1, 32], got " + std::to_string(bits));
    }
}

FxpValue::FxpValue(std::int64_t raw, FxpFormat fmt) : raw_(0), fmt_(fmt) {
    if (!fmt.contains(raw)) {
        throw UsageError("value " + std::to_string(raw) + " not representable in " +
                         std::to_string(fmt.bits()) + " bits");
    }
    raw_ = static_cast<std::int32_t>(raw);
}

FxpValue FxpValue::saturate(std::int64_t raw, FxpFormat fmt) noexcept {
    return FxpValue(fmt.clamp(raw), fmt, Unchecked{});
}

namespace {

void require_same_format(const FxpValue& a, const FxpValue& b, const char* op) {
    if (!(a.format() == b.format())) {
        throw UsageError(std::string(op) + ": format mismatch (" + std::to_string(a.format().bits()) +
                         " vs " + std::to_string(b.format().bits()) + " bits)");
    }
}

} // namespace

FxpValue sat_add(FxpValue a, FxpValue b) {
    require_same_format(a, b, "sat_add");
    return FxpValue::saturate(std::int64_t{a.raw()} + b.raw(), a.format());
}

FxpValue sat_sub(FxpValue a, FxpValue b) {
    require_same_format(a, b, "sat_sub");
    return FxpValue::saturate(std::int64_t{a.raw()} - b.raw(), a.format());
}

FxpValue decay(FxpValue v, int shift) {
    if (shift <= 0) {
        throw UsageError("decay shift must be >= 1, got " + std::to_string(shift));
    }
    // The result always lies between 0 and v, so the clamp never triggers.
    const std::int64_t raw = v.raw();
    return FxpValue::saturate(raw - (raw >> std::min(shift, 63)), v.format());
}

FxpValue requantize(FxpValue v, FxpFormat target) noexcept {
    return FxpValue::saturate(v.raw(), target);
}

std::string to_string(FxpValue v) {
    return std::to_string(v.raw()) + "@" + std::to_string(v.format().bits()) + "b";
}

} // namespace snnforge

#include "snnforge/neuron.hpp"

#include "snnforge/error.hpp"

namespace snnforge {

std::string_view to_string(NeuronOrder o) {
    switch (o) {
    case NeuronOrder::IF: return "if";
    case NeuronOrder::LIF1: return "lif1";
    case NeuronOrder::LIF2: return "lif2";
    }
    return "?";
}

std::string_view to_string(ResetMode r) {
    return r == ResetMode::Static ? "static" : "subtractive";
}

std::string variant_name(NeuronModel m) {
    return std::string(to_string(m.order)) + "_" + std::string(to_string(m.reset));
}

NeuronOrder parse_order(std::string_view s) {
    if (s == "if") return NeuronOrder::IF;
    if (s == "lif1") return NeuronOrder::LIF1;
    if (s == "lif2") return NeuronOrder::LIF2;
    throw UsageError("unknown neuron model '" + std::string(s) + "' (expected if, lif1, lif2)");
}

ResetMode parse_reset(std::string_view s) {
    if (s == "static" || s == "hard") return ResetMode::Static;
    if (s == "subtractive") return ResetMode::Subtractive;
    throw UsageError("unknown reset mode '" + std::string(s) + "' (expected static, subtractive)");
}

void NeuronSpec::validate() const {
    const auto check_shift = [](const std::optional<int>& s, const char* name) {
        if (s && (*s < 0 || *s > kMaxBits)) {
            throw UsageError(std::string(name) + " must be in [0, 32], got " + std::to_string(*s));
        }
    };
    check_shift(alpha_shift, "alpha_shift");
    check_shift(beta_shift, "beta_shift");

    switch (model.order) {
    case NeuronOrder::LIF2:
        if (!alpha_shift || !beta_shift) throw UsageError("lif2 requires alpha_shift and beta_shift");
        break;
    case NeuronOrder::LIF1:
        if (alpha_shift) throw UsageError("lif1 takes no alpha_shift");
        if (!beta_shift) throw UsageError("lif1 requires beta_shift");
        break;
    case NeuronOrder::IF:
        if (alpha_shift || beta_shift) throw UsageError("if takes no decay shifts");
        break;
    }
    if (!(v_th.format() == neuron_bits) || !(v_reset.format() == neuron_bits)) {
        throw UsageError("v_th and v_reset must use the neuron width");
    }
}

NeuronState NeuronState::initial(const NeuronSpec& spec) {
    NeuronState s{FxpValue::zero(spec.neuron_bits), std::nullopt};
    if (spec.model.order == NeuronOrder::LIF2) s.i_syn = FxpValue::zero(spec.neuron_bits);
    return s;
}

namespace {

FxpValue leak_current(FxpValue i, int alpha_shift) {
    return alpha_shift == 0 ? FxpValue::zero(i.format()) : decay(i, alpha_shift);
}

FxpValue leak_membrane(FxpValue v, int beta_shift) {
    return beta_shift == 0 ? v : decay(v, beta_shift);
}

} // namespace

NeuronState integrate(const NeuronSpec& spec, const NeuronState& state, FxpValue weighted_input) {
    if (!(state.v_m.format() == spec.neuron_bits) || !(weighted_input.format() == spec.neuron_bits)) {
        throw UsageError("integrate: operand widths must equal the neuron width");
    }
    switch (spec.model.order) {
    case NeuronOrder::IF:
        return {sat_add(state.v_m, weighted_input), std::nullopt};
    case NeuronOrder::LIF1:
        return {sat_add(leak_membrane(state.v_m, *spec.beta_shift), weighted_input), std::nullopt};
    case NeuronOrder::LIF2: {
        if (!state.i_syn || !(state.i_syn->format() == spec.neuron_bits)) {
            throw UsageError("integrate: lif2 state requires i_syn at the neuron width");
        }
        const FxpValue i_prev = *state.i_syn;
        const FxpValue i_next = sat_add(leak_current(i_prev, *spec.alpha_shift), weighted_input);
        const FxpValue drive = spec.immediate_current ? i_next : i_prev;
        return {sat_add(leak_membrane(state.v_m, *spec.beta_shift), drive), i_next};
    }
    }
    return state;
}

FireResult fire_and_reset(const NeuronSpec& spec, const NeuronState& state) {
    if (state.v_m.raw() <= spec.v_th.raw()) return {state, false};
    NeuronState next = state;
    next.v_m = spec.model.reset == ResetMode::Static ? spec.v_reset : sat_sub(state.v_m, spec.v_th);
    return {next, true};
}

NeuronSpec reduce_model(const NeuronSpec& spec) {
    NeuronSpec out = spec;
    if (out.model.order == NeuronOrder::LIF2 && out.alpha_shift == 0) {
        out.model.order = NeuronOrder::LIF1;
        out.alpha_shift.reset();
    }
    if (out.model.order == NeuronOrder::LIF1 && out.beta_shift == 0) {
        out.model.order = NeuronOrder::IF;
        out.beta_shift.reset();
    }
    return out;
}

} // namespace snnforge

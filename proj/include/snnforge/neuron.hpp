#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "snnforge/fxp.hpp"

namespace snnforge {

enum class NeuronOrder { IF, LIF1, LIF2 };
enum class ResetMode { Static, Subtractive };

struct NeuronModel {
    NeuronOrder order = NeuronOrder::LIF1;
    ResetMode reset = ResetMode::Subtractive;

    friend bool operator==(const NeuronModel&, const NeuronModel&) = default;
};

/// Short lowercase tag, e.g. "lif1_subtractive". Used for HDL entity names.
std::string variant_name(NeuronModel m);
std::string_view to_string(NeuronOrder o);
std::string_view to_string(ResetMode r);
NeuronOrder parse_order(std::string_view s);
ResetMode parse_reset(std::string_view s);

// Decay constants are stored as shifts k, realizing the factor 1 - 2^-k.
// A shift of 0 removes the stage from the datapath:
//   alpha_shift == 0  ->  alpha = 0, the synaptic current does not persist;
//   beta_shift  == 0  ->  the membrane does not leak (the IF simplification).
struct NeuronSpec {
    NeuronModel model;
    std::optional<int> alpha_shift; // LIF2 only
    std::optional<int> beta_shift;  // LIF1, LIF2
    FxpFormat neuron_bits{16};
    FxpValue v_th = FxpValue::zero(FxpFormat{16});
    FxpValue v_reset = FxpValue::zero(FxpFormat{16});
    // Feed the freshly integrated current into the membrane in the same step
    // (training-framework semantics) instead of the previous step's current.
    bool immediate_current = false;

    /// Throws UsageError if shift presence does not match the model or widths disagree.
    void validate() const;

    friend bool operator==(const NeuronSpec&, const NeuronSpec&) = default;
};

struct NeuronState {
    FxpValue v_m;
    std::optional<FxpValue> i_syn; // LIF2 only

    static NeuronState initial(const NeuronSpec& spec);

    friend bool operator==(const NeuronState&, const NeuronState&) = default;
};

/// One timestep of leak plus integration of an already-accumulated weighted input.
NeuronState integrate(const NeuronSpec& spec, const NeuronState& state, FxpValue weighted_input);

struct FireResult {
    NeuronState state;
    bool spike = false;
};

/// Strict threshold test followed by static or subtractive reset. i_syn is never reset.
FireResult fire_and_reset(const NeuronSpec& spec, const NeuronState& state);

/// Canonically simplest equivalent datapath: LIF2 with alpha = 0 becomes LIF1,
/// LIF1 without leak becomes IF.
NeuronSpec reduce_model(const NeuronSpec& spec);

} // namespace snnforge

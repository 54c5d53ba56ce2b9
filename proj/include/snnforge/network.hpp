#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snnforge/fxp.hpp"
#include "snnforge/kernels.hpp"
#include "snnforge/neuron.hpp"

namespace snnforge {

/// Synaptic weights of one layer, indexed (neuron, input). Stored input-major:
/// the row for one input holds every neuron's weight, which is exactly one
/// word of the synapse memory.
class WeightMatrix {
public:
    WeightMatrix(std::size_t n_neurons, std::size_t n_inputs, FxpFormat fmt);

    std::size_t n_neurons() const noexcept { return n_neurons_; }
    std::size_t n_inputs() const noexcept { return n_inputs_; }
    FxpFormat format() const noexcept { return fmt_; }

    std::int32_t at(std::size_t neuron, std::size_t input) const { return data_[input * n_neurons_ + neuron]; }
    /// Throws UsageError if raw is outside the matrix format.
    void set(std::size_t neuron, std::size_t input, std::int64_t raw);

    std::span<const std::int32_t> input_row(std::size_t input) const {
        return {data_.data() + input * n_neurons_, n_neurons_};
    }

    friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

private:
    std::size_t n_neurons_;
    std::size_t n_inputs_;
    FxpFormat fmt_;
    std::vector<std::int32_t> data_;
};

struct LayerSpec {
    std::size_t n_inputs = 0;
    std::size_t n_neurons = 0;
    NeuronSpec neuron;
    WeightMatrix w_ff{0, 0, FxpFormat{8}};
    std::optional<WeightMatrix> w_fb; // present iff the layer is recurrent

    bool recurrent() const noexcept { return w_fb.has_value(); }
    void validate() const;
};

enum class Propagation { Pipelined, Immediate };
enum class Accumulator { Saturating, Wide };
enum class SkipPolicy { OrGate, Explicit };

/// Per-step cycle overheads of the control units. Calibrated, configurable.
struct CycleCosts {
    std::uint32_t idle = 1; // decay-only step when the layer's OR-gate sees no spike
    std::uint32_t act = 2;  // start/ready turnaround of an active layer step
    std::uint32_t net = 2;  // network CU synchronization per step

    friend bool operator==(const CycleCosts&, const CycleCosts&) = default;
};

struct NetworkSpec {
    std::string name = "net";
    std::vector<LayerSpec> layers;
    std::size_t n_cycles = 1;
    Propagation propagation = Propagation::Pipelined;
    Accumulator accumulator = Accumulator::Saturating;
    CycleCosts costs;

    std::size_t n_inputs() const { return layers.empty() ? 0 : layers.front().n_inputs; }
    std::size_t n_outputs() const { return layers.empty() ? 0 : layers.back().n_neurons; }
    /// Throws UsageError naming the first violated invariant.
    void validate() const;
};

std::string_view to_string(Propagation p);
Propagation parse_propagation(std::string_view s);

/// Binary raster, n_steps rows of n_channels bits.
class SpikeStream {
public:
    SpikeStream() = default;
    SpikeStream(std::size_t n_channels, std::size_t n_steps);

    std::size_t n_channels() const noexcept { return n_channels_; }
    std::size_t n_steps() const noexcept { return n_steps_; }

    bool at(std::size_t step, std::size_t channel) const { return bits_[step * n_channels_ + channel] != 0; }
    void set(std::size_t step, std::size_t channel, bool v) { bits_[step * n_channels_ + channel] = v; }

    std::span<const std::uint8_t> row(std::size_t step) const {
        return {bits_.data() + step * n_channels_, n_channels_};
    }
    std::span<std::uint8_t> row(std::size_t step) { return {bits_.data() + step * n_channels_, n_channels_}; }

    std::size_t count() const;

    friend bool operator==(const SpikeStream&, const SpikeStream&) = default;

private:
    std::size_t n_channels_ = 0;
    std::size_t n_steps_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Fraction of timesteps in which a layer saw at least one spike.
struct LayerActivity {
    double ff = 0.0;
    double fb = 0.0;
    std::optional<double> any; // either input set active; defaults to max(ff, fb) when absent

    double any_or_bound() const { return any.value_or(std::max(ff, fb)); }
};

struct RunReport {
    std::vector<std::uint32_t> out_counts;
    std::uint64_t predicted_cycles = 0;
    std::vector<LayerActivity> per_layer_activity;
    std::optional<SpikeStream> out_spikes;
};

/// Structure-of-arrays state of every neuron in a layer.
struct LayerState {
    std::vector<std::int32_t> v_m;
    std::vector<std::int32_t> i_syn; // empty unless LIF2
    std::vector<std::uint8_t> spikes; // output of the most recent step

    static LayerState initial(const LayerSpec& layer);
    NeuronState neuron(const LayerSpec& layer, std::size_t i) const;

    friend bool operator==(const LayerState&, const LayerState&) = default;
};

struct StepOptions {
    Accumulator accumulator = Accumulator::Saturating;
    SkipPolicy skip = SkipPolicy::OrGate;
    CycleCosts costs;
    const kernels::KernelTable* kernels = nullptr; // nullptr selects kernels::active()
};

struct StepResult {
    std::uint32_t consumed_cycles = 0;
    bool ff_active = false;
    bool fb_active = false;
};

/// Advances one layer by one timestep. Output spikes land in state.spikes.
/// fb_spikes must be empty for feed-forward layers and n_neurons long otherwise.
StepResult step_layer(const LayerSpec& layer, LayerState& state, std::span<const std::uint8_t> in_spikes,
                      std::span<const std::uint8_t> fb_spikes, const StepOptions& opts = {});

/// Called after every layer update with the step index, layer index and new state.
using StepObserver = std::function<void(std::size_t step, std::size_t layer, const LayerState&)>;

struct RunOptions {
    SkipPolicy skip = SkipPolicy::OrGate;
    bool record_output = false;
    StepObserver observer;
    const kernels::KernelTable* kernels = nullptr;
};

/// A validated network with weights pre-requantized to each layer's neuron
/// width. Immutable after construction; run() may be called concurrently.
class Simulator {
public:
    explicit Simulator(NetworkSpec spec);

    const NetworkSpec& spec() const noexcept { return spec_; }
    RunReport run(const SpikeStream& input, const RunOptions& opts = {}) const;

    struct PreparedLayer {
        std::vector<std::int32_t> ff; // input-major, clamped to the neuron width
        std::vector<std::int32_t> fb;
    };

private:
    NetworkSpec spec_;
    std::vector<PreparedLayer> prepared_;
};

RunReport run(const NetworkSpec& spec, const SpikeStream& input, const RunOptions& opts = {});

struct Classification {
    std::size_t index = 0;
    bool no_activity = false;
};

/// Most active output neuron; ties go to the lowest index.
Classification classify(const RunReport& report);

/// Mean per-layer activity over a batch of inputs.
std::vector<LayerActivity> measure_activity(const NetworkSpec& spec, std::span<const SpikeStream> inputs,
                                            unsigned jobs = 0);

double cycles_to_seconds(std::uint64_t cycles, double f_clk_hz);

} // namespace snnforge

#include "snnforge/network.hpp"

#include <algorithm>
#include <numeric>

#include "snnforge/error.hpp"
#include "snnforge/parallel.hpp"

namespace snnforge {

WeightMatrix::WeightMatrix(std::size_t n_neurons, std::size_t n_inputs, FxpFormat fmt)
    : n_neurons_(n_neurons), n_inputs_(n_inputs), fmt_(fmt), data_(n_neurons * n_inputs, 0) {}

void WeightMatrix::set(std::size_t neuron, std::size_t input, std::int64_t raw) {
    if (neuron >= n_neurons_ || input >= n_inputs_) throw UsageError("weight index out of range");
    if (!fmt_.contains(raw)) {
        throw UsageError("weight " + std::to_string(raw) + " not representable in " +
                         std::to_string(fmt_.bits()) + " bits");
    }
    data_[input * n_neurons_ + neuron] = static_cast<std::int32_t>(raw);
}

void LayerSpec::validate() const {
    if (n_inputs == 0 || n_neurons == 0) throw UsageError("layer sizes must be positive");
    neuron.validate();
    if (w_ff.n_neurons() != n_neurons || w_ff.n_inputs() != n_inputs) {
        throw UsageError("feed-forward weights are " + std::to_string(w_ff.n_neurons()) + "x" +
                         std::to_string(w_ff.n_inputs()) + ", expected " + std::to_string(n_neurons) + "x" +
                         std::to_string(n_inputs));
    }
    if (w_fb && (w_fb->n_neurons() != n_neurons || w_fb->n_inputs() != n_neurons)) {
        throw UsageError("feedback weights must be " + std::to_string(n_neurons) + "x" +
                         std::to_string(n_neurons));
    }
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw UsageError("network has no layers");
    if (n_cycles < 1) throw UsageError("n_cycles must be >= 1");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        try {
            layers[l].validate();
        } catch (const UsageError& e) {
            throw UsageError("layer " + std::to_string(l + 1) + ": " + e.what());
        }
        if (l > 0 && layers[l].n_inputs != layers[l - 1].n_neurons) {
            throw UsageError("layer " + std::to_string(l + 1) + " expects " + std::to_string(layers[l].n_inputs) +
                             " inputs but layer " + std::to_string(l) + " has " +
                             std::to_string(layers[l - 1].n_neurons) + " neurons");
        }
    }
}

std::string_view to_string(Propagation p) { return p == Propagation::Pipelined ? "pipelined" : "immediate"; }

Propagation parse_propagation(std::string_view s) {
    if (s == "pipelined") return Propagation::Pipelined;
    if (s == "immediate") return Propagation::Immediate;
    throw UsageError("unknown propagation mode '" + std::string(s) + "' (expected pipelined, immediate)");
}

SpikeStream::SpikeStream(std::size_t n_channels, std::size_t n_steps)
    : n_channels_(n_channels), n_steps_(n_steps), bits_(n_channels * n_steps, 0) {}

std::size_t SpikeStream::count() const {
    return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](auto b) { return b != 0; }));
}

LayerState LayerState::initial(const LayerSpec& layer) {
    LayerState s;
    s.v_m.assign(layer.n_neurons, 0);
    if (layer.neuron.model.order == NeuronOrder::LIF2) s.i_syn.assign(layer.n_neurons, 0);
    s.spikes.assign(layer.n_neurons, 0);
    return s;
}

NeuronState LayerState::neuron(const LayerSpec& layer, std::size_t i) const {
    const FxpFormat fmt = layer.neuron.neuron_bits;
    NeuronState st{FxpValue(v_m.at(i), fmt), std::nullopt};
    if (!i_syn.empty()) st.i_syn = FxpValue(i_syn.at(i), fmt);
    return st;
}

namespace {

struct Scratch {
    std::vector<std::int32_t> acc;
    std::vector<std::int32_t> gated;
    std::vector<std::int32_t> prev_current;
    std::vector<std::int64_t> wide;

    void resize(std::size_t n) {
        acc.resize(n);
        gated.resize(n);
        prev_current.resize(n);
        wide.resize(n);
    }
};

Simulator::PreparedLayer prepare(const LayerSpec& layer) {
    const FxpFormat fmt = layer.neuron.neuron_bits;
    const auto requantized = [&](const WeightMatrix& w) {
        std::vector<std::int32_t> out;
        out.reserve(w.n_inputs() * w.n_neurons());
        for (std::size_t j = 0; j < w.n_inputs(); ++j) {
            for (const std::int32_t x : w.input_row(j)) out.push_back(fmt.clamp(x));
        }
        return out;
    };
    Simulator::PreparedLayer p;
    p.ff = requantized(layer.w_ff);
    if (layer.w_fb) p.fb = requantized(*layer.w_fb);
    return p;
}

// Adds the weight rows selected by `spikes` into the accumulator. Under the
// explicit policy every row passes through the AND-gate, spike or not.
void accumulate(const kernels::KernelTable& k, std::span<const std::int32_t> weights, std::size_t n_neurons,
                std::span<const std::uint8_t> spikes, Accumulator mode, SkipPolicy skip, kernels::Bounds b,
                Scratch& s) {
    const std::span<std::int32_t> acc(s.acc.data(), n_neurons);
    const std::span<std::int64_t> wide(s.wide.data(), n_neurons);
    for (std::size_t j = 0; j < spikes.size(); ++j) {
        std::span<const std::int32_t> row = weights.subspan(j * n_neurons, n_neurons);
        if (skip == SkipPolicy::Explicit) {
            const std::int32_t mask = spikes[j] ? -1 : 0;
            for (std::size_t i = 0; i < n_neurons; ++i) s.gated[i] = row[i] & mask;
            row = {s.gated.data(), n_neurons};
        } else if (!spikes[j]) {
            continue;
        }
        if (mode == Accumulator::Saturating) {
            k.add_sat(acc, row, b);
        } else {
            k.add_wide(wide, row);
        }
    }
}

StepResult step_prepared(const LayerSpec& layer, const Simulator::PreparedLayer& prep, LayerState& state,
                         std::span<const std::uint8_t> in, std::span<const std::uint8_t> fb,
                         const StepOptions& opts, Scratch& s) {
    const std::size_t n = layer.n_neurons;
    if (in.size() != layer.n_inputs) {
        throw UsageError("step_layer: expected " + std::to_string(layer.n_inputs) + " input spikes, got " +
                         std::to_string(in.size()));
    }
    if (fb.size() != (layer.recurrent() ? n : 0)) {
        throw UsageError("step_layer: feedback spikes must be present iff the layer is recurrent");
    }
    const kernels::KernelTable& k = opts.kernels ? *opts.kernels : kernels::active();
    const NeuronSpec& ns = layer.neuron;
    const kernels::Bounds b{static_cast<std::int32_t>(ns.neuron_bits.min()),
                            static_cast<std::int32_t>(ns.neuron_bits.max())};
    s.resize(n);

    StepResult r;
    r.ff_active = k.any(in);
    r.fb_active = layer.recurrent() && k.any(fb);

    std::fill(s.acc.begin(), s.acc.begin() + static_cast<std::ptrdiff_t>(n), 0);
    std::fill(s.wide.begin(), s.wide.begin() + static_cast<std::ptrdiff_t>(n), 0);
    const bool explicit_loop = opts.skip == SkipPolicy::Explicit;
    if (r.ff_active || explicit_loop) accumulate(k, prep.ff, n, in, opts.accumulator, opts.skip, b, s);
    if (r.fb_active || (explicit_loop && layer.recurrent())) {
        accumulate(k, prep.fb, n, fb, opts.accumulator, opts.skip, b, s);
    }
    const std::span<std::int32_t> acc(s.acc.data(), n);
    if (opts.accumulator == Accumulator::Wide) k.narrow(acc, {s.wide.data(), n}, b);

    const std::span<std::int32_t> v(state.v_m);
    const auto leak_membrane = [&] {
        if (*ns.beta_shift != 0) k.decay(v, *ns.beta_shift);
    };
    switch (ns.model.order) {
    case NeuronOrder::IF:
        k.add_sat(v, acc, b);
        break;
    case NeuronOrder::LIF1:
        leak_membrane();
        k.add_sat(v, acc, b);
        break;
    case NeuronOrder::LIF2: {
        const std::span<std::int32_t> cur(state.i_syn);
        const std::span<std::int32_t> prev(s.prev_current.data(), n);
        std::copy(cur.begin(), cur.end(), prev.begin());
        if (*ns.alpha_shift == 0) {
            std::fill(cur.begin(), cur.end(), 0);
        } else {
            k.decay(cur, *ns.alpha_shift);
        }
        k.add_sat(cur, acc, b);
        leak_membrane();
        k.add_sat(v, ns.immediate_current ? std::span<const std::int32_t>(cur) : prev, b);
        break;
    }
    }

    if (ns.model.reset == ResetMode::Subtractive) {
        k.fire_subtractive(v, state.spikes, ns.v_th.raw(), b);
    } else {
        k.fire_static(v, state.spikes, ns.v_th.raw(), ns.v_reset.raw());
    }

    if (!explicit_loop && !r.ff_active && !r.fb_active) {
        r.consumed_cycles = opts.costs.idle;
    } else {
        const bool ff = r.ff_active || explicit_loop;
        const bool fbk = r.fb_active || (explicit_loop && layer.recurrent());
        r.consumed_cycles = static_cast<std::uint32_t>((ff ? layer.n_inputs : 0) + (fbk ? n : 0)) + opts.costs.act;
    }
    return r;
}

} // namespace

StepResult step_layer(const LayerSpec& layer, LayerState& state, std::span<const std::uint8_t> in_spikes,
                      std::span<const std::uint8_t> fb_spikes, const StepOptions& opts) {
    layer.validate();
    if (state.v_m.size() != layer.n_neurons || state.spikes.size() != layer.n_neurons ||
        state.i_syn.size() != (layer.neuron.model.order == NeuronOrder::LIF2 ? layer.n_neurons : 0)) {
        throw UsageError("step_layer: state does not match the layer");
    }
    Scratch s;
    return step_prepared(layer, prepare(layer), state, in_spikes, fb_spikes, opts, s);
}

Simulator::Simulator(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    prepared_.reserve(spec_.layers.size());
    for (const auto& layer : spec_.layers) prepared_.push_back(prepare(layer));
}

RunReport Simulator::run(const SpikeStream& input, const RunOptions& opts) const {
    if (input.n_channels() != spec_.n_inputs()) {
        throw UsageError("input has " + std::to_string(input.n_channels()) + " channels, network expects " +
                         std::to_string(spec_.n_inputs()));
    }
    if (input.n_steps() != spec_.n_cycles) {
        throw UsageError("input has " + std::to_string(input.n_steps()) + " steps, network runs " +
                         std::to_string(spec_.n_cycles));
    }
    const std::size_t n_layers = spec_.layers.size();
    const StepOptions step_opts{spec_.accumulator, opts.skip, spec_.costs, opts.kernels};

    std::vector<LayerState> states;
    std::vector<std::vector<std::uint8_t>> prev_out(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        states.push_back(LayerState::initial(spec_.layers[l]));
        prev_out[l].assign(spec_.layers[l].n_neurons, 0);
    }
    std::vector<std::size_t> ff_steps(n_layers, 0), fb_steps(n_layers, 0), any_steps(n_layers, 0);
    Scratch scratch;

    RunReport report;
    report.out_counts.assign(spec_.n_outputs(), 0);
    if (opts.record_output) report.out_spikes.emplace(spec_.n_outputs(), spec_.n_cycles);

    for (std::size_t step = 0; step < spec_.n_cycles; ++step) {
        std::uint32_t slowest = 0;
        for (std::size_t l = 0; l < n_layers; ++l) {
            const LayerSpec& layer = spec_.layers[l];
            std::span<const std::uint8_t> in;
            if (l == 0) {
                in = input.row(step);
            } else if (spec_.propagation == Propagation::Immediate) {
                in = states[l - 1].spikes;
            } else {
                in = prev_out[l - 1];
            }
            std::span<const std::uint8_t> fb;
            if (layer.recurrent()) fb = prev_out[l];

            const StepResult r = step_prepared(layer, prepared_[l], states[l], in, fb, step_opts, scratch);
            slowest = std::max(slowest, r.consumed_cycles);
            ff_steps[l] += r.ff_active;
            fb_steps[l] += r.fb_active;
            any_steps[l] += r.ff_active || r.fb_active;
            if (opts.observer) opts.observer(step, l, states[l]);
        }
        report.predicted_cycles += std::uint64_t{slowest} + spec_.costs.net;

        const auto& out = states.back().spikes;
        for (std::size_t i = 0; i < out.size(); ++i) {
            report.out_counts[i] += out[i];
            if (report.out_spikes) report.out_spikes->set(step, i, out[i] != 0);
        }
        for (std::size_t l = 0; l < n_layers; ++l) prev_out[l] = states[l].spikes;
    }

    const auto steps = static_cast<double>(spec_.n_cycles);
    for (std::size_t l = 0; l < n_layers; ++l) {
        report.per_layer_activity.push_back({static_cast<double>(ff_steps[l]) / steps,
                                             static_cast<double>(fb_steps[l]) / steps,
                                             static_cast<double>(any_steps[l]) / steps});
    }
    return report;
}

RunReport run(const NetworkSpec& spec, const SpikeStream& input, const RunOptions& opts) {
    return Simulator(spec).run(input, opts);
}

Classification classify(const RunReport& report) {
    if (report.out_counts.empty()) throw UsageError("classify: no output counters");
    const auto it = std::max_element(report.out_counts.begin(), report.out_counts.end());
    return {static_cast<std::size_t>(it - report.out_counts.begin()), *it == 0};
}

std::vector<LayerActivity> measure_activity(const NetworkSpec& spec, std::span<const SpikeStream> inputs,
                                            unsigned jobs) {
    if (inputs.empty()) throw UsageError("measure_activity: empty batch");
    const Simulator sim(spec);
    std::vector<std::vector<LayerActivity>> per_sample(inputs.size());
    parallel_for(inputs.size(), jobs, [&](std::size_t i) { per_sample[i] = sim.run(inputs[i]).per_layer_activity; });

    std::vector<LayerActivity> mean(spec.layers.size(), LayerActivity{0.0, 0.0, 0.0});
    for (const auto& sample : per_sample) {
        for (std::size_t l = 0; l < mean.size(); ++l) {
            mean[l].ff += sample[l].ff;
            mean[l].fb += sample[l].fb;
            *mean[l].any += *sample[l].any;
        }
    }
    const auto n = static_cast<double>(inputs.size());
    for (auto& a : mean) {
        a.ff /= n;
        a.fb /= n;
        *a.any /= n;
    }
    return mean;
}

double cycles_to_seconds(std::uint64_t cycles, double f_clk_hz) {
    if (!(f_clk_hz > 0)) throw UsageError("clock frequency must be positive");
    return static_cast<double>(cycles) / f_clk_hz;
}

} // namespace snnforge

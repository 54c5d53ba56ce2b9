#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnforge/network.hpp"

namespace snnforge {

struct FloatLayer {
    std::size_t n_inputs = 0;
    std::size_t n_neurons = 0;
    NeuronModel model;
    std::optional<double> alpha; // LIF2 only
    std::optional<double> beta;  // LIF1 and LIF2
    double v_th = 1.0;
    double v_reset = 0.0;
    bool immediate_current = false;
    std::vector<double> w_ff;                // row-major [neuron][input]
    std::optional<std::vector<double>> w_fb; // row-major [neuron][neuron]

    double ff(std::size_t neuron, std::size_t input) const { return w_ff[neuron * n_inputs + input]; }
    double fb(std::size_t neuron, std::size_t from) const { return (*w_fb)[neuron * n_neurons + from]; }
    bool recurrent() const noexcept { return w_fb.has_value(); }
};

/// A trained network with real-valued parameters.
struct FloatNetwork {
    std::string name = "net";
    std::vector<FloatLayer> layers;
    std::size_t n_cycles = 1;
    Propagation propagation = Propagation::Pipelined;
    Accumulator accumulator = Accumulator::Saturating;
    CycleCosts costs;

    std::size_t n_inputs() const { return layers.empty() ? 0 : layers.front().n_inputs; }
    std::size_t n_outputs() const { return layers.empty() ? 0 : layers.back().n_neurons; }
    /// Throws UsageError naming the first violated invariant.
    void validate() const;
};

struct BitWidths {
    int neuron = 16;
    int ff = 8;
    int fb = 8;

    friend auto operator<=>(const BitWidths&, const BitWidths&) = default;
};

/// k = round(-log2(1 - c)) clamped to [1, neuron_bits]; the realized constant is 1 - 2^-k.
int round_decay(double c, int neuron_bits = kMaxBits);
inline double realized_decay(int k) { return 1.0 - std::ldexp(1.0, -k); }

struct QuantizeResult {
    NetworkSpec spec;
    int scale_exp = 0; // real = raw * 2^-scale_exp
    std::vector<std::string> warnings;
};

/// One power-of-two scale for the whole network: the largest f such that every
/// weight and threshold, times 2^f, fits its own format. Weights, thresholds
/// and resets are rounded half away from zero and saturated. `scale_exp`
/// overrides the automatic choice.
QuantizeResult quantize(const FloatNetwork& net, BitWidths bits, std::optional<int> scale_exp = std::nullopt);

/// Largest usable scale exponent; nullopt when every parameter is zero.
std::optional<int> choose_scale(const FloatNetwork& net, BitWidths bits);

struct LabeledBatch {
    std::vector<SpikeStream> inputs;
    std::vector<std::size_t> labels;
};

/// Fraction of samples whose classify() index equals the label.
double evaluate(const NetworkSpec& spec, const LabeledBatch& batch, unsigned jobs = 0);

enum class SweepDim { Neuron, FF, FB };
std::string_view to_string(SweepDim d);
SweepDim parse_sweep_dim(std::string_view s);

struct SweepRow {
    SweepDim dim = SweepDim::Neuron;
    int bits = 0;
    BitWidths widths;
    double accuracy = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    BitWidths reference;
    double reference_accuracy = 0.0; // max widths, wide accumulator
    std::vector<std::pair<BitWidths, double>> grid; // joint sweep only
};

struct SweepOptions {
    std::vector<int> widths;                                         // each in [1, 32]
    std::vector<SweepDim> dims{SweepDim::Neuron, SweepDim::FF, SweepDim::FB}; // FB skipped without feedback
    bool joint = false; // also evaluate every (neuron, ff, fb) triple
    unsigned jobs = 0;
};

SweepResult sweep(const FloatNetwork& net, const LabeledBatch& eval, const SweepOptions& opts);

/// Columns: dimension,bits,accuracy. Accuracy printed with 6 decimals.
std::string sweep_csv(const SweepResult& r);
std::string sweep_json(const SweepResult& r);

/// A two-class rate-coded task with hand-set separable weights: class k
/// drives input channels [10k, 10k+10) hard and the rest weakly.
struct SyntheticTask {
    FloatNetwork net;
    LabeledBatch data;
};
SyntheticTask make_synthetic_task(std::size_t n_samples, std::uint64_t seed);

} // namespace snnforge

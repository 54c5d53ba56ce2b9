#include "snnforge/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "json.hpp"

#include "snnforge/codec.hpp"
#include "snnforge/error.hpp"
#include "snnforge/parallel.hpp"

namespace snnforge {

namespace {

constexpr int kMinScaleExp = -60;
constexpr int kMaxScaleExp = 60;

std::string layer_tag(std::size_t l) { return "layer " + std::to_string(l + 1) + ": "; }

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Largest f with |p| * 2^f <= limit.
int fit_exponent(double p, double limit) {
    int f = static_cast<int>(std::floor(std::log2(limit / p)));
    while (std::ldexp(p, f) > limit) --f;
    while (std::ldexp(p, f + 1) <= limit) ++f;
    return f;
}

std::int64_t round_scaled(double v, int f) {
    const double x = std::clamp(std::ldexp(v, f), -0x1.0p62, 0x1.0p62);
    return std::llround(x);
}

} // namespace

void FloatNetwork::validate() const {
    if (layers.empty()) throw UsageError("network has no layers");
    if (n_cycles < 1) throw UsageError("n_cycles must be >= 1");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const FloatLayer& layer = layers[l];
        const std::string tag = layer_tag(l);
        if (layer.n_inputs == 0 || layer.n_neurons == 0) throw UsageError(tag + "layer sizes must be positive");
        if (l > 0 && layer.n_inputs != layers[l - 1].n_neurons) {
            throw UsageError(tag + "expects " + std::to_string(layer.n_inputs) + " inputs but layer " +
                             std::to_string(l) + " has " + std::to_string(layers[l - 1].n_neurons) + " neurons");
        }
        if (layer.w_ff.size() != layer.n_inputs * layer.n_neurons) {
            throw UsageError(tag + "feed-forward weights hold " + std::to_string(layer.w_ff.size()) +
                             " values, expected " + std::to_string(layer.n_inputs * layer.n_neurons));
        }
        if (layer.w_fb && layer.w_fb->size() != layer.n_neurons * layer.n_neurons) {
            throw UsageError(tag + "feedback weights must be " + std::to_string(layer.n_neurons) + "x" +
                             std::to_string(layer.n_neurons));
        }
        if (!finite_all(layer.w_ff) || (layer.w_fb && !finite_all(*layer.w_fb))) {
            throw UsageError(tag + "weights must be finite");
        }
        if (!std::isfinite(layer.v_th) || !std::isfinite(layer.v_reset)) {
            throw UsageError(tag + "threshold and reset must be finite");
        }
        const auto in_unit = [](std::optional<double> c) { return c && *c > 0.0 && *c < 1.0; };
        const bool lif2 = layer.model.order == NeuronOrder::LIF2;
        const bool leaky = layer.model.order != NeuronOrder::IF;
        if (lif2 != layer.alpha.has_value()) throw UsageError(tag + "alpha is required for lif2 and only for lif2");
        if (leaky != layer.beta.has_value()) throw UsageError(tag + "beta is required for lif1/lif2 and only for them");
        if (layer.alpha && !in_unit(layer.alpha)) throw UsageError(tag + "alpha must lie in (0, 1)");
        if (layer.beta && !in_unit(layer.beta)) throw UsageError(tag + "beta must lie in (0, 1)");
    }
}

int round_decay(double c, int neuron_bits) {
    if (!(c > 0.0 && c < 1.0)) throw UsageError("decay constant " + std::to_string(c) + " is outside (0, 1)");
    if (neuron_bits < 1 || neuron_bits > kMaxBits) throw UsageError("neuron width must be in [1, 32]");
    const double k = std::round(-std::log2(1.0 - c));
    return static_cast<int>(std::clamp(k, 1.0, static_cast<double>(neuron_bits)));
}

std::optional<int> choose_scale(const FloatNetwork& net, BitWidths bits) {
    const FxpFormat nf(bits.neuron), ff(bits.ff), bf(bits.fb);
    std::optional<int> best;
    const auto consider = [&](double p, FxpFormat fmt) {
        if (p == 0.0 || fmt.max() <= 0) return; // a 1-bit word cannot hold a positive value at any scale
        const int f = fit_exponent(std::abs(p), static_cast<double>(fmt.max()));
        best = best ? std::min(*best, f) : f;
    };
    for (const auto& layer : net.layers) {
        for (double w : layer.w_ff) consider(w, ff);
        if (layer.w_fb) {
            for (double w : *layer.w_fb) consider(w, bf);
        }
        consider(layer.v_th, nf);
    }
    if (best) best = std::clamp(*best, kMinScaleExp, kMaxScaleExp);
    return best;
}

QuantizeResult quantize(const FloatNetwork& net, BitWidths bits, std::optional<int> scale_exp) {
    net.validate();
    for (int b : {bits.neuron, bits.ff, bits.fb}) {
        if (b < 1 || b > kMaxBits) throw UsageError("bit width " + std::to_string(b) + " is outside [1, 32]");
    }
    QuantizeResult r;
    if (scale_exp) {
        r.scale_exp = *scale_exp;
    } else if (const auto f = choose_scale(net, bits)) {
        r.scale_exp = *f;
    } else {
        r.scale_exp = 0;
        r.warnings.push_back("all weights and thresholds are zero; using scale 1");
    }
    const int f = r.scale_exp;
    const FxpFormat nf(bits.neuron), ff(bits.ff), bf(bits.fb);

    std::size_t clipped = 0;
    const auto to_raw = [&](double v, FxpFormat fmt) {
        const std::int64_t x = round_scaled(v, f);
        clipped += !fmt.contains(x);
        return fmt.clamp(x);
    };

    NetworkSpec& spec = r.spec;
    spec.name = net.name;
    spec.n_cycles = net.n_cycles;
    spec.propagation = net.propagation;
    spec.accumulator = net.accumulator;
    spec.costs = net.costs;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const FloatLayer& fl = net.layers[l];
        LayerSpec layer;
        layer.n_inputs = fl.n_inputs;
        layer.n_neurons = fl.n_neurons;
        layer.neuron.model = fl.model;
        layer.neuron.neuron_bits = nf;
        layer.neuron.immediate_current = fl.immediate_current;
        if (fl.alpha) layer.neuron.alpha_shift = round_decay(*fl.alpha, bits.neuron);
        if (fl.beta) layer.neuron.beta_shift = round_decay(*fl.beta, bits.neuron);
        layer.neuron.v_th = FxpValue(to_raw(fl.v_th, nf), nf);
        layer.neuron.v_reset = FxpValue(to_raw(fl.v_reset, nf), nf);

        layer.w_ff = WeightMatrix(fl.n_neurons, fl.n_inputs, ff);
        for (std::size_t i = 0; i < fl.n_neurons; ++i) {
            for (std::size_t j = 0; j < fl.n_inputs; ++j) layer.w_ff.set(i, j, to_raw(fl.ff(i, j), ff));
        }
        if (fl.w_fb) {
            layer.w_fb.emplace(fl.n_neurons, fl.n_neurons, bf);
            for (std::size_t i = 0; i < fl.n_neurons; ++i) {
                for (std::size_t j = 0; j < fl.n_neurons; ++j) layer.w_fb->set(i, j, to_raw(fl.fb(i, j), bf));
            }
        }
        spec.layers.push_back(std::move(layer));
    }
    if (clipped > 0) r.warnings.push_back(std::to_string(clipped) + " parameters saturated at scale 2^" + std::to_string(f));
    if (nf.degenerate() || ff.degenerate() || bf.degenerate()) r.warnings.push_back("1-bit words hold only {-1, 0}");
    spec.validate();
    return r;
}

double evaluate(const NetworkSpec& spec, const LabeledBatch& batch, unsigned jobs) {
    if (batch.inputs.empty()) throw UsageError("evaluation set is empty");
    if (batch.labels.size() != batch.inputs.size()) throw UsageError("evaluation set has unlabeled samples");
    const Simulator sim(spec);
    std::vector<std::uint8_t> correct(batch.inputs.size(), 0);
    parallel_for(batch.inputs.size(), jobs,
                 [&](std::size_t i) { correct[i] = classify(sim.run(batch.inputs[i])).index == batch.labels[i]; });
    const auto hits = std::count(correct.begin(), correct.end(), 1);
    return static_cast<double>(hits) / static_cast<double>(batch.inputs.size());
}

std::string_view to_string(SweepDim d) {
    switch (d) {
    case SweepDim::Neuron: return "neuron";
    case SweepDim::FF: return "ff";
    case SweepDim::FB: return "fb";
    }
    return "?";
}

SweepDim parse_sweep_dim(std::string_view s) {
    if (s == "neuron") return SweepDim::Neuron;
    if (s == "ff") return SweepDim::FF;
    if (s == "fb") return SweepDim::FB;
    throw UsageError("unknown sweep dimension '" + std::string(s) + "' (expected neuron, ff, fb)");
}

SweepResult sweep(const FloatNetwork& net, const LabeledBatch& eval, const SweepOptions& opts) {
    net.validate();
    if (eval.inputs.empty()) throw UsageError("evaluation set is empty");
    if (eval.labels.size() != eval.inputs.size()) throw UsageError("evaluation set has unlabeled samples");
    if (opts.widths.empty()) throw UsageError("no widths to sweep");
    for (int w : opts.widths) {
        if (w < 1 || w > kMaxBits) throw UsageError("sweep width " + std::to_string(w) + " is outside [1, 32]");
    }
    const bool has_fb = std::any_of(net.layers.begin(), net.layers.end(), [](const auto& l) { return l.recurrent(); });
    const int top = *std::max_element(opts.widths.begin(), opts.widths.end());

    SweepResult result;
    result.reference = {top, top, top};

    // Every distinct width triple is quantized and evaluated once.
    std::map<BitWidths, double> acc;
    const auto with = [&](SweepDim d, int w) {
        BitWidths b = result.reference;
        (d == SweepDim::Neuron ? b.neuron : d == SweepDim::FF ? b.ff : b.fb) = w;
        return b;
    };
    for (SweepDim d : opts.dims) {
        if (d == SweepDim::FB && !has_fb) continue;
        for (int w : opts.widths) acc.emplace(with(d, w), 0.0);
    }
    if (opts.joint) {
        for (int n : opts.widths) {
            for (int f : opts.widths) {
                if (has_fb) {
                    for (int b : opts.widths) acc.emplace(BitWidths{n, f, b}, 0.0);
                } else {
                    acc.emplace(BitWidths{n, f, top}, 0.0);
                }
            }
        }
    }

    std::vector<BitWidths> points;
    std::vector<Simulator> sims;
    for (const auto& [b, _] : acc) {
        points.push_back(b);
        sims.emplace_back(quantize(net, b).spec);
    }
    NetworkSpec wide = quantize(net, result.reference).spec;
    wide.accumulator = Accumulator::Wide;
    sims.emplace_back(std::move(wide));

    const std::size_t n = eval.inputs.size();
    std::vector<std::uint8_t> correct(sims.size() * n, 0);
    parallel_for(sims.size() * n, opts.jobs, [&](std::size_t k) {
        const std::size_t p = k / n, s = k % n;
        correct[k] = classify(sims[p].run(eval.inputs[s])).index == eval.labels[s];
    });
    const auto accuracy = [&](std::size_t p) {
        const auto first = correct.begin() + static_cast<std::ptrdiff_t>(p * n);
        return static_cast<double>(std::count(first, first + static_cast<std::ptrdiff_t>(n), 1)) /
               static_cast<double>(n);
    };
    for (std::size_t p = 0; p < points.size(); ++p) acc[points[p]] = accuracy(p);
    result.reference_accuracy = accuracy(points.size());

    for (SweepDim d : opts.dims) {
        if (d == SweepDim::FB && !has_fb) continue;
        for (int w : opts.widths) result.rows.push_back({d, w, with(d, w), acc.at(with(d, w))});
    }
    if (opts.joint) {
        for (const auto& [b, a] : acc) result.grid.emplace_back(b, a);
    }
    return result;
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = "dimension,bits,accuracy\n";
    char buf[64];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.6f\n", std::string(to_string(row.dim)).c_str(), row.bits, row.accuracy);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "reference,%d,%.6f\n", r.reference.neuron, r.reference_accuracy);
    out += buf;
    return out;
}

std::string sweep_json(const SweepResult& r) {
    using nlohmann::json;
    const auto widths = [](const BitWidths& b) { return json{{"neuron", b.neuron}, {"ff", b.ff}, {"fb", b.fb}}; };
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"dimension", to_string(row.dim)},
                        {"bits", row.bits},
                        {"widths", widths(row.widths)},
                        {"accuracy", row.accuracy}});
    }
    json doc{{"reference", {{"widths", widths(r.reference)}, {"accuracy", r.reference_accuracy}}}, {"rows", rows}};
    if (!r.grid.empty()) {
        json grid = json::array();
        for (const auto& [b, a] : r.grid) grid.push_back({{"widths", widths(b)}, {"accuracy", a}});
        doc["grid"] = grid;
    }
    return doc.dump(2) + "\n";
}

SyntheticTask make_synthetic_task(std::size_t n_samples, std::uint64_t seed) {
    constexpr std::size_t kPerClass = 10, kInputs = 2 * kPerClass, kHidden = 8, kClasses = 2;
    SyntheticTask task;
    FloatNetwork& net = task.net;
    net.name = "synthetic";
    net.n_cycles = 40;

    FloatLayer hidden;
    hidden.n_inputs = kInputs;
    hidden.n_neurons = kHidden;
    hidden.model = {NeuronOrder::LIF1, ResetMode::Subtractive};
    hidden.beta = 0.875;
    hidden.w_ff.assign(kHidden * kInputs, 0.0);
    for (std::size_t h = 0; h < kHidden; ++h) {
        const std::size_t cls = h / (kHidden / kClasses);
        for (std::size_t j = 0; j < kInputs; ++j) {
            const bool own = j / kPerClass == cls;
            // each hidden unit listens to a different subset of its class's channels
            hidden.w_ff[h * kInputs + j] = own ? ((j + h) % 4 == 0 ? 0.0 : 0.3) : -0.15;
        }
    }

    FloatLayer out;
    out.n_inputs = kHidden;
    out.n_neurons = kClasses;
    out.model = {NeuronOrder::LIF1, ResetMode::Subtractive};
    out.beta = 0.875;
    out.w_ff.assign(kClasses * kHidden, 0.0);
    for (std::size_t k = 0; k < kClasses; ++k) {
        for (std::size_t h = 0; h < kHidden; ++h) out.w_ff[k * kHidden + h] = h / (kHidden / kClasses) == k ? 0.5 : -0.25;
    }
    out.w_fb = std::vector<double>{0.0, -0.5, -0.5, 0.0}; // lateral inhibition

    net.layers = {hidden, out};
    net.validate();

    std::vector<std::vector<double>> rates;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::size_t label = codec::splitmix64(seed, i) % kClasses;
        std::vector<double> r(kInputs, 0.05);
        for (std::size_t j = 0; j < kPerClass; ++j) r[label * kPerClass + j] = 0.6;
        rates.push_back(std::move(r));
        task.data.labels.push_back(label);
    }
    task.data.inputs = codec::rate_encode_batch(rates, net.n_cycles, seed + 1);
    return task;
}

} // namespace snnforge

#include <random>

#include "doctest.h"
#include "oracle/reference_snn.hpp"
#include "snnforge/error.hpp"
#include "snnforge/network.hpp"
#include "support/random_net.hpp"

using namespace snnforge;

namespace {

LayerSpec if_layer(std::size_t n_in, std::size_t n_neu, int bits, std::int64_t v_th, bool recurrent = false) {
    LayerSpec l;
    l.n_inputs = n_in;
    l.n_neurons = n_neu;
    l.neuron.model = {NeuronOrder::IF, ResetMode::Subtractive};
    l.neuron.neuron_bits = FxpFormat(bits);
    l.neuron.v_th = FxpValue(v_th, FxpFormat(bits));
    l.neuron.v_reset = FxpValue::zero(FxpFormat(bits));
    l.w_ff = WeightMatrix(n_neu, n_in, FxpFormat(bits));
    if (recurrent) l.w_fb = WeightMatrix(n_neu, n_neu, FxpFormat(bits));
    return l;
}

NetworkSpec single(LayerSpec l, std::size_t n_cycles) {
    NetworkSpec s;
    s.layers.push_back(std::move(l));
    s.n_cycles = n_cycles;
    s.validate();
    return s;
}

// Shifts the raster down by `lag` steps, padding with silence at the end.
SpikeStream pad(const SpikeStream& in, std::size_t extra) {
    SpikeStream out(in.n_channels(), in.n_steps() + extra);
    for (std::size_t t = 0; t < in.n_steps(); ++t) {
        for (std::size_t c = 0; c < in.n_channels(); ++c) out.set(t, c, in.at(t, c));
    }
    return out;
}

} // namespace

TEST_CASE("step_layer: silent input costs the idle overhead") {
    LayerSpec l = if_layer(4, 3, 8, 5);
    LayerState st = LayerState::initial(l);
    const std::vector<std::uint8_t> in(4, 0);
    const auto r = step_layer(l, st, in, {});
    CHECK(r.consumed_cycles == 1);
    CHECK_FALSE(r.ff_active);
    CHECK(st.spikes == std::vector<std::uint8_t>(3, 0));
}

TEST_CASE("step_layer: IF with weight 3 and threshold 5 fires on the second step") {
    LayerSpec l = if_layer(1, 1, 8, 5);
    l.w_ff.set(0, 0, 3);
    LayerState st = LayerState::initial(l);
    const std::vector<std::uint8_t> in{1};
    auto r = step_layer(l, st, in, {});
    CHECK(st.v_m[0] == 3);
    CHECK(st.spikes[0] == 0);
    CHECK(r.consumed_cycles == 1 + 2);
    r = step_layer(l, st, in, {});
    CHECK(st.spikes[0] == 1);
    CHECK(st.v_m[0] == 1);
}

TEST_CASE("step_layer: feedback weights reach the accumulator") {
    LayerSpec l = if_layer(2, 2, 8, 10, true);
    l.w_fb->set(1, 0, -4);
    LayerState st = LayerState::initial(l);
    const std::vector<std::uint8_t> in{0, 0};
    const std::vector<std::uint8_t> fb{1, 0};
    const auto r = step_layer(l, st, in, fb);
    CHECK(st.v_m[1] == -4);
    CHECK(st.v_m[0] == 0);
    CHECK(r.fb_active);
    CHECK(r.consumed_cycles == 2 + 2);
}

TEST_CASE("step_layer rejects mismatched shapes") {
    LayerSpec l = if_layer(2, 2, 8, 10, true);
    LayerState st = LayerState::initial(l);
    const std::vector<std::uint8_t> two{0, 0}, three{0, 0, 0};
    CHECK_THROWS_AS(step_layer(l, st, three, two), UsageError);
    CHECK_THROWS_AS(step_layer(l, st, two, {}), UsageError);
}

TEST_CASE("run: silent input costs idle plus network overhead per step") {
    std::mt19937_64 rng(1);
    testsupport::NetGenOptions o;
    o.allow_recurrent = false;
    for (int it = 0; it < 50; ++it) {
        NetworkSpec spec = testsupport::random_network(rng, o);
        const SpikeStream zero(spec.n_inputs(), spec.n_cycles);
        const auto rep = run(spec, zero);
        CHECK(rep.predicted_cycles == spec.n_cycles * (1 + 2));
        for (auto c : rep.out_counts) CHECK(c == 0);
    }
}

TEST_CASE("run: one-layer network with constant drive") {
    LayerSpec l = if_layer(1, 1, 8, 5);
    l.w_ff.set(0, 0, 3);
    NetworkSpec spec = single(l, 10);
    SpikeStream in(1, 10);
    for (std::size_t t = 0; t < 10; ++t) in.set(t, 0, true);
    RunOptions opts;
    opts.record_output = true;
    const auto rep = run(spec, in, opts);
    // v: 3, 6->1 (spike), 4, 7->2 (spike), 5, 8->3 (spike), 6->1 (spike), 4, 7->2 (spike), 5
    CHECK(rep.out_counts[0] == 5);
    CHECK(rep.predicted_cycles == 10 * (1 + 2 + 2));
    CHECK(rep.per_layer_activity[0].ff == 1.0);
    CHECK(rep.out_spikes->count() == 5);
}

TEST_CASE("run validates input shape") {
    NetworkSpec spec = single(if_layer(3, 2, 8, 5), 4);
    CHECK_THROWS_AS(run(spec, SpikeStream(2, 4)), UsageError);
    CHECK_THROWS_AS(run(spec, SpikeStream(3, 5)), UsageError);
}

TEST_CASE("network validation names the offending layer") {
    NetworkSpec spec;
    spec.layers.push_back(if_layer(4, 3, 8, 5));
    spec.layers.push_back(if_layer(5, 2, 8, 5));
    try {
        spec.validate();
        FAIL("expected a UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("layer 2") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
        CHECK(msg.find("3") != std::string::npos);
    }
}

TEST_CASE("classify") {
    RunReport r;
    r.out_counts = {3, 9, 2};
    CHECK(classify(r).index == 1);
    CHECK_FALSE(classify(r).no_activity);
    r.out_counts = {4, 4, 1};
    CHECK(classify(r).index == 0);
    r.out_counts = {0, 0};
    CHECK(classify(r).index == 0);
    CHECK(classify(r).no_activity);
    r.out_counts.clear();
    CHECK_THROWS_AS(classify(r), UsageError);
}

TEST_CASE("measure_activity") {
    NetworkSpec spec = single(if_layer(100, 4, 8, 5), 100);
    std::vector<SpikeStream> ones(3, SpikeStream(100, 100));
    for (auto& s : ones) {
        for (std::size_t t = 0; t < 100; ++t) {
            for (std::size_t c = 0; c < 100; ++c) s.set(t, c, true);
        }
    }
    CHECK(measure_activity(spec, ones)[0].ff == 1.0);
    std::vector<SpikeStream> zeros(3, SpikeStream(100, 100));
    CHECK(measure_activity(spec, zeros)[0].ff == 0.0);

    std::mt19937_64 rng(4);
    std::vector<SpikeStream> coin;
    for (int i = 0; i < 8; ++i) coin.push_back(testsupport::random_stream(rng, 100, 100, 0.5));
    // P(step active) = 1 - 0.5^100
    CHECK(measure_activity(spec, coin, 2)[0].ff == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<SpikeStream> sparse;
    for (int i = 0; i < 40; ++i) sparse.push_back(testsupport::random_stream(rng, 100, 100, 0.002));
    // 1 - 0.998^100 = 0.1814
    CHECK(measure_activity(spec, sparse)[0].ff == doctest::Approx(0.1814).epsilon(0.08));
    CHECK_THROWS_AS(measure_activity(spec, std::span<const SpikeStream>{}), UsageError);
}

TEST_CASE("matches the 64-bit reference when nothing saturates") {
    std::mt19937_64 rng(77);
    testsupport::NetGenOptions o;
    for (int it = 0; it < 300; ++it) {
        const NetworkSpec spec = testsupport::random_network(rng, o);
        const auto in = testsupport::random_stream(rng, spec.n_inputs(), spec.n_cycles, 0.3);
        const auto ref = oracle::simulate(spec, in);
        REQUIRE(ref.max_abs < (std::int64_t{1} << 23));
        std::size_t mismatches = 0;
        RunOptions opts;
        opts.observer = [&](std::size_t step, std::size_t layer, const LayerState& st) {
            for (std::size_t i = 0; i < st.v_m.size(); ++i) {
                mismatches += st.v_m[i] != ref.v_m[step][layer][i];
                mismatches += st.spikes[i] != ref.spikes[step][layer][i];
                if (!st.i_syn.empty()) mismatches += st.i_syn[i] != ref.i_syn[step][layer][i];
            }
        };
        const auto rep = run(spec, in, opts);
        REQUIRE(mismatches == 0);
        REQUIRE(rep.out_counts == ref.out_counts);
    }
}

TEST_CASE("kernel path agrees with the per-neuron path under saturation") {
    std::mt19937_64 rng(12);
    testsupport::NetGenOptions o;
    o.max_layers = 1;
    for (int it = 0; it < 300; ++it) {
        o.neuron_bits = 3 + static_cast<int>(rng() % 6);
        o.weight_bits = 2 + static_cast<int>(rng() % 10);
        o.weight_mag = 1 << (o.weight_bits - 1);
        o.max_threshold = (1 << (o.neuron_bits - 1)) - 1;
        o.allow_negative_threshold = true;
        const NetworkSpec spec = testsupport::random_network(rng, o);
        const LayerSpec& layer = spec.layers[0];
        const NeuronSpec& ns = layer.neuron;
        const FxpFormat nf = ns.neuron_bits;

        std::vector<NeuronState> cells(layer.n_neurons, NeuronState::initial(ns));
        std::vector<std::uint8_t> prev(layer.n_neurons, 0);
        const auto in = testsupport::random_stream(rng, layer.n_inputs, spec.n_cycles, 0.4);

        std::size_t mismatches = 0;
        RunOptions opts;
        opts.observer = [&](std::size_t step, std::size_t, const LayerState& st) {
            std::vector<std::uint8_t> now(layer.n_neurons, 0);
            for (std::size_t i = 0; i < layer.n_neurons; ++i) {
                FxpValue acc = FxpValue::zero(nf);
                for (std::size_t j = 0; j < layer.n_inputs; ++j) {
                    if (in.at(step, j)) acc = sat_add(acc, FxpValue::saturate(layer.w_ff.at(i, j), nf));
                }
                if (layer.w_fb) {
                    for (std::size_t j = 0; j < layer.n_neurons; ++j) {
                        if (prev[j]) acc = sat_add(acc, FxpValue::saturate(layer.w_fb->at(i, j), nf));
                    }
                }
                const auto fired = fire_and_reset(ns, integrate(ns, cells[i], acc));
                cells[i] = fired.state;
                now[i] = fired.spike;
                mismatches += !(st.neuron(layer, i) == cells[i]);
                mismatches += st.spikes[i] != now[i];
            }
            prev = now;
        };
        run(spec, in, opts);
        REQUIRE(mismatches == 0);
    }
}

TEST_CASE("OR-gate skipping leaves every state unchanged") {
    std::mt19937_64 rng(31);
    testsupport::NetGenOptions o;
    o.neuron_bits = 10;
    o.weight_bits = 8;
    o.weight_mag = 127;
    o.max_threshold = 200;
    o.allow_negative_threshold = true;
    for (int it = 0; it < 200; ++it) {
        const NetworkSpec spec = testsupport::random_network(rng, o);
        const auto in = testsupport::random_stream(rng, spec.n_inputs(), spec.n_cycles, 0.05 * (it % 5));
        std::vector<LayerState> a, b;
        RunOptions skip;
        skip.observer = [&](std::size_t, std::size_t, const LayerState& s) { a.push_back(s); };
        RunOptions full;
        full.skip = SkipPolicy::Explicit;
        full.observer = [&](std::size_t, std::size_t, const LayerState& s) { b.push_back(s); };
        const auto ra = run(spec, in, skip);
        const auto rb = run(spec, in, full);
        REQUIRE(a == b);
        REQUIRE(ra.out_counts == rb.out_counts);
        CHECK(ra.predicted_cycles <= rb.predicted_cycles);
    }
}

TEST_CASE("immediate propagation is pipelined propagation shifted by depth minus one") {
    std::mt19937_64 rng(8);
    testsupport::NetGenOptions o;
    o.allow_immediate = false;
    for (int it = 0; it < 200; ++it) {
        NetworkSpec pipe = testsupport::random_network(rng, o);
        const std::size_t lag = pipe.layers.size() - 1;
        const auto in = testsupport::random_stream(rng, pipe.n_inputs(), pipe.n_cycles, 0.3);
        NetworkSpec imm = pipe;
        imm.propagation = Propagation::Immediate;
        pipe.n_cycles += lag;

        RunOptions opts;
        opts.record_output = true;
        const auto ri = run(imm, in, opts);
        const auto rp = run(pipe, pad(in, lag), opts);
        for (std::size_t t = 0; t < imm.n_cycles; ++t) {
            for (std::size_t c = 0; c < imm.n_outputs(); ++c) {
                REQUIRE(ri.out_spikes->at(t, c) == rp.out_spikes->at(t + lag, c));
            }
        }
    }
}

TEST_CASE("more input spikes never cost fewer cycles in a feed-forward layer") {
    std::mt19937_64 rng(19);
    testsupport::NetGenOptions o;
    o.max_layers = 1;
    o.allow_recurrent = false;
    for (int it = 0; it < 300; ++it) {
        const NetworkSpec spec = testsupport::random_network(rng, o);
        auto in = testsupport::random_stream(rng, spec.n_inputs(), spec.n_cycles, 0.1);
        auto before = run(spec, in).predicted_cycles;
        for (int add = 0; add < 5; ++add) {
            in.set(rng() % spec.n_cycles, rng() % spec.n_inputs(), true);
            const auto after = run(spec, in).predicted_cycles;
            REQUIRE(after >= before);
            before = after;
        }
    }
}

TEST_CASE("runs are deterministic and independent of the kernel table") {
    std::mt19937_64 rng(5);
    testsupport::NetGenOptions o;
    o.neuron_bits = 6;
    o.weight_bits = 5;
    o.weight_mag = 15;
    o.max_threshold = 31;
    for (int it = 0; it < 100; ++it) {
        NetworkSpec spec = testsupport::random_network(rng, o);
        spec.accumulator = it % 2 ? Accumulator::Wide : Accumulator::Saturating;
        const auto in = testsupport::random_stream(rng, spec.n_inputs(), spec.n_cycles, 0.3);
        const Simulator sim(spec);
        RunOptions base;
        base.record_output = true;
        base.kernels = &kernels::scalar_table();
        const auto ref = sim.run(in, base);
        const auto again = sim.run(in, base);
        REQUIRE(again.out_spikes == ref.out_spikes);
        REQUIRE(again.predicted_cycles == ref.predicted_cycles);
        for (auto isa : kernels::available()) {
            RunOptions opts = base;
            opts.kernels = &kernels::table(isa);
            const auto r = sim.run(in, opts);
            REQUIRE(r.out_spikes == ref.out_spikes);
            REQUIRE(r.predicted_cycles == ref.predicted_cycles);
        }
    }
}

TEST_CASE("wide accumulation differs from saturating only when partial sums overflow") {
    LayerSpec l = if_layer(3, 1, 4, 7);
    l.w_ff.set(0, 0, 7);
    l.w_ff.set(0, 1, 7);
    l.w_ff.set(0, 2, -8);
    LayerState sat = LayerState::initial(l), wide = LayerState::initial(l);
    const std::vector<std::uint8_t> in{1, 1, 1};
    step_layer(l, sat, in, {});
    StepOptions w;
    w.accumulator = Accumulator::Wide;
    step_layer(l, wide, in, {}, w);
    // saturating: 7, 7, -1; wide: 14 - 8 = 6
    CHECK(sat.v_m[0] == -1);
    CHECK(wide.v_m[0] == 6);
}

#include <random>

#include "doctest.h"
#include "snnforge/codec.hpp"
#include "snnforge/config.hpp"
#include "snnforge/error.hpp"
#include "support/random_net.hpp"
#include "support/tempdir.hpp"

using namespace snnforge;
using namespace snnforge::codec;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_network(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("minimal IF config gets defaults") {
    const auto cfg = parse_network(R"({
        "n_cycles": 5,
        "bits": {"neuron": 8, "ff": 4},
        "layers": [{"n_inputs": 2, "n_neurons": 1, "model": "if", "v_th": 5,
                    "weights": {"ff": [[3, -1]]}}]
    })");
    REQUIRE_FALSE(cfg.is_float());
    const auto& spec = cfg.fixed();
    CHECK(spec.n_cycles == 5);
    CHECK(spec.propagation == Propagation::Pipelined);
    CHECK(spec.layers[0].neuron.v_reset.raw() == 0);
    CHECK_FALSE(spec.layers[0].recurrent());
    CHECK(spec.layers[0].w_ff.at(0, 1) == -1);
    CHECK(spec.layers[0].w_ff.format().bits() == 4);
    CHECK(spec.layers[0].neuron.neuron_bits.bits() == 8);
    CHECK(cfg.encoding == Encoding::Rate);
}

TEST_CASE("config errors name the field") {
    const auto mismatch = error_of(R"({"n_cycles": 1, "layers": [
        {"n_inputs": 4, "n_neurons": 128, "model": "if", "v_th": 1, "weights": {"ff": {"random": {"seed": 1, "range": [-1, 1]}}}},
        {"n_inputs": 100, "n_neurons": 2, "model": "if", "v_th": 1, "weights": {"ff": {"random": {"seed": 1, "range": [-1, 1]}}}}]})");
    CHECK(mismatch.find("128") != std::string::npos);
    CHECK(mismatch.find("100") != std::string::npos);

    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "if", "v_th": 300,
        "weights": {"ff": [[1]]}}], "bits": {"neuron": 8}})").find("layers[0].v_th") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "if", "v_th": 3,
        "weights": {"ff": [[9]]}}], "bits": {"ff": 4}})").find("layers[0].weights.ff[0][0]") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "lif3", "v_th": 3,
        "weights": {"ff": [[1]]}}]})").find("layers[0].model") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "if", "v_th": 3,
        "weights": {"ff": [[1]]}, "colour": 2}]})").find("unknown key 'colour'") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "encoding": "temporal", "layers": [{"n_inputs": 1, "n_neurons": 1,
        "model": "if", "v_th": 3, "weights": {"ff": [[1]]}}]})").find("unsupported encoding") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "encoding": "population_rank", "layers": [{"n_inputs": 1, "n_neurons": 1,
        "model": "if", "v_th": 3, "weights": {"ff": [[1]]}}]})").find("unsupported encoding") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "if", "v_th": 3,
        "recurrent": true, "weights": {"ff": [[1]]}}]})").find("layers[0].weights") != std::string::npos);
    CHECK(error_of(R"({"n_cycles": 1, "layers": [{"n_inputs": 1, "n_neurons": 1, "model": "lif1", "v_th": 3,
        "weights": {"ff": [[1]]}}]})").find("layers[0]") != std::string::npos);
    CHECK(error_of("{not json").find("invalid JSON") != std::string::npos);
    CHECK(error_of(R"({"layers": []})") != "");
}

TEST_CASE("float configs are detected and quantized on demand") {
    const auto cfg = parse_network(R"({
        "n_cycles": 10,
        "bits": {"neuron": 8, "ff": 4, "fb": 4},
        "layers": [{"n_inputs": 3, "n_neurons": 1, "model": "lif1", "beta": 0.9, "v_th": 1.0,
                    "weights": {"ff": [[-1.0, 0.5, 0.25]]}}]
    })");
    REQUIRE(cfg.is_float());
    const auto spec = cfg.resolve();
    CHECK(spec.layers[0].neuron.beta_shift == 3);
    CHECK(spec.layers[0].w_ff.at(0, 0) == -4);
    CHECK(spec.layers[0].neuron.v_th.raw() == 4);
    const auto wider = cfg.resolve(BitWidths{16, 8, 8});
    CHECK(wider.layers[0].w_ff.format().bits() == 8);
}

TEST_CASE("store then load reproduces the network") {
    std::mt19937_64 rng(6);
    testsupport::TempDir dir;
    testsupport::NetGenOptions o;
    for (int it = 0; it < 60; ++it) {
        o.neuron_bits = 4 + static_cast<int>(rng() % 28);
        o.weight_bits = 2 + static_cast<int>(rng() % 12);
        o.weight_mag = 1 << (o.weight_bits - 1);
        o.max_threshold = static_cast<std::int32_t>(std::min<std::int64_t>(1000, (std::int64_t{1} << (o.neuron_bits - 1)) - 1));
        NetworkSpec spec = testsupport::random_network(rng, o);
        spec.name = "n" + std::to_string(it);
        spec.costs = {1 + static_cast<std::uint32_t>(it % 3), 2, 3};
        StoreOptions opts;
        opts.inline_weights = it % 2 == 0;
        const auto path = dir.path() / (spec.name + ".json");
        store_network(path, spec, opts);
        const auto back = load_network(path);
        REQUIRE_FALSE(back.is_float());
        const auto& b = back.fixed();
        REQUIRE(b.layers.size() == spec.layers.size());
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            CHECK(b.layers[l].w_ff == spec.layers[l].w_ff);
            CHECK(b.layers[l].w_fb == spec.layers[l].w_fb);
            CHECK(b.layers[l].neuron == spec.layers[l].neuron);
        }
        CHECK(b.costs == spec.costs);
        CHECK(b.propagation == spec.propagation);
        CHECK(b.n_cycles == spec.n_cycles);
        // re-export is byte-identical
        CHECK(dump_network(b, opts, spec.name) == dump_network(spec, opts, spec.name));
    }
}

TEST_CASE("weight files referenced from a config") {
    testsupport::TempDir dir;
    WeightFile w{WeightMatrix(2, 3, FxpFormat(4)), 0};
    w.matrix.set(0, 0, 7);
    w.matrix.set(1, 2, -8);
    store_weights(dir.path() / "w.snnw", w);
    write_file(dir.path() / "net.json", R"({"n_cycles": 3, "bits": {"neuron": 8, "ff": 4},
        "layers": [{"n_inputs": 3, "n_neurons": 2, "model": "if", "v_th": 5, "weights": {"ff": "w.snnw"}}]})");
    const auto cfg = load_network(dir.path() / "net.json");
    CHECK(cfg.fixed().layers[0].w_ff == w.matrix);

    write_file(dir.path() / "narrow.json", R"({"n_cycles": 3, "bits": {"neuron": 8, "ff": 3},
        "layers": [{"n_inputs": 3, "n_neurons": 2, "model": "if", "v_th": 5, "weights": {"ff": "w.snnw"}}]})");
    CHECK_THROWS_AS(load_network(dir.path() / "narrow.json"), ConfigError);
    write_file(dir.path() / "missing.json", R"({"n_cycles": 3,
        "layers": [{"n_inputs": 3, "n_neurons": 2, "model": "if", "v_th": 5, "weights": {"ff": "nope.snnw"}}]})");
    CHECK_THROWS_AS(load_network(dir.path() / "missing.json"), ConfigError);
    CHECK_THROWS_AS(load_network(dir.path() / "absent.json"), ConfigError);
}

TEST_CASE("reference configs") {
    const std::filesystem::path data = SNNFORGE_SOURCE_DIR "/data/configs";
    const auto mnist = load_network(data / "mnist.json");
    const auto& m = mnist.fixed();
    REQUIRE(m.layers.size() == 2);
    CHECK(m.layers[0].n_inputs == 784);
    CHECK(m.layers[0].n_neurons == 128);
    CHECK(m.layers[1].n_neurons == 10);
    CHECK(m.n_cycles == 100);
    for (const auto& l : m.layers) {
        CHECK(l.neuron.neuron_bits.bits() == 6);
        CHECK(l.w_ff.format().bits() == 4);
        CHECK(l.neuron.model.reset == ResetMode::Subtractive);
    }

    const auto shd = load_network(data / "shd.json");
    const auto& s = shd.fixed();
    REQUIRE(s.layers.size() == 2);
    CHECK(s.layers[0].n_inputs == 700);
    CHECK(s.layers[0].n_neurons == 200);
    CHECK(s.layers[1].n_neurons == 20);
    for (const auto& l : s.layers) {
        CHECK(l.recurrent());
        CHECK(l.neuron.model.order == NeuronOrder::LIF2);
        CHECK(l.neuron.neuron_bits.bits() == 8);
        CHECK(l.w_ff.format().bits() == 6);
        CHECK(l.w_fb->format().bits() == 5);
    }
}

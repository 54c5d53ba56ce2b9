#include <cstdlib>
#include <random>

#include "doctest.h"
#include "snnforge/codec.hpp"
#include "snnforge/config.hpp"
#include "snnforge/error.hpp"
#include "snnforge/hdlgen.hpp"
#include "support/random_net.hpp"
#include "support/tempdir.hpp"

using namespace snnforge;
using namespace snnforge::hdl;

namespace {

const std::filesystem::path kSource = SNNFORGE_SOURCE_DIR;

NetworkSpec tiny_if() {
    return codec::parse_network(R"({
        "n_cycles": 6,
        "bits": {"neuron": 8, "ff": 4},
        "layers": [{"n_inputs": 2, "n_neurons": 1, "model": "if", "reset": "static", "v_th": 5,
                    "weights": {"ff": [[3, -1]]}}]
    })").fixed();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        out.push_back(text.substr(pos, end - pos));
        pos = end == std::string::npos ? text.size() : end + 1;
    }
    return out;
}

// Line count equals depth and every line is word width for each memory.
void check_geometry(const NetworkSpec& spec, const HdlBundle& b) {
    std::size_t expected_files = 0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        const auto check = [&](bool fb, std::size_t depth, int bits) {
            ++expected_files;
            const auto it = b.memories.find(mem_file_name(l + 1, fb));
            REQUIRE(it != b.memories.end());
            const auto lines = lines_of(it->second);
            CHECK(lines.size() == depth);
            for (const auto& line : lines) {
                CHECK(line.size() == layer.n_neurons * static_cast<std::size_t>(bits));
                CHECK(line.find_first_not_of("01") == std::string::npos);
            }
        };
        check(false, layer.n_inputs, layer.w_ff.format().bits());
        if (layer.w_fb) check(true, layer.n_neurons, layer.w_fb->format().bits());
    }
    CHECK(b.memories.size() == expected_files);
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += x + "\n";
    return s;
}

} // namespace

TEST_CASE("one-layer IF bundle has exactly the expected units") {
    const auto b = generate(tiny_if());
    std::vector<std::string> units;
    for (const auto& [name, text] : b.units) units.push_back(name);
    CHECK(units == std::vector<std::string>{"counters", "layer_1", "network_cu", "neuron_if_static", "testbench", "top"});
    REQUIRE(b.memories.size() == 1);
    CHECK(b.memories.at("layer_1_ff.mem") == "0011\n1111\n");
    CHECK(lint(b).empty());
    CHECK_FALSE(b.stimulus.has_value());
    CHECK(b.file_names().size() == 7);
}

TEST_CASE("emit_meminit examples") {
    WeightMatrix w(2, 1, FxpFormat(4));
    w.set(0, 0, 3);
    w.set(1, 0, -1);
    CHECK(emit_meminit(w) == "00111111\n");
    CHECK(emit_meminit(WeightMatrix(2, 2, FxpFormat(3))) == "000000\n000000\n");
    WeightMatrix wide(1, 1, FxpFormat(32));
    wide.set(0, 0, INT32_MIN);
    CHECK(emit_meminit(wide) == "1" + std::string(31, '0') + "\n");
}

TEST_CASE("parse_meminit inverts emit_meminit") {
    std::mt19937_64 rng(21);
    for (int it = 0; it < 300; ++it) {
        const int bits = 1 + static_cast<int>(rng() % 32);
        const std::size_t rows = 1 + rng() % 9, cols = rng() % 9;
        const auto w = testsupport::random_weights(rng, rows, cols, bits, bits == 32 ? INT32_MAX : 1 << (bits - 1));
        REQUIRE(parse_meminit(emit_meminit(w), rows, FxpFormat(bits)) == w);
    }
    CHECK_THROWS_AS(parse_meminit("0011\n111\n", 1, FxpFormat(4)), ParseError);
    CHECK_THROWS_AS(parse_meminit("0012\n", 1, FxpFormat(4)), ParseError);
    try {
        parse_meminit("0011\n0011\n01x1\n", 1, FxpFormat(4));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("MNIST bundle geometry") {
    const auto spec = codec::load_network(kSource / "data/configs/mnist.json").fixed();
    const auto b = generate(spec);
    CHECK(b.units.contains("layer_1"));
    CHECK(b.units.contains("layer_2"));
    CHECK_FALSE(b.units.contains("layer_3"));
    REQUIRE(b.memories.size() == 2);
    const auto l1 = lines_of(b.memories.at("layer_1_ff.mem"));
    const auto l2 = lines_of(b.memories.at("layer_2_ff.mem"));
    CHECK(l1.size() == 784);
    CHECK(l1[0].size() == 512);
    CHECK(l2.size() == 128);
    CHECK(l2[0].size() == 40);
    CHECK(lint(b).empty());
    // a counter wide enough for 100 steps
    CHECK(b.units.at("counters").find("constant CW    : natural := 8;") != std::string::npos);
}

TEST_CASE("recurrent layer gets a feedback memory and read phase") {
    const auto spec = codec::load_network(kSource / "data/configs/shd.json").fixed();
    const auto b = generate(spec);
    REQUIRE(b.memories.contains("layer_1_fb.mem"));
    CHECK(lines_of(b.memories.at("layer_1_fb.mem")).size() == 200);
    CHECK(lines_of(b.memories.at("layer_1_fb.mem"))[0].size() == 200 * 5);
    CHECK(b.units.at("layer_1").find("when S_FB =>") != std::string::npos);
    CHECK(tiny_if().layers[0].recurrent() == false);
    CHECK(generate(tiny_if()).units.at("layer_1").find("S_FB") == std::string::npos);
    CHECK(lint(b).empty());
    check_geometry(spec, b);
}

TEST_CASE("model reduction selects the cheapest datapath") {
    auto spec = codec::parse_network(R"({
        "n_cycles": 4,
        "bits": {"neuron": 8, "ff": 4},
        "layers": [{"n_inputs": 2, "n_neurons": 2, "model": "lif2", "alpha_shift": 0, "beta_shift": 3, "v_th": 5,
                    "weights": {"ff": [[3, -1], [1, 1]]}},
                   {"n_inputs": 2, "n_neurons": 1, "model": "lif1", "beta_shift": 0, "v_th": 5,
                    "weights": {"ff": [[1, 1]]}}]
    })").fixed();
    const auto b = generate(spec);
    CHECK(b.units.contains("neuron_lif1_subtractive"));
    CHECK(b.units.contains("neuron_if_subtractive"));
    CHECK_FALSE(b.units.contains("neuron_lif2_subtractive"));
    CHECK(b.units.at("layer_1").find("entity work.neuron_lif1_subtractive") != std::string::npos);
    CHECK(lint(b).empty());

    spec.layers[0].neuron.alpha_shift = 2;
    const auto full = generate(spec);
    CHECK(full.units.contains("neuron_lif2_subtractive"));
    CHECK(lint(full).empty());
}

TEST_CASE("testbench and stimulus") {
    const auto spec = tiny_if();
    const SpikeStream zero(2, 6);
    const auto tb = emit_testbench(spec, zero);
    CHECK(tb.expected == std::vector<std::uint32_t>{0});
    CHECK(tb.vhdl.find("constant EXPECTED : count_array := (0 => 0);") != std::string::npos);
    const auto lines = lines_of(tb.stimulus);
    CHECK(lines.size() == spec.n_cycles);
    for (const auto& l : lines) CHECK(l == "00");

    SpikeStream s(2, 6);
    for (std::size_t t = 0; t < 6; ++t) s.set(t, 0, true);
    const auto driven = emit_testbench(spec, s);
    CHECK(driven.expected == run(spec, s).out_counts);
    CHECK(driven.expected[0] > 0);
    CHECK(lines_of(driven.stimulus)[0] == "10");

    const auto b = generate(spec, s);
    CHECK(b.stimulus == driven.stimulus);
    CHECK(b.units.at("testbench") == driven.vhdl);
    CHECK(lint(b).empty());

    CHECK_THROWS_AS(emit_testbench(spec, SpikeStream(3, 6)), UsageError);
    CHECK_THROWS_AS(emit_testbench(spec, SpikeStream(2, 5)), UsageError);
}

TEST_CASE("counter width and unsupported widths") {
    CHECK(counter_width(1) == 1);
    CHECK(counter_width(2) == 2);
    CHECK(counter_width(100) == 8);
    CHECK(counter_width(128) == 8);
    CHECK(counter_width(129) == 9);
    auto spec = tiny_if();
    spec.n_cycles = (std::size_t{1} << 32) + 1;
    CHECK_THROWS_AS(generate(spec), GenerationError);
    spec.n_cycles = std::size_t{1} << 31;
    CHECK_NOTHROW(generate(spec));
}

TEST_CASE("lint catches structural faults") {
    const auto good = generate(tiny_if());
    REQUIRE(lint(good).empty());

    auto missing = good;
    missing.units.erase("neuron_if_static");
    CHECK_FALSE(lint(missing).empty());

    auto no_mem = good;
    no_mem.memories.clear();
    CHECK(join(lint(no_mem)).find("layer_1_ff.mem") != std::string::npos);

    const auto mutate = [&](const std::string& unit, const std::string& from, const std::string& to) {
        auto b = good;
        std::string& text = b.units.at(unit);
        const auto pos = text.find(from);
        REQUIRE(pos != std::string::npos);
        text.replace(pos, from.size(), to);
        return join(lint(b));
    };
    CHECK(mutate("top", "signal spikes_1    : std_logic_vector(0 downto 0)", "signal spikes_1    : std_logic_vector(1 downto 0)")
              .find("out_spikes") != std::string::npos);
    CHECK(mutate("top", "in_req => in_req,", "in_req => in_req, bogus => clk,").find("bogus") != std::string::npos);
    CHECK(mutate("top", "rst => rst, start => layer_start(0)", "start => layer_start(0)").find("rst") != std::string::npos);
    CHECK(mutate("layer_1", "V_TH => \"00000101\"", "V_TH => \"0101\"").find("v_th") != std::string::npos);
    CHECK(mutate("layer_1", "ACC_BITS => 8, ", "").find("acc_bits") != std::string::npos);
    CHECK(mutate("layer_1", "signal weight : signed(7 downto 0)", "signal weight : unsigned(7 downto 0)")
              .find("weight") != std::string::npos);
    CHECK(mutate("counters", "start  : in  std_logic;", "").find("start") != std::string::npos);
    CHECK(mutate("testbench", "ready => ready,", "ready => '1',").find("literal") != std::string::npos);
}

TEST_CASE("random specs: lint, geometry and byte-identical regeneration") {
    std::mt19937_64 rng(33);
    testsupport::NetGenOptions o;
    o.max_layers = 3;
    o.max_neurons = 24;
    o.max_inputs = 24;
    for (int it = 0; it < 200; ++it) {
        o.neuron_bits = 2 + static_cast<int>(rng() % 31);
        o.weight_bits = 1 + static_cast<int>(rng() % 32);
        o.weight_mag = o.weight_bits == 32 ? INT32_MAX : 1 << (o.weight_bits - 1);
        o.max_threshold = static_cast<std::int32_t>(std::min<std::int64_t>(1000, (std::int64_t{1} << (o.neuron_bits - 1)) - 1));
        auto spec = testsupport::random_network(rng, o);
        spec.accumulator = rng() % 2 ? Accumulator::Wide : Accumulator::Saturating;
        const auto b = generate(spec);
        const auto problems = lint(b);
        INFO(join(problems));
        CHECK(problems.empty());
        check_geometry(spec, b);
        CHECK(generate(spec) == b);
        CHECK(b.units.contains("layer_" + std::to_string(spec.layers.size())));
    }
}

TEST_CASE("bundle on disk") {
    testsupport::TempDir dir;
    SpikeStream s(2, 6);
    const auto b = generate(tiny_if(), s);
    b.write(dir.path() / "out");
    for (const auto& f : b.file_names()) CHECK(std::filesystem::exists(dir.path() / "out" / f));
    CHECK(codec::read_file(dir.path() / "out" / "layer_1_ff.mem") == "0011\n1111\n");
    CHECK(codec::read_file(dir.path() / "out" / "stimulus.txt") == "00\n00\n00\n00\n00\n00\n");
}

TEST_CASE("golden bundles for the reference configs") {
    const bool update = std::getenv("SNNFORGE_UPDATE_GOLDEN") != nullptr;
    for (const char* name : {"mnist", "shd"}) {
        const auto spec = codec::load_network(kSource / "data/configs" / (std::string(name) + ".json")).fixed();
        const auto b = generate(spec);
        const auto dir = kSource / "tests/golden" / name;
        if (update) {
            std::filesystem::remove_all(dir);
            b.write(dir);
        }
        std::vector<std::string> on_disk;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) on_disk.push_back(entry.path().filename().string());
        std::sort(on_disk.begin(), on_disk.end());
        CHECK(on_disk == b.file_names());
        for (const auto& [unit, text] : b.units) {
            INFO(name << "/" << unit);
            CHECK(codec::read_file(dir / (unit + ".vhd")) == text);
        }
        for (const auto& [file, text] : b.memories) {
            INFO(name << "/" << file);
            CHECK(codec::read_file(dir / file) == text);
        }
    }
}

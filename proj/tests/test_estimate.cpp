#include <random>

#include "doctest.h"
#include "snnforge/config.hpp"
#include "snnforge/error.hpp"
#include "snnforge/estimate.hpp"
#include "support/random_net.hpp"

using namespace snnforge;

namespace {

const std::filesystem::path kData = SNNFORGE_SOURCE_DIR "/data";

NetworkSpec load(const char* name) { return codec::load_network(kData / "configs" / name).fixed(); }

Device device(std::uint64_t bram) { return Device{"test", bram, std::nullopt, {}}; }

} // namespace

TEST_CASE("bram_count examples") {
    CHECK(bram_count(784, 128 * 4) == 16);
    CHECK(bram_count(128, 10 * 4) == 1);
    CHECK(bram_count(1, 1) == 1);
    CHECK(bram_count(512, 72) == 1);
    CHECK(bram_count(513, 73) == 4);
    CHECK_THROWS_AS(bram_count(0, 8), UsageError);
    CHECK_THROWS_AS(bram_count(8, 8, BramModel{100, 72, 512}), UsageError);
}

TEST_CASE("bram_count is monotone in depth and width") {
    for (std::uint64_t d = 1; d < 1200; d += 7) {
        for (std::uint64_t w = 1; w < 400; w += 5) {
            CHECK(bram_count(d, w) <= bram_count(d + 1, w));
            CHECK(bram_count(d, w) <= bram_count(d, w + 1));
        }
    }
}

TEST_CASE("estimate_network on the reference configs") {
    const auto mnist = estimate_network(load("mnist.json"), device(140));
    CHECK(mnist.total_bram == 17);
    CHECK(mnist.fits);
    const auto shd = estimate_network(load("shd.json"), device(140));
    CHECK(shd.total_bram == 52);
    REQUIRE(shd.memories.size() == 4);
    CHECK(shd.memories[0].bram == 34);
    CHECK(shd.memories[1].bram == 14);
    CHECK(shd.memories[2].bram == 2);
    CHECK(shd.memories[3].bram == 2);
    CHECK_FALSE(estimate_network(load("mnist.json"), device(0)).fits);
}

TEST_CASE("estimate total is the sum of independent memories") {
    std::mt19937_64 rng(2);
    testsupport::NetGenOptions o;
    o.max_neurons = 300;
    o.max_inputs = 900;
    o.neuron_bits = 16;
    o.weight_bits = 1 + static_cast<int>(rng() % 16);
    o.weight_mag = 0;
    for (int it = 0; it < 50; ++it) {
        const auto spec = testsupport::random_network(rng, o);
        const auto r = estimate_network(spec, device(100));
        std::uint64_t sum = 0;
        for (const auto& l : spec.layers) {
            sum += bram_count(l.n_inputs, l.n_neurons * l.w_ff.format().bits());
            if (l.w_fb) sum += bram_count(l.n_neurons, l.n_neurons * l.w_fb->format().bits());
        }
        CHECK(r.total_bram == sum);
        CHECK(r.fits == (sum <= 100));
    }
}

TEST_CASE("predict_latency examples") {
    const auto mnist = load("mnist.json");
    const std::vector<LayerActivity> full{{1.0, 0.0, {}}, {1.0, 0.0, {}}};
    const auto m = predict_latency(mnist, full, 100e6);
    CHECK(m.cycles == doctest::Approx(100 * (784 + 2 + 2)));
    CHECK(m.seconds == doctest::Approx(0.78e-3).epsilon(0.05));

    const auto shd = load("shd.json");
    const std::vector<LayerActivity> act{{0.48, 0.93, {}}, {0.93, 0.93, {}}};
    CHECK(predict_latency(shd, act, 100e6).seconds == doctest::Approx(0.54e-3).epsilon(0.10));

    const std::vector<LayerActivity> idle{{0.0, 0.0, {}}, {0.0, 0.0, {}}};
    CHECK(predict_latency(mnist, idle, 100e6).cycles == 100 * (1 + 2));

    CHECK_THROWS_AS(predict_latency(mnist, idle, 0.0), UsageError);
    CHECK_THROWS_AS(predict_latency(mnist, std::vector<LayerActivity>{{1.5, 0.0, {}}, {0, 0, {}}}, 1e6), UsageError);
    CHECK_THROWS_AS(predict_latency(mnist, std::vector<LayerActivity>{}, 1e6), UsageError);
}

TEST_CASE("predict_latency agrees with the simulator on its measured activity") {
    std::mt19937_64 rng(8);
    for (int it = 0; it < 40; ++it) {
        testsupport::NetGenOptions o;
        o.max_layers = 2;
        o.max_neurons = 16;
        o.allow_immediate = false;
        auto spec = testsupport::random_network(rng, o);
        // a wide input layer dominates every step, as in the reference designs
        LayerSpec& first = spec.layers[0];
        first.n_inputs = 300;
        first.w_ff = testsupport::random_weights(rng, first.n_neurons, 300, 24, 16);
        spec.n_cycles = 100;
        spec.validate();
        std::vector<SpikeStream> batch;
        for (int s = 0; s < 4; ++s) batch.push_back(testsupport::random_stream(rng, 300, 100, 0.01 * (1 + it % 5)));
        const auto activity = measure_activity(spec, batch);
        double simulated = 0;
        for (const auto& in : batch) simulated += static_cast<double>(run(spec, in).predicted_cycles);
        simulated /= static_cast<double>(batch.size());
        CHECK(predict_latency(spec, activity, 1.0).cycles == doctest::Approx(simulated).epsilon(0.01));
    }
}

TEST_CASE("max hidden size") {
    const auto catalog = load_device_catalog(kData / "devices.json");
    const auto& z7 = find_device(catalog, "xc7z020");
    CHECK(z7.avail_bram == 140);
    const auto ff = max_hidden_size(784, 10, 4, std::nullopt, z7);
    CHECK(ff.bram <= 140);
    CHECK(ff.total_neurons == doctest::Approx(1224).epsilon(0.15));
    const auto& zu3 = find_device(catalog, "xczu3eg");
    CHECK(max_hidden_size(784, 10, 4, std::nullopt, zu3).total_neurons == doctest::Approx(1900).epsilon(0.15));
    CHECK(max_hidden_size(784, 10, 4, std::nullopt, device(0)).hidden == 0);
    CHECK_THROWS_AS(find_device(catalog, "xc9z999"), ConfigError);
}

TEST_CASE("device catalog parsing") {
    const auto cat = parse_device_catalog(
        R"({"devices": [{"name": "a", "bram": 10}, {"name": "b", "bram": 5, "bram_geometry": {"max_width": 36, "max_depth": 1024}}]})");
    REQUIRE(cat.size() == 2);
    CHECK(cat[1].bram.max_width == 36);
    CHECK(bram_count(1024, 72, cat[1].bram) == 2);
    CHECK_THROWS_AS(parse_device_catalog(R"({"devices": [{"bram": 10}]})"), ConfigError);
    CHECK_THROWS_AS(parse_device_catalog("[]"), ConfigError);
    CHECK_THROWS_AS(parse_device_catalog(R"({"devices": [{"name": "x", "bram": 1, "bram_geometry": {"max_width": 100}}]})"),
                    ConfigError);
}

TEST_CASE("report output") {
    const auto r = estimate_network(load("shd.json"), device(140));
    const auto j = report_json(r, LatencyEstimate{52000, 0.00052});
    CHECK(j.find("\"total_bram\": 52") != std::string::npos);
    CHECK(report_table(r).find("total 52 / 140") != std::string::npos);
}

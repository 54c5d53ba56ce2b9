#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "snnforge/codec.hpp"
#include "snnforge/config.hpp"
#include "snnforge/hdlgen.hpp"
#include "snnforge/quant.hpp"
#include "support/tempdir.hpp"

using namespace snnforge;

namespace {

const std::filesystem::path kData = SNNFORGE_SOURCE_DIR "/data";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string path(const std::filesystem::path& p) { return p.string(); }

} // namespace

TEST_CASE("sim on an all-zero raster") {
    testsupport::TempDir dir;
    codec::store_raster(dir.path() / "zero.txt", SpikeStream(784, 100));
    const auto r = run_cli({"sim", path(kData / "configs/mnist.json"), path(dir.path() / "zero.txt"), "--report",
                        path(dir.path() / "r.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("class 0") != std::string::npos);
    CHECK(r.out.find("no-activity") != std::string::npos);
    const auto doc = nlohmann::json::parse(codec::read_file(dir.path() / "r.json"));
    CHECK(doc["samples"][0]["no_activity"] == true);
    CHECK(doc["samples"][0]["predicted_cycles"] == 300);
}

TEST_CASE("sim on the MNIST fixture reports about 780 us") {
    testsupport::TempDir dir;
    const auto report = dir.path() / "r.json";
    const auto r = run_cli({"sim", path(kData / "configs/mnist.json"), path(kData / "fixtures/digit7/digit7.txt"),
                        "--report", path(report)});
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(codec::read_file(report));
    const double latency = doc["samples"][0]["latency_s"];
    CHECK(latency == doctest::Approx(780e-6).epsilon(0.05));
    CHECK(doc["clock_hz"] == 100e6);

    // identical output under the scalar kernels
    const auto scalar = run_cli({"sim", path(kData / "configs/mnist.json"), path(kData / "fixtures/digit7/digit7.txt"),
                             "--isa", "scalar"});
    const auto best = run_cli({"sim", path(kData / "configs/mnist.json"), path(kData / "fixtures/digit7/digit7.txt")});
    CHECK(scalar.out == best.out);

    const auto imm = run_cli({"sim", path(kData / "configs/mnist.json"), path(kData / "fixtures/digit7/digit7.txt"),
                          "--mode", "immediate", "--report", path(report)});
    CHECK(imm.code == 0);
    CHECK(nlohmann::json::parse(codec::read_file(report))["propagation"] == "immediate");
}

TEST_CASE("exit codes") {
    testsupport::TempDir dir;
    codec::store_raster(dir.path() / "narrow.txt", SpikeStream(700, 100));
    const auto mismatch = run_cli({"sim", path(kData / "configs/mnist.json"), path(dir.path() / "narrow.txt")});
    CHECK(mismatch.code == cli::kData);
    CHECK(mismatch.err.find("700") != std::string::npos);
    CHECK(mismatch.err.find("784") != std::string::npos);

    codec::write_file(dir.path() / "bad.json", R"({"n_cycles": 1, "layers": []})");
    CHECK(run_cli({"validate", path(dir.path() / "bad.json")}).code == cli::kConfig);
    CHECK(run_cli({"validate", path(dir.path() / "absent.json")}).code == cli::kConfig);
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
    CHECK(run_cli({"sim", path(kData / "configs/mnist.json")}).code == cli::kUsage);
    CHECK(run_cli({"sim", path(kData / "configs/mnist.json"), path(dir.path() / "narrow.txt"), "--mode", "eager"}).code ==
          cli::kUsage);
    CHECK(run_cli({"validate", path(kData / "configs/mnist.json"), "--bits", "6,4"}).code == cli::kUsage);
    CHECK(run_cli({"estimate", path(kData / "configs/mnist.json"), "--device", "nope"}).code == cli::kConfig);
    codec::write_file(dir.path() / "garbled.txt", "raster 784 100\n0101\n");
    CHECK(run_cli({"sim", path(kData / "configs/mnist.json"), path(dir.path() / "garbled.txt")}).code == cli::kData);
    const auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("sweep") != std::string::npos);
}

TEST_CASE("validate and estimate") {
    const auto v = run_cli({"validate", path(kData / "configs/shd.json")});
    CHECK(v.code == 0);
    CHECK(v.out.find("700-200-20") != std::string::npos);
    CHECK(v.out.find("lif2_subtractive") != std::string::npos);

    testsupport::TempDir dir;
    const auto e = run_cli({"estimate", path(kData / "configs/mnist.json"), "--json", path(dir.path() / "e.json")});
    CHECK(e.code == 0);
    CHECK(e.out.find("total 17 / 140") != std::string::npos);
    const auto doc = nlohmann::json::parse(codec::read_file(dir.path() / "e.json"));
    CHECK(doc["total_bram"] == 17);
    CHECK(doc["latency"]["seconds"].get<double>() == doctest::Approx(0.788e-3));

    const auto act = run_cli({"estimate", path(kData / "configs/shd.json"), "--activity", "0:0,0:0"});
    CHECK(act.out.find("latency 300 cycles") != std::string::npos);
    CHECK(run_cli({"estimate", path(kData / "configs/shd.json"), "--activity", "0.5"}).code == cli::kUsage);

    const auto small = run_cli({"estimate", path(kData / "configs/mnist.json"), "--device", "xc7z010", "--max-size"});
    CHECK(small.code == 0);
    CHECK(small.out.find("largest 784-N-10") != std::string::npos);
}

TEST_CASE("device catalog from the environment") {
    testsupport::TempDir dir;
    codec::write_file(dir.path() / "devices.json", R"({"devices": [{"name": "tiny", "bram": 3}]})");
    ::setenv("SNNFORGE_DEVICES", path(dir.path() / "devices.json").c_str(), 1);
    const auto r = run_cli({"estimate", path(kData / "configs/mnist.json"), "--device", "tiny"});
    ::unsetenv("SNNFORGE_DEVICES");
    CHECK(r.code == 0);
    CHECK(r.out.find("does not fit") != std::string::npos);
    CHECK(run_cli({"estimate", path(kData / "configs/mnist.json"), "--device", "tiny"}).code == cli::kConfig);
}

TEST_CASE("hdl command writes a clean bundle") {
    testsupport::TempDir dir;
    codec::store_raster(dir.path() / "zero.txt", SpikeStream(784, 100));
    const auto r = run_cli({"hdl", path(kData / "configs/mnist.json"), "--out", path(dir.path() / "hdl"), "--stimulus",
                        path(dir.path() / "zero.txt")});
    REQUIRE(r.code == 0);
    for (const char* f : {"top.vhd", "network_cu.vhd", "layer_1.vhd", "layer_2.vhd", "neuron_lif1_subtractive.vhd",
                          "counters.vhd", "testbench.vhd", "layer_1_ff.mem", "layer_2_ff.mem", "stimulus.txt"}) {
        CHECK(std::filesystem::exists(dir.path() / "hdl" / f));
    }
    CHECK(codec::read_file(dir.path() / "hdl/testbench.vhd").find("(0 => 0, 1 => 0, 2 => 0") != std::string::npos);
    codec::store_raster(dir.path() / "short.txt", SpikeStream(784, 10));
    CHECK(run_cli({"hdl", path(kData / "configs/mnist.json"), "--out", path(dir.path() / "x"), "--stimulus",
               path(dir.path() / "short.txt")})
              .code == cli::kData);
}

TEST_CASE("sweep and quantize on the synthetic task") {
    testsupport::TempDir dir;
    const auto args = std::vector<std::string>{"sweep", path(kData / "synthetic/synthetic.json"),
                                               path(kData / "synthetic/eval"), "--widths", "16,6,4", "--jobs", "2"};
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.starts_with("dimension,bits,accuracy\n"));
    CHECK(a.out.find("ff,4,1.000000") != std::string::npos);

    const auto only_ff = run_cli({"sweep", path(kData / "synthetic/synthetic.json"), path(kData / "synthetic/eval"),
                              "--widths", "8,4", "--dim", "ff", "--csv", path(dir.path() / "s.csv"), "--json",
                              path(dir.path() / "s.json"), "--joint"});
    CHECK(only_ff.code == 0);
    CHECK(codec::read_file(dir.path() / "s.csv").find("neuron,") == std::string::npos);
    CHECK(nlohmann::json::parse(codec::read_file(dir.path() / "s.json"))["grid"].size() == 8);
    CHECK(run_cli({"sweep", path(kData / "configs/mnist.json"), path(kData / "synthetic/eval")}).code == cli::kUsage);

    const auto q = run_cli({"quantize", path(kData / "synthetic/synthetic.json"), "--out", path(dir.path() / "q/syn.json"),
                        "--bits", "6,4,4"});
    CHECK(q.code == 0);
    const auto sim = run_cli({"sim", path(dir.path() / "q/syn.json"), path(kData / "synthetic/eval")});
    CHECK(sim.code == 0);
    const auto pos = sim.out.find("accuracy ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(sim.out.substr(pos + 9)) >= 0.95);
    // the float config simulated directly at the same widths gives the same answer
    const auto direct = run_cli({"sim", path(kData / "synthetic/synthetic.json"), path(kData / "synthetic/eval"), "--bits",
                             "6,4,4"});
    CHECK(direct.out == sim.out);
}

TEST_CASE("encode is seeded per sample") {
    testsupport::TempDir dir;
    codec::write_file(dir.path() / "v.txt", "0 255 128\n255 255 0\n");
    codec::write_file(dir.path() / "labels.txt", "1\n0\n");
    const auto r = run_cli({"encode", path(dir.path() / "v.txt"), "--steps", "20", "--seed", "5", "--divisor", "255",
                        "--labels", path(dir.path() / "labels.txt"), "--out", path(dir.path() / "ds")});
    REQUIRE(r.code == 0);
    const auto ds = codec::load_dataset(dir.path() / "ds");
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels[0] == 1u);
    const std::vector<double> v1{1.0, 1.0, 0.0};
    CHECK(ds.inputs[1] == codec::rate_encode(v1, 20, 6));

    const auto again = run_cli({"encode", path(dir.path() / "v.txt"), "--steps", "20", "--seed", "5", "--divisor", "255",
                            "--out", path(dir.path() / "ds2"), "--packed"});
    CHECK(again.code == 0);
    CHECK(codec::load_dataset(dir.path() / "ds2").inputs == ds.inputs);
    codec::write_file(dir.path() / "few.txt", "1\n");
    CHECK(run_cli({"encode", path(dir.path() / "v.txt"), "--steps", "20", "--divisor", "255", "--labels", path(dir.path() / "few.txt"), "--out",
               path(dir.path() / "ds3")})
              .code == cli::kData);
    CHECK(run_cli({"encode", path(dir.path() / "v.txt"), "--steps", "0", "--out", path(dir.path() / "ds4")}).code ==
          cli::kUsage);
}

TEST_CASE("shipped synthetic data matches its generator") {
    const auto cfg = codec::load_network(kData / "synthetic/synthetic.json");
    REQUIRE(cfg.is_float());
    const auto ds = codec::load_dataset(kData / "synthetic/eval");
    const auto task = make_synthetic_task(ds.size(), 11);
    const FloatNetwork& net = cfg.floating();
    REQUIRE(net.layers.size() == task.net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(net.layers[l].w_ff == task.net.layers[l].w_ff);
        CHECK(net.layers[l].w_fb == task.net.layers[l].w_fb);
        CHECK(net.layers[l].beta == task.net.layers[l].beta);
    }
    CHECK(ds.inputs == task.data.inputs);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(*ds.labels[i] == task.data.labels[i]);
}

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "snnforge/codec.hpp"
#include "snnforge/config.hpp"
#include "snnforge/error.hpp"
#include "snnforge/estimate.hpp"
#include "snnforge/hdlgen.hpp"
#include "snnforge/kernels.hpp"
#include "snnforge/parallel.hpp"
#include "snnforge/quant.hpp"

namespace snnforge::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr double kDefaultClockHz = 100e6;
constexpr const char* kDefaultDevice = "xc7z020";

struct Common {
    unsigned jobs = 0;
    std::string isa = "auto";
    std::string bits;
};

BitWidths parse_bits(const std::string& s) {
    std::vector<int> v;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::logic_error&) {
            throw UsageError("--bits expects neuron,ff[,fb], got '" + s + "'");
        }
    }
    if (v.size() < 2 || v.size() > 3) throw UsageError("--bits expects neuron,ff[,fb], got '" + s + "'");
    return {v[0], v[1], v.size() == 3 ? v[2] : v[1]};
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
    std::vector<int> v;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::logic_error&) {
            throw UsageError(std::string(flag) + " expects a comma-separated list of integers, got '" + s + "'");
        }
    }
    if (v.empty()) throw UsageError(std::string(flag) + " is empty");
    return v;
}

// A fixed-point spec from either kind of config; --bits only applies to float weights.
NetworkSpec resolve_spec(const codec::NetworkConfig& cfg, const Common& c) {
    if (!c.bits.empty()) {
        if (!cfg.is_float()) throw UsageError("--bits applies only to configs with float weights");
        return cfg.resolve(parse_bits(c.bits));
    }
    return cfg.resolve();
}

const kernels::KernelTable* select_isa(const Common& c) {
    if (c.isa == "auto") return nullptr;
    return &kernels::table(kernels::parse_isa(c.isa));
}

void add_common(CLI::App* cmd, Common& c, bool bits = true) {
    cmd->add_option("--jobs", c.jobs, "worker threads (0 = available parallelism)");
    cmd->add_option("--isa", c.isa, "kernel set: auto, scalar, avx2, neon");
    if (bits) cmd->add_option("--bits", c.bits, "neuron,ff[,fb] widths for configs with float weights");
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        codec::write_file(path, text);
    }
}

struct Inputs {
    std::vector<std::string> files;
    std::vector<SpikeStream> rasters;
    std::vector<std::optional<std::size_t>> labels;
};

Inputs load_inputs(const fs::path& p) {
    if (fs::is_directory(p)) {
        auto ds = codec::load_dataset(p);
        return {std::move(ds.files), std::move(ds.inputs), std::move(ds.labels)};
    }
    Inputs in;
    in.files.push_back(p.filename().string());
    in.rasters.push_back(codec::load_raster(p));
    in.labels.emplace_back();
    return in;
}

void check_shape(const NetworkSpec& spec, const Inputs& in) {
    for (std::size_t i = 0; i < in.rasters.size(); ++i) {
        const SpikeStream& s = in.rasters[i];
        if (s.n_channels() != spec.n_inputs()) {
            throw DataError(in.files[i] + ": raster has " + std::to_string(s.n_channels()) +
                            " channels, network expects " + std::to_string(spec.n_inputs()));
        }
        if (s.n_steps() != spec.n_cycles) {
            throw DataError(in.files[i] + ": raster has " + std::to_string(s.n_steps()) + " steps, network runs " +
                            std::to_string(spec.n_cycles));
        }
    }
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

// ---- commands ----

int cmd_validate(const std::string& config, const Common& c, std::ostream& out, std::ostream& err) {
    const auto cfg = codec::load_network(config);
    NetworkSpec spec;
    if (cfg.is_float()) {
        const BitWidths bits = c.bits.empty() ? cfg.bits : parse_bits(c.bits);
        const auto q = quantize(cfg.floating(), bits);
        for (const auto& w : q.warnings) err << "warning: " << w << "\n";
        out << "float weights, quantized at " << bits.neuron << "/" << bits.ff << "/" << bits.fb
            << " bits with scale 2^" << q.scale_exp << "\n";
        spec = q.spec;
    } else {
        if (!c.bits.empty()) throw UsageError("--bits applies only to configs with float weights");
        spec = cfg.fixed();
    }
    std::string shape = std::to_string(spec.n_inputs());
    for (const auto& l : spec.layers) shape += "-" + std::to_string(l.n_neurons);
    out << spec.name << ": " << shape << ", " << spec.n_cycles << " steps, " << to_string(spec.propagation) << "\n";
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        const NeuronSpec reduced = reduce_model(layer.neuron);
        out << "  layer " << l + 1 << ": " << layer.n_inputs << " -> " << layer.n_neurons << ", "
            << variant_name(reduced.model) << ", neuron " << layer.neuron.neuron_bits.bits() << " bits, ff "
            << layer.w_ff.format().bits() << " bits";
        if (layer.w_fb) out << ", fb " << layer.w_fb->format().bits() << " bits";
        out << "\n";
    }
    out << "ok\n";
    return kOk;
}

int cmd_quantize(const std::string& config, const std::string& out_path, std::optional<int> scale, bool inline_w,
                 const Common& c, std::ostream& out, std::ostream& err) {
    const auto cfg = codec::load_network(config);
    if (!cfg.is_float()) throw UsageError(config + " already holds fixed-point weights");
    const BitWidths bits = c.bits.empty() ? cfg.bits : parse_bits(c.bits);
    const auto q = quantize(cfg.floating(), bits, scale);
    for (const auto& w : q.warnings) err << "warning: " << w << "\n";
    codec::StoreOptions opts;
    opts.inline_weights = inline_w;
    opts.clock_hz = cfg.clock_hz;
    opts.activity = cfg.activity;
    if (const auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
    codec::store_network(out_path, q.spec, opts);
    out << "scale 2^" << q.scale_exp << ", wrote " << out_path << "\n";
    return kOk;
}

int cmd_sim(const std::string& config, const std::string& input, const std::string& mode, const std::string& report,
            std::optional<double> clock, const Common& c, std::ostream& out) {
    const auto cfg = codec::load_network(config);
    NetworkSpec spec = resolve_spec(cfg, c);
    if (!mode.empty()) spec.propagation = parse_propagation(mode);
    const double f_clk = clock.value_or(cfg.clock_hz.value_or(kDefaultClockHz));
    if (!(f_clk > 0)) throw UsageError("--clock must be positive");
    const auto* table = select_isa(c);

    const Inputs in = load_inputs(input);
    check_shape(spec, in);
    const Simulator sim(spec);
    std::vector<RunReport> runs(in.rasters.size());
    RunOptions opts;
    opts.kernels = table;
    parallel_for(in.rasters.size(), c.jobs, [&](std::size_t i) { runs[i] = sim.run(in.rasters[i], opts); });

    ojson samples = ojson::array();
    std::size_t labeled = 0, correct = 0;
    double total_cycles = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const RunReport& r = runs[i];
        const Classification cls = classify(r);
        const double seconds = cycles_to_seconds(r.predicted_cycles, f_clk);
        total_cycles += static_cast<double>(r.predicted_cycles);
        out << in.files[i] << "\tclass " << cls.index << "\tcycles " << r.predicted_cycles << "\tlatency_us "
            << fixed(seconds * 1e6, 2);
        if (cls.no_activity) out << "\tno-activity";
        if (in.labels[i]) {
            ++labeled;
            if (*in.labels[i] == cls.index) ++correct;
            out << "\tlabel " << *in.labels[i];
        }
        out << "\n";
        ojson activity = ojson::array();
        for (const auto& a : r.per_layer_activity) {
            activity.push_back({{"ff", a.ff}, {"fb", a.fb}, {"any", a.any_or_bound()}});
        }
        ojson s = {{"file", in.files[i]},
                   {"class", cls.index},
                   {"no_activity", cls.no_activity},
                   {"label", in.labels[i] ? ojson(*in.labels[i]) : ojson(nullptr)},
                   {"out_counts", r.out_counts},
                   {"predicted_cycles", r.predicted_cycles},
                   {"latency_s", seconds},
                   {"activity", activity}};
        samples.push_back(std::move(s));
    }
    const double mean_cycles = runs.empty() ? 0.0 : total_cycles / static_cast<double>(runs.size());
    std::optional<double> accuracy;
    if (labeled > 0) accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
    out << "samples " << runs.size() << "\tmean cycles " << fixed(mean_cycles, 1) << "\tmean latency_us "
        << fixed(mean_cycles / f_clk * 1e6, 2) << "\n";
    if (accuracy) out << "accuracy " << fixed(*accuracy, 6) << " (" << labeled << " labeled)\n";

    if (!report.empty()) {
        ojson doc = {{"network", spec.name},
                     {"propagation", to_string(spec.propagation)},
                     {"clock_hz", f_clk},
                     {"isa", kernels::to_string(table ? table->isa : kernels::best())},
                     {"samples", samples},
                     {"accuracy", accuracy ? ojson(*accuracy) : ojson(nullptr)},
                     {"mean_predicted_cycles", mean_cycles},
                     {"mean_latency_s", mean_cycles / f_clk}};
        codec::write_file(report, doc.dump(2) + "\n");
    }
    return kOk;
}

int cmd_sweep(const std::string& config, const std::string& data, const std::vector<std::string>& dims,
              const std::string& widths, bool joint, const std::string& csv, const std::string& json_path,
              const Common& c, std::ostream& out) {
    const auto cfg = codec::load_network(config);
    if (!cfg.is_float()) throw UsageError("sweep needs a config with float weights");
    if (!c.bits.empty()) throw UsageError("sweep takes --widths, not --bits");
    if (c.isa != "auto") kernels::table(kernels::parse_isa(c.isa)); // validate only
    const auto ds = codec::load_dataset(data);
    if (!ds.labeled()) throw DataError(data + ": sweep needs a label for every sample");
    const FloatNetwork& net = cfg.floating();
    LabeledBatch batch;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const SpikeStream& s = ds.inputs[i];
        if (s.n_channels() != net.n_inputs() || s.n_steps() != net.n_cycles) {
            throw DataError(ds.files[i] + ": raster is " + std::to_string(s.n_channels()) + "x" +
                            std::to_string(s.n_steps()) + ", network expects " + std::to_string(net.n_inputs()) +
                            "x" + std::to_string(net.n_cycles));
        }
        batch.inputs.push_back(s);
        batch.labels.push_back(*ds.labels[i]);
    }
    SweepOptions o;
    o.widths = parse_int_list(widths, "--widths");
    if (!dims.empty()) {
        o.dims.clear();
        for (const auto& d : dims) o.dims.push_back(parse_sweep_dim(d));
    }
    o.joint = joint;
    o.jobs = c.jobs;
    const auto r = sweep(net, batch, o);
    write_or_print(csv, sweep_csv(r), out);
    if (!json_path.empty()) codec::write_file(json_path, sweep_json(r));
    return kOk;
}

int cmd_encode(const std::string& input, const std::string& out_dir, std::size_t steps, std::uint64_t seed,
               double divisor, const std::string& labels_path, bool packed, const Common& c, std::ostream& out) {
    std::vector<std::vector<double>> samples;
    std::vector<std::string> names;
    const fs::path in(input);
    const std::string ext = packed ? ".snnr" : ".txt";
    if (fs::is_directory(in)) {
        std::vector<fs::path> images;
        for (const auto& e : fs::directory_iterator(in)) {
            if (e.is_regular_file() && e.path().extension() == ".pgm") images.push_back(e.path());
        }
        std::sort(images.begin(), images.end());
        if (images.empty()) throw DataError(input + ": no .pgm images");
        for (const auto& p : images) {
            samples.push_back(codec::load_pgm(p));
            names.push_back(p.stem().string() + ext);
        }
    } else if (in.extension() == ".pgm") {
        samples.push_back(codec::load_pgm(in));
        names.push_back(in.stem().string() + ext);
    } else {
        samples = codec::parse_vectors(codec::read_file(in), divisor);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::ostringstream n;
            n << "sample_" << std::setw(5) << std::setfill('0') << i << ext;
            names.push_back(n.str());
        }
    }
    codec::Dataset ds;
    ds.files = names;
    ds.inputs = codec::rate_encode_batch(samples, steps, seed, c.jobs);
    ds.labels.assign(samples.size(), std::nullopt);
    if (!labels_path.empty()) {
        std::istringstream lines(codec::read_file(labels_path));
        std::string line;
        std::size_t i = 0;
        while (std::getline(lines, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (i >= samples.size()) throw DataError(labels_path + ": more labels than samples");
            try {
                std::size_t used = 0;
                const long v = std::stol(line, &used);
                if (used != line.size() || v < 0) throw std::invalid_argument(line);
                ds.labels[i++] = static_cast<std::size_t>(v);
            } catch (const std::logic_error&) {
                throw ParseError(labels_path + ": invalid label '" + line + "'", i + 1);
            }
        }
        if (i != samples.size()) throw DataError(labels_path + ": " + std::to_string(i) + " labels for " +
                                                 std::to_string(samples.size()) + " samples");
    }
    codec::store_dataset(out_dir, ds, packed);
    out << "encoded " << ds.size() << " samples, " << steps << " steps, seed " << seed << " -> " << out_dir << "\n";
    return kOk;
}

std::vector<LayerActivity> parse_activity(const std::string& s, std::size_t n_layers) {
    std::vector<LayerActivity> act;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        LayerActivity a;
        const auto colon = part.find(':');
        try {
            a.ff = std::stod(part.substr(0, colon));
            if (colon != std::string::npos) a.fb = std::stod(part.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw UsageError("--activity expects ff[:fb] per layer, got '" + s + "'");
        }
        act.push_back(a);
    }
    if (act.size() != n_layers) {
        throw UsageError("--activity needs " + std::to_string(n_layers) + " entries, got " + std::to_string(act.size()));
    }
    return act;
}

int cmd_estimate(const std::string& config, const std::string& device_name, const std::string& catalog_path,
                 const std::string& activity, std::optional<double> clock, const std::string& json_path,
                 bool max_size, const Common& c, std::ostream& out, std::ostream& err) {
    const auto cfg = codec::load_network(config);
    const NetworkSpec spec = resolve_spec(cfg, c);
    const auto catalog = load_device_catalog(catalog_path.empty() ? default_device_catalog() : fs::path(catalog_path));
    const Device& device = find_device(catalog, device_name);
    std::vector<LayerActivity> act;
    if (!activity.empty()) {
        act = parse_activity(activity, spec.layers.size());
    } else if (!cfg.activity.empty()) {
        act = cfg.activity;
    } else {
        err << "note: no activity declared; assuming every layer sees spikes in every step\n";
        act.assign(spec.layers.size(), LayerActivity{1.0, 1.0, std::nullopt});
    }
    const double f_clk = clock.value_or(cfg.clock_hz.value_or(kDefaultClockHz));
    const auto report = estimate_network(spec, device);
    const auto latency = predict_latency(spec, act, f_clk);
    out << report_table(report, latency);
    if (max_size) {
        const LayerSpec& first = spec.layers.front();
        std::optional<int> fb;
        if (first.w_fb) fb = first.w_fb->format().bits();
        const auto m = max_hidden_size(spec.n_inputs(), spec.n_outputs(), first.w_ff.format().bits(), fb, device);
        out << "largest " << spec.n_inputs() << "-N-" << spec.n_outputs() << " network on " << device.name << ": N = "
            << m.hidden << " (" << m.total_neurons << " neurons, " << m.bram << " BRAM)\n";
    }
    if (!json_path.empty()) codec::write_file(json_path, report_json(report, latency));
    return kOk;
}

int cmd_hdl(const std::string& config, const std::string& out_dir, const std::string& stimulus, const Common& c,
            std::ostream& out) {
    const auto cfg = codec::load_network(config);
    const NetworkSpec spec = resolve_spec(cfg, c);
    hdl::HdlBundle bundle;
    if (stimulus.empty()) {
        bundle = hdl::generate(spec);
    } else {
        const SpikeStream s = codec::load_raster(stimulus);
        if (s.n_channels() != spec.n_inputs() || s.n_steps() != spec.n_cycles) {
            throw DataError(stimulus + ": raster is " + std::to_string(s.n_channels()) + "x" +
                            std::to_string(s.n_steps()) + ", network expects " + std::to_string(spec.n_inputs()) +
                            "x" + std::to_string(spec.n_cycles));
        }
        bundle = hdl::generate(spec, s);
    }
    const auto problems = hdl::lint(bundle);
    if (!problems.empty()) {
        std::string msg = "generated HDL failed the structural check:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw GenerationError(msg);
    }
    bundle.write(out_dir);
    for (const auto& f : bundle.file_names()) out << (fs::path(out_dir) / f).string() << "\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spiking neural network accelerator workbench: simulate, quantize, estimate, generate HDL.",
                 "snnforge"};
    app.require_subcommand(1);
    Common common;

    std::string config, input, out_path, mode, report, stimulus, csv, json_path, widths = "16,12,10,8,6,4,2";
    std::string device = kDefaultDevice, catalog, activity, labels;
    std::vector<std::string> dims;
    std::optional<double> clock;
    std::optional<int> scale;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    double divisor = 1.0;
    bool inline_w = false, joint = false, packed = false, max_size = false;

    auto* validate = app.add_subcommand("validate", "check a network config and print its structure");
    validate->add_option("config", config, "network config (JSON)")->required();
    add_common(validate, common);

    auto* quant = app.add_subcommand("quantize", "quantize a float-weight config into a fixed-point one");
    quant->add_option("config", config, "network config with float weights")->required();
    quant->add_option("--out", out_path, "output config path")->required();
    quant->add_option("--scale-exp", scale, "force the weight scale 2^f instead of the widest that fits");
    quant->add_flag("--inline", inline_w, "write weights inline instead of .snnw files");
    add_common(quant, common);

    auto* sim = app.add_subcommand("sim", "run inference on a raster or a dataset directory");
    sim->add_option("config", config, "network config")->required();
    sim->add_option("input", input, "raster file or dataset directory")->required();
    sim->add_option("--mode", mode, "propagation: pipelined or immediate (overrides the config)");
    sim->add_option("--report", report, "write a JSON run report");
    sim->add_option("--clock", clock, "clock frequency in Hz (overrides the config)");
    add_common(sim, common);

    auto* sw = app.add_subcommand("sweep", "accuracy against bit width for a float-weight config");
    sw->add_option("config", config, "network config with float weights")->required();
    sw->add_option("data", input, "labeled dataset directory")->required();
    sw->add_option("--dim", dims, "dimension to sweep: neuron, ff, fb (repeatable; default all)");
    sw->add_option("--widths", widths, "comma-separated widths");
    sw->add_flag("--joint", joint, "also evaluate every width triple (JSON output only)");
    sw->add_option("--csv", csv, "CSV output path (default: standard output)");
    sw->add_option("--json", json_path, "JSON output path");
    add_common(sw, common);

    auto* enc = app.add_subcommand("encode", "rate-code raw vectors or PGM images into rasters");
    enc->add_option("input", input, "vector file, .pgm image or directory of .pgm images")->required();
    enc->add_option("--out", out_path, "output dataset directory")->required();
    enc->add_option("--steps", steps, "timesteps per raster")->required()->check(CLI::PositiveNumber);
    enc->add_option("--seed", seed, "RNG seed; sample i uses seed + i");
    enc->add_option("--divisor", divisor, "scale for vector files, e.g. 255 for 8-bit pixels")->check(CLI::PositiveNumber);
    enc->add_option("--labels", labels, "file with one label per sample");
    enc->add_flag("--packed", packed, "write packed binary rasters");
    add_common(enc, common, false);

    auto* est = app.add_subcommand("estimate", "BRAM usage and latency on an FPGA device");
    est->add_option("config", config, "network config")->required();
    est->add_option("--device", device, "device name from the catalog");
    est->add_option("--devices", catalog, "device catalog (default: $SNNFORGE_DEVICES, then the shipped catalog)");
    est->add_option("--activity", activity, "per-layer activity ff[:fb], comma-separated (overrides the config)");
    est->add_option("--clock", clock, "clock frequency in Hz (overrides the config)");
    est->add_option("--json", json_path, "write the report as JSON");
    est->add_flag("--max-size", max_size, "also report the largest hidden layer that fits the device");
    add_common(est, common);

    auto* hdl_cmd = app.add_subcommand("hdl", "generate the VHDL bundle");
    hdl_cmd->add_option("config", config, "network config")->required();
    hdl_cmd->add_option("--out", out_path, "output directory")->required();
    hdl_cmd->add_option("--stimulus", stimulus, "raster for the testbench stimulus and expected counts");
    add_common(hdl_cmd, common);

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
                out << sub->help();
            }
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*validate) return cmd_validate(config, common, out, err);
        if (*quant) return cmd_quantize(config, out_path, scale, inline_w, common, out, err);
        if (*sim) return cmd_sim(config, input, mode, report, clock, common, out);
        if (*sw) return cmd_sweep(config, input, dims, widths, joint, csv, json_path, common, out);
        if (*enc) return cmd_encode(input, out_path, steps, seed, divisor, labels, packed, common, out);
        if (*est) return cmd_estimate(config, device, catalog, activity, clock, json_path, max_size, common, out, err);
        if (*hdl_cmd) return cmd_hdl(config, out_path, stimulus, common, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const GenerationError& e) {
        err << "generation error: " << e.what() << "\n";
        return kGeneration;
    } catch (const fs::filesystem_error& e) {
        err << "io error: " << e.what() << "\n";
        return kGeneration;
    }
    return kUsage;
}

} // namespace snnforge::cli

#include "snnforge/estimate.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "json.hpp"

#include "snnforge/codec.hpp"
#include "snnforge/error.hpp"

#ifndef SNNFORGE_DATA_DIR
#define SNNFORGE_DATA_DIR "data"
#endif

namespace snnforge {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

double clamp_fraction(double a, const char* what) {
    if (!(a >= 0.0 && a <= 1.0)) throw UsageError(std::string(what) + " activity must lie in [0, 1]");
    return a;
}

} // namespace

void BramModel::validate() const {
    if (capacity_bits == 0 || max_width == 0 || max_depth_at_max_width == 0) {
        throw UsageError("BRAM geometry must be positive");
    }
    if (max_width * max_depth_at_max_width > capacity_bits) {
        throw UsageError("BRAM geometry exceeds block capacity");
    }
}

std::uint64_t bram_count(std::uint64_t depth, std::uint64_t word_width_bits, const BramModel& model) {
    model.validate();
    if (depth == 0 || word_width_bits == 0) throw UsageError("memory depth and width must be at least 1");
    return ceil_div(word_width_bits, model.max_width) * ceil_div(depth, model.max_depth_at_max_width);
}

ResourceReport estimate_network(const NetworkSpec& spec, const Device& device) {
    spec.validate();
    ResourceReport r;
    r.device = device.name;
    r.avail_bram = device.avail_bram;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        const auto add = [&](bool fb, std::uint64_t depth, std::uint64_t width) {
            const std::uint64_t blocks = bram_count(depth, width, device.bram);
            r.memories.push_back({l, fb, depth, width, blocks});
            r.total_bram += blocks;
            r.total_weight_bits += depth * width;
        };
        add(false, layer.n_inputs, layer.n_neurons * static_cast<std::uint64_t>(layer.w_ff.format().bits()));
        if (layer.w_fb) add(true, layer.n_neurons, layer.n_neurons * static_cast<std::uint64_t>(layer.w_fb->format().bits()));
    }
    r.fits = r.total_bram <= device.avail_bram;
    return r;
}

LatencyEstimate predict_latency(const NetworkSpec& spec, std::span<const LayerActivity> activity, double f_clk_hz) {
    spec.validate();
    if (activity.size() != spec.layers.size()) {
        throw UsageError("activity has " + std::to_string(activity.size()) + " entries, network has " +
                         std::to_string(spec.layers.size()) + " layers");
    }
    if (!(f_clk_hz > 0)) throw UsageError("clock frequency must be positive");
    const CycleCosts& c = spec.costs;
    double slowest = 0.0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        const double a_ff = clamp_fraction(activity[l].ff, "feed-forward");
        const double a_fb = layer.recurrent() ? clamp_fraction(activity[l].fb, "feedback") : 0.0;
        const double a_any = clamp_fraction(activity[l].any.value_or(std::max(a_ff, a_fb)), "combined");
        const double cost = a_ff * static_cast<double>(layer.n_inputs) + a_fb * static_cast<double>(layer.n_neurons) +
                            a_any * c.act + (1.0 - a_any) * c.idle;
        slowest = std::max(slowest, cost);
    }
    LatencyEstimate e;
    e.cycles = static_cast<double>(spec.n_cycles) * (c.net + slowest);
    e.seconds = e.cycles / f_clk_hz;
    return e;
}

MaxSizeResult max_hidden_size(std::size_t n_inputs, std::size_t n_outputs, int ff_bits, std::optional<int> fb_bits,
                              const Device& device) {
    if (n_inputs == 0 || n_outputs == 0) throw UsageError("layer sizes must be positive");
    const auto blocks = [&](std::uint64_t n) {
        std::uint64_t b = bram_count(n_inputs, n * ff_bits, device.bram) + bram_count(n, n_outputs * ff_bits, device.bram);
        if (fb_bits) b += bram_count(n, n * *fb_bits, device.bram) + bram_count(n_outputs, n_outputs * *fb_bits, device.bram);
        return b;
    };
    MaxSizeResult r;
    if (blocks(1) > device.avail_bram) return r;
    // blocks() is non-decreasing in n
    std::uint64_t lo = 1, hi = 2;
    while (blocks(hi) <= device.avail_bram) {
        lo = hi;
        hi *= 2;
        if (hi > (1u << 24)) throw UsageError("device budget too large to search");
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (blocks(mid) <= device.avail_bram ? lo : hi) = mid;
    }
    r.hidden = lo;
    r.total_neurons = lo + n_outputs;
    r.bram = blocks(lo);
    return r;
}

std::vector<Device> parse_device_catalog(std::string_view json_text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("device catalog: invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("devices") || !doc["devices"].is_array()) {
        throw ConfigError("device catalog: expected {\"devices\": [...]}");
    }
    std::vector<Device> out;
    for (std::size_t i = 0; i < doc["devices"].size(); ++i) {
        const json& d = doc["devices"][i];
        const std::string field = "devices[" + std::to_string(i) + "]";
        try {
            Device dev;
            dev.name = d.at("name").get<std::string>();
            dev.avail_bram = d.at("bram").get<std::uint64_t>();
            if (d.contains("luts")) dev.luts = d["luts"].get<std::uint64_t>();
            if (d.contains("bram_geometry")) {
                const json& g = d["bram_geometry"];
                dev.bram.capacity_bits = g.value("capacity_bits", dev.bram.capacity_bits);
                dev.bram.max_width = g.value("max_width", dev.bram.max_width);
                dev.bram.max_depth_at_max_width = g.value("max_depth", dev.bram.max_depth_at_max_width);
            }
            dev.bram.validate();
            out.push_back(std::move(dev));
        } catch (const json::exception& e) {
            throw ConfigError("device catalog: " + field + ": " + e.what());
        } catch (const UsageError& e) {
            throw ConfigError("device catalog: " + field + ": " + e.what());
        }
    }
    return out;
}

std::vector<Device> load_device_catalog(const std::filesystem::path& path) {
    try {
        return parse_device_catalog(codec::read_file(path));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

std::filesystem::path default_device_catalog() {
    if (const char* env = std::getenv("SNNFORGE_DEVICES"); env && *env) return env;
    return std::filesystem::path(SNNFORGE_DATA_DIR) / "devices.json";
}

const Device& find_device(const std::vector<Device>& catalog, std::string_view name) {
    for (const auto& d : catalog) {
        if (d.name == name) return d;
    }
    std::string known;
    for (const auto& d : catalog) known += (known.empty() ? "" : ", ") + d.name;
    throw ConfigError("unknown device '" + std::string(name) + "' (known: " + known + ")");
}

std::string report_json(const ResourceReport& r, std::optional<LatencyEstimate> latency) {
    using nlohmann::json;
    json mems = json::array();
    for (const auto& m : r.memories) {
        mems.push_back({{"layer", m.layer + 1},
                        {"kind", m.feedback ? "fb" : "ff"},
                        {"depth", m.depth},
                        {"width", m.width},
                        {"bram", m.bram}});
    }
    json doc{{"device", r.device},
             {"avail_bram", r.avail_bram},
             {"memories", mems},
             {"total_bram", r.total_bram},
             {"total_weight_bits", r.total_weight_bits},
             {"fits", r.fits}};
    if (!r.fits) doc["advice"] = "weights exceed on-chip BRAM; an external-memory synapse variant would be required";
    if (latency) doc["latency"] = {{"cycles", latency->cycles}, {"seconds", latency->seconds}};
    return doc.dump(2) + "\n";
}

std::string report_table(const ResourceReport& r, std::optional<LatencyEstimate> latency) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %-4s %8s %8s %6s\n", "layer", "mem", "depth", "width", "bram");
    out += buf;
    for (const auto& m : r.memories) {
        std::snprintf(buf, sizeof buf, "%-6zu %-4s %8llu %8llu %6llu\n", m.layer + 1, m.feedback ? "fb" : "ff",
                      static_cast<unsigned long long>(m.depth), static_cast<unsigned long long>(m.width),
                      static_cast<unsigned long long>(m.bram));
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "total %llu / %llu BRAM on %s: %s\n", static_cast<unsigned long long>(r.total_bram),
                  static_cast<unsigned long long>(r.avail_bram), r.device.c_str(), r.fits ? "fits" : "does not fit");
    out += buf;
    if (latency) {
        std::snprintf(buf, sizeof buf, "latency %.0f cycles = %.4f ms\n", latency->cycles, latency->seconds * 1e3);
        out += buf;
    }
    return out;
}

} // namespace snnforge

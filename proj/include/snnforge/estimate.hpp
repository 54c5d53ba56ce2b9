#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snnforge/network.hpp"

namespace snnforge {

/// Block RAM geometry. Defaults are a 7-series 36Kb block: 36864 bits,
/// at most 72 bits wide, 512 words deep at that width.
struct BramModel {
    std::uint64_t capacity_bits = 36864;
    std::uint64_t max_width = 72;
    std::uint64_t max_depth_at_max_width = 512;

    void validate() const;
    friend bool operator==(const BramModel&, const BramModel&) = default;
};

struct Device {
    std::string name;
    std::uint64_t avail_bram = 0;
    std::optional<std::uint64_t> luts;
    BramModel bram;
};

/// ceil(width / max_width) * ceil(depth / max_depth_at_max_width).
std::uint64_t bram_count(std::uint64_t depth, std::uint64_t word_width_bits, const BramModel& model = {});

struct MemoryReport {
    std::size_t layer = 0; // 0-based
    bool feedback = false;
    std::uint64_t depth = 0;
    std::uint64_t width = 0;
    std::uint64_t bram = 0;
};

struct ResourceReport {
    std::string device;
    std::uint64_t avail_bram = 0;
    std::vector<MemoryReport> memories;
    std::uint64_t total_bram = 0;
    std::uint64_t total_weight_bits = 0;
    bool fits = false;
};

/// Each FF memory is n_inputs deep and n_neurons * ff_bits wide; each FB
/// memory n_neurons deep and n_neurons * fb_bits wide. No sharing across memories.
ResourceReport estimate_network(const NetworkSpec& spec, const Device& device);

struct LatencyEstimate {
    double cycles = 0.0;
    double seconds = 0.0;
};

/// n_cycles * (C_net + max over layers of
///   a_ff*n_inputs + a_fb*n_neurons + a_any*C_act + (1 - a_any)*C_idle),
/// where a_any (fraction of steps with any spike) defaults to max(a_ff, a_fb).
LatencyEstimate predict_latency(const NetworkSpec& spec, std::span<const LayerActivity> activity, double f_clk_hz);

/// Largest hidden layer n_in-N-n_out (optionally recurrent hidden and output
/// layers) whose weights fit the device.
struct MaxSizeResult {
    std::size_t hidden = 0;
    std::size_t total_neurons = 0; // hidden + outputs
    std::uint64_t bram = 0;
};
MaxSizeResult max_hidden_size(std::size_t n_inputs, std::size_t n_outputs, int ff_bits, std::optional<int> fb_bits,
                              const Device& device);

// ---- device catalog ----
//
// JSON: {"devices": [{"name": "xc7z020", "bram": 140, "luts": 53200,
//                     "bram_geometry": {"capacity_bits": ..., "max_width": ..., "max_depth": ...}}]}

std::vector<Device> parse_device_catalog(std::string_view json_text);
std::vector<Device> load_device_catalog(const std::filesystem::path& path);
/// $SNNFORGE_DEVICES if set, else the catalog shipped with the sources.
std::filesystem::path default_device_catalog();
/// Throws ConfigError listing the known names.
const Device& find_device(const std::vector<Device>& catalog, std::string_view name);

std::string report_json(const ResourceReport& r, std::optional<LatencyEstimate> latency = std::nullopt);
std::string report_table(const ResourceReport& r, std::optional<LatencyEstimate> latency = std::nullopt);

} // namespace snnforge

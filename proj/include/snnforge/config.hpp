#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "snnforge/network.hpp"
#include "snnforge/quant.hpp"

namespace snnforge::codec {

enum class Encoding { Rate, PopulationRank, Temporal };
std::string_view to_string(Encoding e);

/// A network description loaded from JSON. Fixed configs give shifts and raw
/// integer weights; float configs give real decay constants and weights and
/// are quantized with `bits` on demand.
struct NetworkConfig {
    std::string name;
    Encoding encoding = Encoding::Rate;
    BitWidths bits;
    std::optional<double> clock_hz;
    std::vector<LayerActivity> activity; // expected per-layer activity, if declared
    std::variant<NetworkSpec, FloatNetwork> network;

    bool is_float() const noexcept { return std::holds_alternative<FloatNetwork>(network); }
    const NetworkSpec& fixed() const { return std::get<NetworkSpec>(network); }
    const FloatNetwork& floating() const { return std::get<FloatNetwork>(network); }

    /// The fixed spec, quantizing a float network at `bits` (or `override`) first.
    NetworkSpec resolve(std::optional<BitWidths> override = std::nullopt) const;
};

/// Throws ConfigError naming the offending field, e.g. "layers[1].n_inputs".
/// Relative weight-file paths resolve against base_dir.
NetworkConfig parse_network(std::string_view json_text, const std::filesystem::path& base_dir = ".");
NetworkConfig load_network(const std::filesystem::path& path);

struct StoreOptions {
    bool inline_weights = false; // otherwise one weight file per matrix next to the config
    std::optional<double> clock_hz;
    std::vector<LayerActivity> activity;
};

/// Writes `path` (and <stem>_l<k>_ff.snnw / _fb.snnw beside it unless inlined).
/// load_network(path) reproduces spec exactly.
void store_network(const std::filesystem::path& path, const NetworkSpec& spec, const StoreOptions& opts = {});
std::string dump_network(const NetworkSpec& spec, const StoreOptions& opts = {}, std::string_view weight_stem = "");

} // namespace snnforge::codec

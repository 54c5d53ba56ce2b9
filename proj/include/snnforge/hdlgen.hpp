#pragma once

// VHDL emission for the accelerator: one entity per neuron variant, one
// layer module per layer, the network control unit, the output counter bank,
// a top level and a file-driven testbench. Single clock, synchronous
// active-high reset.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snnforge/network.hpp"

namespace snnforge::hdl {

struct HdlBundle {
    std::map<std::string, std::string> units;    // entity name -> VHDL text, written as <name>.vhd
    std::map<std::string, std::string> memories; // file name -> mem-init text
    std::optional<std::string> stimulus;         // stimulus.txt, present when generated with one

    /// Every file name the bundle writes, sorted.
    std::vector<std::string> file_names() const;
    /// Writes every file into dir (created if missing). Throws GenerationError on IO failure.
    void write(const std::filesystem::path& dir) const;

    friend bool operator==(const HdlBundle&, const HdlBundle&) = default;
};

inline constexpr const char* kStimulusFile = "stimulus.txt";
inline constexpr const char* kCountsFile = "counts.txt";

/// Mem-init file name of a layer memory, 1-based layer index.
std::string mem_file_name(std::size_t layer, bool feedback);

/// Width of each output counter: ceil(log2(n_cycles)) + 1.
int counter_width(std::size_t n_cycles);

/// Throws GenerationError for widths above 32 bits, UsageError if the network is invalid.
HdlBundle generate(const NetworkSpec& spec);
/// Same bundle plus stimulus.txt and a testbench that checks the simulated counts.
HdlBundle generate(const NetworkSpec& spec, const SpikeStream& stimulus);

struct MemInit {
    std::string ff;
    std::optional<std::string> fb;
};

/// One line per input index; each line concatenates every neuron's two's
/// complement weight, neuron 0 in the most significant slot.
std::string emit_meminit(const WeightMatrix& w);
MemInit emit_meminit(const LayerSpec& layer);

/// Inverse of emit_meminit. Throws ParseError on malformed text or geometry.
WeightMatrix parse_meminit(std::string_view text, std::size_t n_neurons, FxpFormat fmt);

struct Testbench {
    std::string vhdl;
    std::string stimulus;                   // one line of n_inputs bits per timestep, channel 0 first
    std::vector<std::uint32_t> expected;    // simulated output counts asserted at the end
};

/// Throws UsageError if the stimulus does not match the input width or n_cycles.
Testbench emit_testbench(const NetworkSpec& spec, const SpikeStream& stimulus);

/// Structural consistency over the bundle's symbol table: every instantiated
/// entity exists, every port map names declared ports with matching kind and
/// width, every input is driven, every generic without default is bound, and
/// every memory file referenced by a layer is present. Empty means clean.
std::vector<std::string> lint(const HdlBundle& bundle);

} // namespace snnforge::hdl

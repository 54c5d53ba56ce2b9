#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snnforge/network.hpp"

namespace snnforge::codec {

// ---- spike rasters ----
//
// Text form:
//   raster <channels> <steps>
//   <steps lines of exactly <channels> characters '0' or '1'; character k is channel k>
//
// Packed form (little-endian):
//   "SNNR" u16 version=1 u32 channels u32 steps, then one bit-packed row per
//   step, channel k at bit (k % 8) of byte (k / 8), rows padded to whole bytes.

std::string format_raster(const SpikeStream& s);
/// Throws ParseError carrying the 1-based line of the first malformed line.
SpikeStream parse_raster(std::string_view text);

std::string pack_raster(const SpikeStream& s);
SpikeStream unpack_raster(std::string_view bytes);

/// Detects the packed form by its magic.
SpikeStream load_raster(const std::filesystem::path& path);
void store_raster(const std::filesystem::path& path, const SpikeStream& s, bool packed = false);

// ---- weight files ----
//
//   "SNNW" u16 version=1 u8 bits i8 scale_exp u32 rows u32 cols
//   rows*cols values, row-major (row = neuron, col = input), each stored in
//   ceil(bits/8) bytes, little-endian two's complement.

struct WeightFile {
    WeightMatrix matrix{0, 0, FxpFormat{8}};
    int scale_exp = 0; // real value = raw * 2^-scale_exp

    friend bool operator==(const WeightFile&, const WeightFile&) = default;
};

std::string encode_weights(const WeightFile& w);
WeightFile decode_weights(std::string_view bytes);
WeightFile load_weights(const std::filesystem::path& path);
void store_weights(const std::filesystem::path& path, const WeightFile& w);

// ---- rate coding ----

/// SplitMix64 used as a counter-based generator: value(seed, i) is the
/// (i+1)-th output of a SplitMix64 stream started at state `seed`.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t index) noexcept;

/// Uniform double in [0, 1) from the top 53 bits.
inline double to_unit(std::uint64_t x) noexcept { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Channel c spikes at step t iff to_unit(splitmix64(seed, t * channels + c)) < values[c].
/// Throws UsageError for a value outside [0, 1].
SpikeStream rate_encode(std::span<const double> values, std::size_t n_steps, std::uint64_t seed);

/// Sample i is encoded with seed + i.
std::vector<SpikeStream> rate_encode_batch(std::span<const std::vector<double>> samples, std::size_t n_steps,
                                           std::uint64_t seed, unsigned jobs = 0);

// ---- raw inputs ----

/// Grayscale PGM (P2 or P5), normalized by its maxval into [0, 1].
std::vector<double> load_pgm(const std::filesystem::path& path);

/// One sample per non-empty line, values separated by commas or whitespace.
/// `divisor` normalizes raw values (255 for 8-bit pixels).
std::vector<std::vector<double>> parse_vectors(std::string_view text, double divisor = 1.0);

// ---- datasets ----
//
// A directory holding raster files plus labels.csv with a "file,label"
// header; the label column may be empty for unlabeled samples.

struct Dataset {
    std::vector<std::string> files;
    std::vector<SpikeStream> inputs;
    std::vector<std::optional<std::size_t>> labels;

    std::size_t size() const noexcept { return inputs.size(); }
    bool labeled() const;
};

Dataset load_dataset(const std::filesystem::path& dir);
void store_dataset(const std::filesystem::path& dir, const Dataset& ds, bool packed = false);

// ---- file helpers ----

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

} // namespace snnforge::codec

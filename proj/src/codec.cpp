#include "snnforge/codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "snnforge/error.hpp"
#include "snnforge/parallel.hpp"

namespace snnforge::codec {

namespace {

constexpr std::string_view kRasterMagic = "SNNR";
constexpr std::string_view kWeightMagic = "SNNW";
constexpr std::uint16_t kVersion = 1;

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(std::string_view data, const char* what) : data_(data), what_(what) {}

    std::uint64_t le(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw ParseError(std::string(what_) + ": truncated");
    }
    std::string_view data_;
    const char* what_;
    std::size_t pos_ = 0;
};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::vector<std::string_view> tokens(std::string_view line, std::string_view seps) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && seps.find(line[i]) != std::string_view::npos) ++i;
        std::size_t j = i;
        while (j < line.size() && seps.find(line[j]) == std::string_view::npos) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

} // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GenerationError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw GenerationError("write failed: " + path.string());
}

// ---- rasters ----

std::string format_raster(const SpikeStream& s) {
    std::string out = "raster " + std::to_string(s.n_channels()) + " " + std::to_string(s.n_steps()) + "\n";
    out.reserve(out.size() + (s.n_channels() + 1) * s.n_steps());
    for (std::size_t t = 0; t < s.n_steps(); ++t) {
        for (const auto b : s.row(t)) out.push_back(b ? '1' : '0');
        out.push_back('\n');
    }
    return out;
}

SpikeStream parse_raster(std::string_view text) {
    auto lines = split_lines(text);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ParseError("empty raster file", 1);
    const auto head = tokens(lines[0], " \t");
    std::size_t channels = 0, steps = 0;
    if (head.size() != 3 || head[0] != "raster" || !parse_number(head[1], channels) ||
        !parse_number(head[2], steps)) {
        throw ParseError("expected header 'raster <channels> <steps>'", 1);
    }
    if (lines.size() - 1 != steps) {
        throw ParseError("header declares " + std::to_string(steps) + " steps, found " +
                             std::to_string(lines.size() - 1) + " rows",
                         lines.size() < steps + 1 ? lines.size() + 1 : steps + 2);
    }
    SpikeStream s(channels, steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto line = lines[t + 1];
        if (line.size() != channels) {
            throw ParseError("row has " + std::to_string(line.size()) + " characters, expected " +
                                 std::to_string(channels),
                             t + 2);
        }
        for (std::size_t c = 0; c < channels; ++c) {
            if (line[c] != '0' && line[c] != '1') {
                throw ParseError(std::string("invalid character '") + line[c] + "' in raster row", t + 2);
            }
            s.set(t, c, line[c] == '1');
        }
    }
    return s;
}

std::string pack_raster(const SpikeStream& s) {
    std::string out(kRasterMagic);
    put_le(out, kVersion, 2);
    put_le(out, s.n_channels(), 4);
    put_le(out, s.n_steps(), 4);
    const std::size_t row_bytes = (s.n_channels() + 7) / 8;
    for (std::size_t t = 0; t < s.n_steps(); ++t) {
        std::string row(row_bytes, '\0');
        for (std::size_t c = 0; c < s.n_channels(); ++c) {
            if (s.at(t, c)) row[c / 8] = static_cast<char>(row[c / 8] | (1 << (c % 8)));
        }
        out += row;
    }
    return out;
}

SpikeStream unpack_raster(std::string_view bytes) {
    Reader r(bytes, "packed raster");
    if (r.take(4) != kRasterMagic) throw ParseError("packed raster: bad magic");
    if (const auto v = r.le(2); v != kVersion) throw ParseError("packed raster: unsupported version " + std::to_string(v));
    const std::size_t channels = r.le(4);
    const std::size_t steps = r.le(4);
    const std::size_t row_bytes = (channels + 7) / 8;
    if (r.remaining() != row_bytes * steps) {
        throw ParseError("packed raster: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                         std::to_string(row_bytes * steps));
    }
    SpikeStream s(channels, steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto row = r.take(row_bytes);
        for (std::size_t c = 0; c < channels; ++c) s.set(t, c, (static_cast<unsigned char>(row[c / 8]) >> (c % 8)) & 1);
        if (channels % 8 != 0 && (static_cast<unsigned char>(row.back()) >> (channels % 8)) != 0) {
            throw ParseError("packed raster: nonzero padding bits in row " + std::to_string(t));
        }
    }
    return s;
}

SpikeStream load_raster(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    try {
        if (data.starts_with(kRasterMagic)) return unpack_raster(data);
        return parse_raster(data);
    } catch (const ParseError& e) {
        throw e.prefixed(path.string() + ": ");
    }
}

void store_raster(const std::filesystem::path& path, const SpikeStream& s, bool packed) {
    write_file(path, packed ? pack_raster(s) : format_raster(s));
}

// ---- weight files ----

std::string encode_weights(const WeightFile& w) {
    const int bits = w.matrix.format().bits();
    if (w.scale_exp < INT8_MIN || w.scale_exp > INT8_MAX) throw UsageError("scale exponent does not fit in 8 bits");
    const int width = (bits + 7) / 8;
    std::string out(kWeightMagic);
    put_le(out, kVersion, 2);
    put_le(out, static_cast<std::uint64_t>(bits), 1);
    put_le(out, static_cast<std::uint8_t>(static_cast<std::int8_t>(w.scale_exp)), 1);
    put_le(out, w.matrix.n_neurons(), 4);
    put_le(out, w.matrix.n_inputs(), 4);
    for (std::size_t i = 0; i < w.matrix.n_neurons(); ++i) {
        for (std::size_t j = 0; j < w.matrix.n_inputs(); ++j) {
            put_le(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(w.matrix.at(i, j))), width);
        }
    }
    return out;
}

WeightFile decode_weights(std::string_view bytes) {
    Reader r(bytes, "weight file");
    if (r.take(4) != kWeightMagic) throw ParseError("weight file: bad magic");
    if (const auto v = r.le(2); v != kVersion) throw ParseError("weight file: unsupported version " + std::to_string(v));
    const int bits = static_cast<int>(r.le(1));
    if (bits < 1 || bits > kMaxBits) throw ParseError("weight file: invalid bit width " + std::to_string(bits));
    const int scale_exp = static_cast<std::int8_t>(static_cast<std::uint8_t>(r.le(1)));
    const std::size_t rows = r.le(4);
    const std::size_t cols = r.le(4);
    const int width = (bits + 7) / 8;
    if (r.remaining() != rows * cols * static_cast<std::size_t>(width)) {
        throw ParseError("weight file: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                         std::to_string(rows * cols * static_cast<std::size_t>(width)));
    }
    WeightFile w{WeightMatrix(rows, cols, FxpFormat(bits)), scale_exp};
    const FxpFormat fmt(bits);
    const int shift = 64 - 8 * width;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const auto raw = static_cast<std::int64_t>(r.le(width) << shift) >> shift; // sign-extend
            if (!fmt.contains(raw)) {
                throw ParseError("weight file: value " + std::to_string(raw) + " at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ") exceeds " + std::to_string(bits) + " bits");
            }
            w.matrix.set(i, j, raw);
        }
    }
    return w;
}

WeightFile load_weights(const std::filesystem::path& path) {
    try {
        return decode_weights(read_file(path));
    } catch (const ParseError& e) {
        throw e.prefixed(path.string() + ": ");
    }
}

void store_weights(const std::filesystem::path& path, const WeightFile& w) { write_file(path, encode_weights(w)); }

// ---- rate coding ----

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SpikeStream rate_encode(std::span<const double> values, std::size_t n_steps, std::uint64_t seed) {
    for (std::size_t c = 0; c < values.size(); ++c) {
        if (!(values[c] >= 0.0 && values[c] <= 1.0)) {
            throw UsageError("rate_encode: value " + std::to_string(values[c]) + " at channel " + std::to_string(c) +
                             " is outside [0, 1]");
        }
    }
    const std::size_t n = values.size();
    SpikeStream s(n, n_steps);
    for (std::size_t t = 0; t < n_steps; ++t) {
        for (std::size_t c = 0; c < n; ++c) s.set(t, c, to_unit(splitmix64(seed, t * n + c)) < values[c]);
    }
    return s;
}

std::vector<SpikeStream> rate_encode_batch(std::span<const std::vector<double>> samples, std::size_t n_steps,
                                           std::uint64_t seed, unsigned jobs) {
    std::vector<SpikeStream> out(samples.size());
    parallel_for(samples.size(), jobs, [&](std::size_t i) { out[i] = rate_encode(samples[i], n_steps, seed + i); });
    return out;
}

// ---- raw inputs ----

std::vector<double> load_pgm(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    // header tokens, skipping comments
    const auto next_token = [&]() -> std::string_view {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return std::string_view(data).substr(start, pos - start);
    };
    const auto magic = next_token();
    if (magic != "P2" && magic != "P5") throw ParseError(path.string() + ": not a grayscale PGM");
    std::size_t w = 0, h = 0;
    unsigned maxval = 0;
    if (!parse_number(next_token(), w) || !parse_number(next_token(), h) || !parse_number(next_token(), maxval) ||
        maxval == 0 || maxval > 65535) {
        throw ParseError(path.string() + ": malformed PGM header");
    }
    std::vector<double> px(w * h);
    if (magic == "P5") {
        ++pos; // single whitespace after maxval
        const int bpp = maxval < 256 ? 1 : 2;
        if (data.size() - std::min(pos, data.size()) < px.size() * static_cast<std::size_t>(bpp)) {
            throw ParseError(path.string() + ": truncated PGM payload");
        }
        for (std::size_t i = 0; i < px.size(); ++i) {
            unsigned v = static_cast<unsigned char>(data[pos++]);
            if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(data[pos++]); // big-endian
            px[i] = static_cast<double>(v) / maxval;
        }
    } else {
        for (auto& p : px) {
            unsigned v = 0;
            if (!parse_number(next_token(), v) || v > maxval) throw ParseError(path.string() + ": bad PGM sample");
            p = static_cast<double>(v) / maxval;
        }
    }
    return px;
}

std::vector<std::vector<double>> parse_vectors(std::string_view text, double divisor) {
    if (!(divisor > 0)) throw UsageError("divisor must be positive");
    std::vector<std::vector<double>> out;
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto toks = tokens(lines[n], ", \t");
        if (toks.empty() || toks[0].starts_with('#')) continue;
        std::vector<double> v;
        for (const auto tok : toks) {
            double x = 0;
            if (!parse_number(tok, x)) throw ParseError("not a number: '" + std::string(tok) + "'", n + 1);
            v.push_back(x / divisor);
        }
        if (!out.empty() && v.size() != out.front().size()) {
            throw ParseError("vector has " + std::to_string(v.size()) + " values, expected " +
                                 std::to_string(out.front().size()),
                             n + 1);
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ---- datasets ----

bool Dataset::labeled() const {
    return !labels.empty() && std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto index = dir / "labels.csv";
    if (!std::filesystem::exists(index)) throw DataError(dir.string() + ": missing labels.csv");
    const std::string text = read_file(index);
    const auto lines = split_lines(text);
    Dataset ds;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto line = lines[n];
        if (line.empty()) continue;
        if (n == 0 && line.starts_with("file")) continue;
        const auto comma = line.find(',');
        const std::string_view file = line.substr(0, comma);
        const std::string_view label = comma == std::string_view::npos ? std::string_view{} : line.substr(comma + 1);
        if (file.empty()) throw ParseError(index.string() + ": empty file name", n + 1);
        std::optional<std::size_t> lab;
        if (!label.empty()) {
            std::size_t v = 0;
            if (!parse_number(label, v)) throw ParseError(index.string() + ": bad label '" + std::string(label) + "'", n + 1);
            lab = v;
        }
        ds.files.emplace_back(file);
        ds.inputs.push_back(load_raster(dir / ds.files.back()));
        ds.labels.push_back(lab);
    }
    if (ds.inputs.empty()) throw DataError(dir.string() + ": dataset is empty");
    return ds;
}

void store_dataset(const std::filesystem::path& dir, const Dataset& ds, bool packed) {
    if (ds.files.size() != ds.inputs.size() || ds.labels.size() != ds.inputs.size()) {
        throw UsageError("dataset columns have different lengths");
    }
    std::filesystem::create_directories(dir);
    std::string index = "file,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        store_raster(dir / ds.files[i], ds.inputs[i], packed);
        index += ds.files[i] + "," + (ds.labels[i] ? std::to_string(*ds.labels[i]) : "") + "\n";
    }
    write_file(dir / "labels.csv", index);
}

} // namespace snnforge::codec

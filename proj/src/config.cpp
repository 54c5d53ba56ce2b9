#include "snnforge/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

#include "snnforge/codec.hpp"
#include "snnforge/error.hpp"

namespace snnforge::codec {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
    throw ConfigError(field.empty() ? msg : field + ": " + msg);
}

void check_keys(const json& obj, const std::string& field, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) fail(field, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(field, "unknown key '" + key + "'");
    }
}

std::string sub(const std::string& field, std::string_view key) {
    return field.empty() ? std::string(key) : field + "." + std::string(key);
}

const json* find(const json& obj, std::string_view key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::int64_t get_int(const json& v, const std::string& field, std::int64_t lo, std::int64_t hi) {
    std::int64_t x = 0;
    if (v.is_number_integer()) {
        x = v.get<std::int64_t>();
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
               std::abs(v.get<double>()) < 0x1.0p62) {
        x = static_cast<std::int64_t>(v.get<double>());
    } else {
        fail(field, "expected an integer");
    }
    if (x < lo || x > hi) fail(field, std::to_string(x) + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

double get_real(const json& v, const std::string& field) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) fail(field, "expected a finite number");
    return v.get<double>();
}

std::string get_string(const json& v, const std::string& field) {
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& field) {
    if (!v.is_boolean()) fail(field, "expected true or false");
    return v.get<bool>();
}

template <class F>
auto wrap(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const UsageError& e) {
        fail(field, e.what());
    } catch (const DataError& e) {
        fail(field, e.what());
    }
}

BitWidths parse_bits(const json& v, const std::string& field, BitWidths base) {
    check_keys(v, field, {"neuron", "ff", "fb"});
    if (const auto* x = find(v, "neuron")) base.neuron = static_cast<int>(get_int(*x, sub(field, "neuron"), 1, kMaxBits));
    if (const auto* x = find(v, "ff")) base.ff = static_cast<int>(get_int(*x, sub(field, "ff"), 1, kMaxBits));
    if (const auto* x = find(v, "fb")) base.fb = static_cast<int>(get_int(*x, sub(field, "fb"), 1, kMaxBits));
    return base;
}

// Weight source as reals, row-major [rows][cols]. For fixed configs `fmt`
// bounds every value and random draws are integers.
std::vector<double> parse_weights(const json& v, const std::string& field, std::size_t rows, std::size_t cols,
                                  const std::filesystem::path& base, std::optional<FxpFormat> fmt) {
    std::vector<double> out;
    out.reserve(rows * cols);
    if (v.is_string()) {
        const auto path = base / v.get<std::string>();
        const WeightFile wf = wrap(field, [&] { return load_weights(path); });
        if (wf.matrix.n_neurons() != rows || wf.matrix.n_inputs() != cols) {
            fail(field, path.string() + " is " + std::to_string(wf.matrix.n_neurons()) + "x" +
                            std::to_string(wf.matrix.n_inputs()) + ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
        }
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                const std::int32_t raw = wf.matrix.at(i, j);
                if (fmt) {
                    if (!fmt->contains(raw)) {
                        fail(field, "value " + std::to_string(raw) + " in " + path.string() + " exceeds " +
                                        std::to_string(fmt->bits()) + " bits");
                    }
                    out.push_back(raw);
                } else {
                    out.push_back(std::ldexp(static_cast<double>(raw), -wf.scale_exp));
                }
            }
        }
        return out;
    }
    if (v.is_array()) {
        if (v.size() != rows) fail(field, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string rf = field + "[" + std::to_string(i) + "]";
            const json& row = v[i];
            if (!row.is_array() || row.size() != cols) fail(rf, "expected a row of " + std::to_string(cols) + " numbers");
            for (std::size_t j = 0; j < cols; ++j) {
                const std::string ef = rf + "[" + std::to_string(j) + "]";
                out.push_back(fmt ? static_cast<double>(get_int(row[j], ef, fmt->min(), fmt->max()))
                                  : get_real(row[j], ef));
            }
        }
        return out;
    }
    if (v.is_object() && find(v, "random")) {
        check_keys(v, field, {"random"});
        const json& r = v["random"];
        const std::string rf = sub(field, "random");
        check_keys(r, rf, {"seed", "range"});
        const auto* seed_v = find(r, "seed");
        const auto* range_v = find(r, "range");
        if (!seed_v || !range_v) fail(rf, "needs 'seed' and 'range'");
        const auto seed = static_cast<std::uint64_t>(get_int(*seed_v, sub(rf, "seed"), 0, INT64_MAX));
        if (!range_v->is_array() || range_v->size() != 2) fail(sub(rf, "range"), "expected [lo, hi]");
        for (std::size_t k = 0; k < rows * cols; ++k) {
            const std::uint64_t x = splitmix64(seed, k);
            if (fmt) {
                const auto lo = get_int((*range_v)[0], sub(rf, "range"), fmt->min(), fmt->max());
                const auto hi = get_int((*range_v)[1], sub(rf, "range"), lo, fmt->max());
                out.push_back(static_cast<double>(lo + static_cast<std::int64_t>(x % static_cast<std::uint64_t>(hi - lo + 1))));
            } else {
                const double lo = get_real((*range_v)[0], sub(rf, "range"));
                const double hi = get_real((*range_v)[1], sub(rf, "range"));
                if (hi < lo) fail(sub(rf, "range"), "hi < lo");
                out.push_back(lo + to_unit(x) * (hi - lo));
            }
        }
        return out;
    }
    fail(field, "expected a weight-file path, an inline matrix or {\"random\": {...}}");
}

struct Common {
    std::size_t n_inputs = 0;
    std::size_t n_neurons = 0;
    NeuronModel model;
    bool recurrent = false;
    bool immediate_current = false;
};

Common parse_common(const json& v, const std::string& field, bool immediate_default) {
    Common c;
    const auto need = [&](std::string_view key) -> const json& {
        const auto* x = find(v, key);
        if (!x) fail(field, "missing '" + std::string(key) + "'");
        return *x;
    };
    c.n_inputs = static_cast<std::size_t>(get_int(need("n_inputs"), sub(field, "n_inputs"), 1, 1 << 24));
    c.n_neurons = static_cast<std::size_t>(get_int(need("n_neurons"), sub(field, "n_neurons"), 1, 1 << 24));
    c.model.order = wrap(sub(field, "model"), [&] { return parse_order(get_string(need("model"), sub(field, "model"))); });
    if (const auto* x = find(v, "reset")) {
        c.model.reset = wrap(sub(field, "reset"), [&] { return parse_reset(get_string(*x, sub(field, "reset"))); });
    }
    if (const auto* x = find(v, "recurrent")) c.recurrent = get_bool(*x, sub(field, "recurrent"));
    c.immediate_current = immediate_default;
    if (const auto* x = find(v, "immediate_current")) c.immediate_current = get_bool(*x, sub(field, "immediate_current"));
    return c;
}

const json& weights_of(const json& layer, const std::string& field, bool recurrent) {
    const auto* w = find(layer, "weights");
    if (!w) fail(field, "missing 'weights'");
    check_keys(*w, sub(field, "weights"), {"ff", "fb"});
    if (!find(*w, "ff")) fail(sub(field, "weights"), "missing 'ff'");
    if (recurrent != (find(*w, "fb") != nullptr)) {
        fail(sub(field, "weights"), recurrent ? "recurrent layer needs 'fb' weights" : "'fb' weights given for a non-recurrent layer");
    }
    return *w;
}

LayerSpec parse_fixed_layer(const json& v, const std::string& field, BitWidths top, bool immediate_default,
                            const std::filesystem::path& base) {
    check_keys(v, field, {"n_inputs", "n_neurons", "model", "reset", "alpha_shift", "beta_shift", "v_th", "v_reset",
                          "immediate_current", "recurrent", "weights", "bits"});
    for (const char* k : {"alpha", "beta"}) {
        if (find(v, k)) fail(field, std::string("'") + k + "' is a float-config key; use '" + k + "_shift'");
    }
    const Common c = parse_common(v, field, immediate_default);
    const BitWidths bits = find(v, "bits") ? parse_bits(v["bits"], sub(field, "bits"), top) : top;
    const FxpFormat nf(bits.neuron), ff(bits.ff), bf(bits.fb);

    LayerSpec layer;
    layer.n_inputs = c.n_inputs;
    layer.n_neurons = c.n_neurons;
    NeuronSpec& ns = layer.neuron;
    ns.model = c.model;
    ns.neuron_bits = nf;
    ns.immediate_current = c.immediate_current;
    if (const auto* x = find(v, "alpha_shift")) ns.alpha_shift = static_cast<int>(get_int(*x, sub(field, "alpha_shift"), 0, kMaxBits));
    if (const auto* x = find(v, "beta_shift")) ns.beta_shift = static_cast<int>(get_int(*x, sub(field, "beta_shift"), 0, kMaxBits));
    const auto* th = find(v, "v_th");
    if (!th) fail(field, "missing 'v_th'");
    ns.v_th = FxpValue(get_int(*th, sub(field, "v_th"), nf.min(), nf.max()), nf);
    if (const auto* x = find(v, "v_reset")) ns.v_reset = FxpValue(get_int(*x, sub(field, "v_reset"), nf.min(), nf.max()), nf);
    else ns.v_reset = FxpValue::zero(nf);

    const json& w = weights_of(v, field, c.recurrent);
    const auto fill = [&](WeightMatrix& m, const json& src, const std::string& f, FxpFormat fmt) {
        const auto vals = parse_weights(src, f, m.n_neurons(), m.n_inputs(), base, fmt);
        for (std::size_t i = 0; i < m.n_neurons(); ++i) {
            for (std::size_t j = 0; j < m.n_inputs(); ++j) m.set(i, j, static_cast<std::int64_t>(vals[i * m.n_inputs() + j]));
        }
    };
    layer.w_ff = WeightMatrix(c.n_neurons, c.n_inputs, ff);
    fill(layer.w_ff, w["ff"], sub(field, "weights.ff"), ff);
    if (c.recurrent) {
        layer.w_fb.emplace(c.n_neurons, c.n_neurons, bf);
        fill(*layer.w_fb, w["fb"], sub(field, "weights.fb"), bf);
    }
    wrap(field, [&] { layer.neuron.validate(); return 0; });
    return layer;
}

FloatLayer parse_float_layer(const json& v, const std::string& field, bool immediate_default,
                             const std::filesystem::path& base) {
    check_keys(v, field, {"n_inputs", "n_neurons", "model", "reset", "alpha", "beta", "v_th", "v_reset",
                          "immediate_current", "recurrent", "weights"});
    const Common c = parse_common(v, field, immediate_default);
    FloatLayer layer;
    layer.n_inputs = c.n_inputs;
    layer.n_neurons = c.n_neurons;
    layer.model = c.model;
    layer.immediate_current = c.immediate_current;
    if (const auto* x = find(v, "alpha")) layer.alpha = get_real(*x, sub(field, "alpha"));
    if (const auto* x = find(v, "beta")) layer.beta = get_real(*x, sub(field, "beta"));
    const auto* th = find(v, "v_th");
    if (!th) fail(field, "missing 'v_th'");
    layer.v_th = get_real(*th, sub(field, "v_th"));
    if (const auto* x = find(v, "v_reset")) layer.v_reset = get_real(*x, sub(field, "v_reset"));
    const json& w = weights_of(v, field, c.recurrent);
    layer.w_ff = parse_weights(w["ff"], sub(field, "weights.ff"), c.n_neurons, c.n_inputs, base, std::nullopt);
    if (c.recurrent) layer.w_fb = parse_weights(w["fb"], sub(field, "weights.fb"), c.n_neurons, c.n_neurons, base, std::nullopt);
    return layer;
}

Encoding parse_encoding(const std::string& s, const std::string& field) {
    if (s == "rate") return Encoding::Rate;
    if (s == "population_rank" || s == "temporal") fail(field, "unsupported encoding '" + s + "'");
    fail(field, "unknown encoding '" + s + "' (expected rate, population_rank, temporal)");
}

json activity_json(const std::vector<LayerActivity>& act) {
    json a = json::array();
    for (const auto& x : act) {
        json o{{"ff", x.ff}, {"fb", x.fb}};
        if (x.any) o["any"] = *x.any;
        a.push_back(o);
    }
    return a;
}

} // namespace

std::string_view to_string(Encoding e) {
    switch (e) {
    case Encoding::Rate: return "rate";
    case Encoding::PopulationRank: return "population_rank";
    case Encoding::Temporal: return "temporal";
    }
    return "?";
}

NetworkSpec NetworkConfig::resolve(std::optional<BitWidths> override) const {
    if (!is_float()) return fixed();
    return quantize(floating(), override.value_or(bits)).spec;
}

NetworkConfig parse_network(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    check_keys(doc, "", {"name", "format", "n_cycles", "propagation", "accumulator", "encoding", "bits", "costs",
                         "clock_hz", "activity", "immediate_current", "layers"});
    NetworkConfig cfg;
    cfg.name = find(doc, "name") ? get_string(doc["name"], "name") : "net";
    if (const auto* x = find(doc, "encoding")) cfg.encoding = parse_encoding(get_string(*x, "encoding"), "encoding");
    if (const auto* x = find(doc, "bits")) cfg.bits = parse_bits(*x, "bits", cfg.bits);
    if (const auto* x = find(doc, "clock_hz")) {
        cfg.clock_hz = get_real(*x, "clock_hz");
        if (!(*cfg.clock_hz > 0)) fail("clock_hz", "must be positive");
    }
    const auto* layers = find(doc, "layers");
    if (!layers || !layers->is_array() || layers->empty()) fail("layers", "expected a non-empty array");
    if (const auto* x = find(doc, "activity")) {
        if (!x->is_array() || x->size() != layers->size()) fail("activity", "expected one entry per layer");
        for (std::size_t l = 0; l < x->size(); ++l) {
            const std::string f = "activity[" + std::to_string(l) + "]";
            check_keys((*x)[l], f, {"ff", "fb", "any"});
            LayerActivity a;
            const auto frac = [&](std::string_view key) {
                const double r = get_real((*x)[l][std::string(key)], sub(f, key));
                if (r < 0 || r > 1) fail(sub(f, key), "must lie in [0, 1]");
                return r;
            };
            if (find((*x)[l], "ff")) a.ff = frac("ff");
            if (find((*x)[l], "fb")) a.fb = frac("fb");
            if (find((*x)[l], "any")) a.any = frac("any");
            cfg.activity.push_back(a);
        }
    }

    const auto* nc = find(doc, "n_cycles");
    if (!nc) fail("", "missing 'n_cycles'");
    const auto n_cycles = static_cast<std::size_t>(get_int(*nc, "n_cycles", 1, INT32_MAX));
    Propagation prop = Propagation::Pipelined;
    if (const auto* x = find(doc, "propagation")) prop = wrap("propagation", [&] { return parse_propagation(get_string(*x, "propagation")); });
    Accumulator accum = Accumulator::Saturating;
    if (const auto* x = find(doc, "accumulator")) {
        const auto s = get_string(*x, "accumulator");
        if (s == "wide") accum = Accumulator::Wide;
        else if (s != "saturating") fail("accumulator", "expected saturating or wide");
    }
    CycleCosts costs;
    if (const auto* x = find(doc, "costs")) {
        check_keys(*x, "costs", {"idle", "act", "net"});
        if (const auto* y = find(*x, "idle")) costs.idle = static_cast<std::uint32_t>(get_int(*y, "costs.idle", 0, 1 << 20));
        if (const auto* y = find(*x, "act")) costs.act = static_cast<std::uint32_t>(get_int(*y, "costs.act", 0, 1 << 20));
        if (const auto* y = find(*x, "net")) costs.net = static_cast<std::uint32_t>(get_int(*y, "costs.net", 0, 1 << 20));
    }
    const bool immediate = find(doc, "immediate_current") ? get_bool(doc["immediate_current"], "immediate_current") : false;

    bool is_float = false;
    if (const auto* x = find(doc, "format")) {
        const auto s = get_string(*x, "format");
        if (s != "fixed" && s != "float") fail("format", "expected fixed or float");
        is_float = s == "float";
    } else {
        for (const auto& l : *layers) is_float = is_float || (l.is_object() && (l.contains("alpha") || l.contains("beta")));
    }

    if (is_float) {
        FloatNetwork net;
        net.name = cfg.name;
        net.n_cycles = n_cycles;
        net.propagation = prop;
        net.accumulator = accum;
        net.costs = costs;
        for (std::size_t l = 0; l < layers->size(); ++l) {
            net.layers.push_back(parse_float_layer((*layers)[l], "layers[" + std::to_string(l) + "]", immediate, base_dir));
        }
        wrap("layers", [&] { net.validate(); return 0; });
        cfg.network = std::move(net);
    } else {
        NetworkSpec spec;
        spec.name = cfg.name;
        spec.n_cycles = n_cycles;
        spec.propagation = prop;
        spec.accumulator = accum;
        spec.costs = costs;
        for (std::size_t l = 0; l < layers->size(); ++l) {
            spec.layers.push_back(
                parse_fixed_layer((*layers)[l], "layers[" + std::to_string(l) + "]", cfg.bits, immediate, base_dir));
        }
        wrap("layers", [&] { spec.validate(); return 0; });
        cfg.network = std::move(spec);
    }
    return cfg;
}

NetworkConfig load_network(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    auto cfg = parse_network(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    return cfg;
}

std::string dump_network(const NetworkSpec& spec, const StoreOptions& opts, std::string_view weight_stem) {
    spec.validate();
    const LayerSpec& first = spec.layers.front();
    const BitWidths top{first.neuron.neuron_bits.bits(), first.w_ff.format().bits(),
                        first.w_fb ? first.w_fb->format().bits() : first.w_ff.format().bits()};
    json doc;
    doc["name"] = spec.name;
    doc["format"] = "fixed";
    doc["n_cycles"] = spec.n_cycles;
    doc["propagation"] = to_string(spec.propagation);
    doc["accumulator"] = spec.accumulator == Accumulator::Wide ? "wide" : "saturating";
    doc["encoding"] = "rate";
    doc["bits"] = {{"neuron", top.neuron}, {"ff", top.ff}, {"fb", top.fb}};
    doc["costs"] = {{"idle", spec.costs.idle}, {"act", spec.costs.act}, {"net", spec.costs.net}};
    if (opts.clock_hz) doc["clock_hz"] = *opts.clock_hz;
    if (!opts.activity.empty()) doc["activity"] = activity_json(opts.activity);

    const auto matrix = [](const WeightMatrix& m) {
        json rows = json::array();
        for (std::size_t i = 0; i < m.n_neurons(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < m.n_inputs(); ++j) row.push_back(m.at(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    json layers = json::array();
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& L = spec.layers[l];
        const NeuronSpec& ns = L.neuron;
        json o;
        o["n_inputs"] = L.n_inputs;
        o["n_neurons"] = L.n_neurons;
        o["model"] = to_string(ns.model.order);
        o["reset"] = to_string(ns.model.reset);
        if (ns.alpha_shift) o["alpha_shift"] = *ns.alpha_shift;
        if (ns.beta_shift) o["beta_shift"] = *ns.beta_shift;
        o["v_th"] = ns.v_th.raw();
        o["v_reset"] = ns.v_reset.raw();
        o["immediate_current"] = ns.immediate_current;
        o["recurrent"] = L.recurrent();
        const BitWidths own{ns.neuron_bits.bits(), L.w_ff.format().bits(), L.w_fb ? L.w_fb->format().bits() : top.fb};
        if (own != top) o["bits"] = {{"neuron", own.neuron}, {"ff", own.ff}, {"fb", own.fb}};
        json w;
        const std::string k = std::to_string(l + 1);
        if (opts.inline_weights) {
            w["ff"] = matrix(L.w_ff);
            if (L.w_fb) w["fb"] = matrix(*L.w_fb);
        } else {
            w["ff"] = std::string(weight_stem) + "_l" + k + "_ff.snnw";
            if (L.w_fb) w["fb"] = std::string(weight_stem) + "_l" + k + "_fb.snnw";
        }
        o["weights"] = w;
        layers.push_back(o);
    }
    doc["layers"] = layers;
    return doc.dump(2) + "\n";
}

void store_network(const std::filesystem::path& path, const NetworkSpec& spec, const StoreOptions& opts) {
    const std::string stem = path.stem().string();
    const auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    if (!opts.inline_weights) {
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            const LayerSpec& L = spec.layers[l];
            const std::string k = std::to_string(l + 1);
            store_weights(dir / (stem + "_l" + k + "_ff.snnw"), {L.w_ff, 0});
            if (L.w_fb) store_weights(dir / (stem + "_l" + k + "_fb.snnw"), {*L.w_fb, 0});
        }
    }
    write_file(path, dump_network(spec, opts, stem));
}

} // namespace snnforge::codec

// Writes the two-class synthetic task: a float-weight config and a labeled
// rate-coded evaluation set. Used to regenerate data/synthetic.

#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "snnforge/codec.hpp"
#include "snnforge/error.hpp"
#include "snnforge/quant.hpp"

using namespace snnforge;

namespace {

nlohmann::ordered_json matrix(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    auto m = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rows; ++i) {
        m.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i * cols),
                                        flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols)));
    }
    return m;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic separable task (float config plus labeled rasters)", "make_synthetic"};
    std::string out = "data/synthetic";
    std::size_t samples = 200;
    std::uint64_t seed = 11;
    app.add_option("--out", out, "output directory");
    app.add_option("--samples", samples, "evaluation samples");
    app.add_option("--seed", seed, "task seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto task = make_synthetic_task(samples, seed);
        nlohmann::ordered_json doc;
        doc["name"] = task.net.name;
        doc["n_cycles"] = task.net.n_cycles;
        doc["bits"] = {{"neuron", 6}, {"ff", 4}, {"fb", 4}};
        auto layers = nlohmann::ordered_json::array();
        for (const auto& l : task.net.layers) {
            nlohmann::ordered_json j;
            j["n_inputs"] = l.n_inputs;
            j["n_neurons"] = l.n_neurons;
            j["model"] = to_string(l.model.order);
            j["reset"] = to_string(l.model.reset);
            if (l.alpha) j["alpha"] = *l.alpha;
            if (l.beta) j["beta"] = *l.beta;
            j["v_th"] = l.v_th;
            if (l.recurrent()) j["recurrent"] = true;
            j["weights"]["ff"] = matrix(l.w_ff, l.n_neurons, l.n_inputs);
            if (l.recurrent()) j["weights"]["fb"] = matrix(*l.w_fb, l.n_neurons, l.n_neurons);
            layers.push_back(j);
        }
        doc["layers"] = layers;
        std::filesystem::create_directories(out);
        codec::write_file(std::filesystem::path(out) / "synthetic.json", doc.dump(2) + "\n");

        codec::Dataset ds;
        for (std::size_t i = 0; i < samples; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "s%04zu.txt", i);
            ds.files.emplace_back(name);
            ds.inputs.push_back(task.data.inputs[i]);
            ds.labels.emplace_back(task.data.labels[i]);
        }
        codec::store_dataset(std::filesystem::path(out) / "eval", ds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

#include <stdexcept>
#include <vector>

#include "latencut/acc.hpp"
#include "latencut/runner.hpp"

namespace latencut {

AccProfile profile_model(const Model& model, std::span<const std::vector<int>> inputs, Mode mode) {
    if (inputs.empty()) throw std::invalid_argument("profiling needs at least one input sequence");
    const PreparedModel prepared = prepare(model);
    const int layers = model.config.num_layers;
    std::vector<double> sums(static_cast<size_t>(layers), 0.0);
    for (const auto& ids : inputs) {
        Matrix h = embed_tokens(prepared, ids);
        ScoreVector sv;
        for (int l = 0; l < layers; ++l) {
            h = baseline_block(h, prepared.layers[l], model.config, mode, &sv);
            sums[static_cast<size_t>(l)] += acc_of_layer(sv);
        }
    }
    for (double& s : sums) s /= static_cast<double>(inputs.size());
    return fit_quadratic(sums);
}

} // namespace latencut

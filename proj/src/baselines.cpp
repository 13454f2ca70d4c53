#include "vnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vnn/error.hpp"

namespace vnn {

namespace {

struct Entry {
    std::size_t layer;
    std::size_t index;  // weights first, then biases
    double magnitude;
};

struct Editable {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    explicit Editable(const Network& net) {
        for (const Layer& l : net.layers()) {
            weights.emplace_back(l.weights().begin(), l.weights().end());
            biases.emplace_back(l.biases().begin(), l.biases().end());
        }
    }

    double& at(const Entry& e) {
        auto& w = weights[e.layer];
        return e.index < w.size() ? w[e.index] : biases[e.layer][e.index - w.size()];
    }

    Network build(const Network& shape) const {
        std::vector<Layer> layers;
        for (std::size_t k = 0; k < shape.num_layers(); ++k) {
            const Layer& l = shape.layer(k);
            layers.emplace_back(l.in_dim(), l.out_dim(), weights[k], biases[k], l.activation());
        }
        return Network(std::move(layers));
    }
};

std::vector<Entry> pool(const Network& net, std::size_t layer) {
    std::vector<Entry> out;
    const Layer& l = net.layer(layer);
    for (std::size_t i = 0; i < l.weights().size(); ++i) out.push_back({layer, i, std::abs(l.weights()[i])});
    for (std::size_t i = 0; i < l.biases().size(); ++i) {
        out.push_back({layer, l.weights().size() + i, std::abs(l.biases()[i])});
    }
    return out;
}

void sort_by_magnitude(std::vector<Entry>& entries) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.magnitude < b.magnitude; });
}

std::size_t prune_count(double rate, std::size_t size) {
    return std::min(size, static_cast<std::size_t>(std::floor(rate * static_cast<double>(size) + 0.5)));
}

}  // namespace

const char* prune_scope_name(PruneScope scope) {
    return scope == PruneScope::Global ? "global" : "per-layer";
}

PruneScope parse_prune_scope(const std::string& text) {
    if (text == "global") return PruneScope::Global;
    if (text == "per-layer" || text == "perlayer") return PruneScope::PerLayer;
    throw ConfigError("unknown pruning scope '" + text + "'");
}

Network mbp_prune(const Network& net, double rate, PruneScope scope) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("pruning rate must lie in [0, 1]");
    Editable edit(net);
    std::vector<std::vector<Entry>> pools;
    if (scope == PruneScope::Global) {
        pools.emplace_back();
        for (std::size_t k = 0; k < net.num_layers(); ++k) {
            const auto p = pool(net, k);
            pools.back().insert(pools.back().end(), p.begin(), p.end());
        }
    } else {
        for (std::size_t k = 0; k < net.num_layers(); ++k) pools.push_back(pool(net, k));
    }
    for (auto& p : pools) {
        sort_by_magnitude(p);
        const std::size_t k = prune_count(rate, p.size());
        for (std::size_t i = 0; i < k; ++i) edit.at(p[i]) = 0.0;
    }
    return edit.build(net);
}

Network mbp_prune_to_sparsity(const Network& net, std::size_t target_nnz) {
    std::size_t nnz = count_nonzeros(net).total;
    if (target_nnz > nnz) {
        throw ValidationError("target of " + std::to_string(target_nnz) +
                              " nonzeros exceeds the current " + std::to_string(nnz));
    }
    std::vector<Entry> all;
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
        const auto p = pool(net, k);
        all.insert(all.end(), p.begin(), p.end());
    }
    sort_by_magnitude(all);
    Editable edit(net);
    for (const Entry& e : all) {
        if (nnz <= target_nnz) break;
        if (e.magnitude == 0.0) continue;
        edit.at(e) = 0.0;
        --nnz;
    }
    return edit.build(net);
}

}  // namespace vnn

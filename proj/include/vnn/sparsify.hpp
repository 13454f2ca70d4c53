#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vnn/lp.hpp"
#include "vnn/network.hpp"

namespace vnn {

enum class EpsilonMode { Additive, Multiplicative };

const char* epsilon_mode_name(EpsilonMode mode);
EpsilonMode parse_epsilon_mode(const std::string& text);

struct SparsifyConfig {
    double epsilon = 0.0;
    EpsilonMode epsilon_mode = EpsilonMode::Additive;
    double margin = 0.0;
    double zero_threshold = 1e-6;
    // Zero-based layer indices; nullopt means every layer. Processed ascending.
    std::optional<std::vector<std::size_t>> layers;

    // Throws ValidationError on a negative or non-finite field.
    void validate() const;
};

// Lower bound required of an active neuron's pre-activation and of the class
// gap when margin == 0, so that "strictly positive" and "strictly largest"
// survive the non-strict LP rows.
inline constexpr double kStrictSlack = 1e-5;

// Samples the layer programs are allowed to constrain: correctly classified
// by `original` with logit margin >= cfg.margin (and > 0).
struct Retention {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> excluded;
};
Retention retain_samples(const Network& original, const std::vector<LabeledSample>& val,
                         const SparsifyConfig& cfg);

// The layer program written out in full: one block of variables per sample
// for the optimized layer and every layer after it.
struct LayerLp {
    lp::LinearProgram program;
    std::size_t layer = 0;
    std::vector<std::size_t> weight_vars;  // row-major, out_dim x in_dim
    std::vector<std::size_t> bias_vars;
    std::vector<std::size_t> l1_vars;      // weights first, then biases
    // value_vars[s][k][j]: neuron j of layer (layer + k) for the s-th kept sample.
    std::vector<std::vector<std::vector<std::size_t>>> value_vars;
    std::vector<std::size_t> class_rows;
    std::vector<std::size_t> samples;      // indices into the validation set
};

// `current` carries the committed prefix; activation states come from
// `original`. Throws ConfigError on an empty validation set and DataError on
// an out-of-range label.
LayerLp build_layer_lp(const Network& original, const Network& current, std::size_t layer,
                       const std::vector<LabeledSample>& val, const SparsifyConfig& cfg);
inline LayerLp build_layer_lp(const Network& net, std::size_t layer,
                              const std::vector<LabeledSample>& val, const SparsifyConfig& cfg) {
    return build_layer_lp(net, net, layer, val, cfg);
}

struct LayerSolution {
    std::size_t layer = 0;
    Layer weights;                 // the optimized layer
    double objective = 0.0;        // L1 mass of the returned layer
    double lp_objective = 0.0;     // optimum before zero-thresholding
    std::vector<std::vector<double>> values;  // x~ of this layer per kept sample
    std::size_t snapped = 0;       // entries set to exactly zero by thresholding
    std::size_t restored = 0;      // snapped entries rolled back
    std::size_t lp_vars = 0;
    std::size_t lp_constraints = 0;
    bool fell_back = false;        // original layer kept
    std::string warning;
};

// Solves the layer program and applies zero-thresholding with rollback.
LayerSolution sparsify_layer(const Network& original, const Network& current, std::size_t layer,
                             const std::vector<LabeledSample>& val, const SparsifyConfig& cfg);
inline LayerSolution sparsify_layer(const Network& net, std::size_t layer,
                                    const std::vector<LabeledSample>& val,
                                    const SparsifyConfig& cfg) {
    return sparsify_layer(net, net, layer, val, cfg);
}

// Checks a candidate replacement of `layer` against every constraint of the
// layer program by forward evaluation. Returns an empty string when it holds,
// else a description of the first violation.
std::string check_layer(const Network& original, const Network& current, std::size_t layer,
                        const Layer& candidate, const std::vector<LabeledSample>& val,
                        const std::vector<std::size_t>& kept, const SparsifyConfig& cfg,
                        double tol = 1e-6);

struct LayerReport {
    std::size_t layer = 0;  // zero-based
    double l1_before = 0.0;
    double l1_after = 0.0;
    std::size_t nnz_before = 0;
    std::size_t nnz_after = 0;
    std::size_t lp_vars = 0;
    std::size_t lp_constraints = 0;
    double seconds = 0.0;
    bool fell_back = false;
};

struct SparsifyReport {
    std::vector<LayerReport> layers;
    std::vector<std::size_t> excluded;  // validation indices left out
    std::vector<std::string> warnings;

    // CSV with the header layer,l1_before,...,seconds; layers printed 1-based.
    std::string to_csv() const;
};

struct SparsifyResult {
    Network network;
    SparsifyReport report;
};

SparsifyResult sparsify_network(const Network& net, const std::vector<LabeledSample>& val,
                                const SparsifyConfig& cfg);

}  // namespace vnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vnn {

enum class Activation { ReLU, Identity };

// Dense layer computing act(W x + b). Weights are row-major (out_dim x in_dim).
// A per-row list of nonzero columns is built on construction so sparse layers
// evaluate with skip-zero products.
class Layer {
public:
    Layer(std::size_t in_dim, std::size_t out_dim, std::vector<double> weights,
          std::vector<double> biases, Activation activation);

    static Layer zeros(std::size_t in_dim, std::size_t out_dim, Activation activation);

    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t out_dim() const noexcept { return out_dim_; }
    Activation activation() const noexcept { return activation_; }

    double weight(std::size_t row, std::size_t col) const { return weights_[row * in_dim_ + col]; }
    double bias(std::size_t row) const { return biases_[row]; }

    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> biases() const noexcept { return biases_; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(weights_).subspan(r * in_dim_, in_dim_);
    }

    // Column indices of the nonzero weights of row r, ascending.
    std::span<const std::uint32_t> row_nonzeros(std::size_t r) const {
        return std::span<const std::uint32_t>(nz_cols_).subspan(nz_row_ptr_[r],
                                                                nz_row_ptr_[r + 1] - nz_row_ptr_[r]);
    }
    std::size_t weight_nonzeros() const noexcept { return nz_cols_.size(); }

    // out = W x + b (pre-activation), skipping zero weights.
    void affine(std::span<const double> x, std::span<double> out) const;
    // Same product without the nonzero index; kept as the reference path.
    void affine_dense(std::span<const double> x, std::span<double> out) const;

    bool operator==(const Layer& other) const;

private:
    std::size_t in_dim_;
    std::size_t out_dim_;
    std::vector<double> weights_;
    std::vector<double> biases_;
    Activation activation_;
    std::vector<std::uint32_t> nz_cols_;
    std::vector<std::size_t> nz_row_ptr_;
};

// Feed-forward network: hidden layers are ReLU, the last layer is Identity
// and produces logits. Immutable once constructed.
class Network {
public:
    explicit Network(std::vector<Layer> layers);

    std::size_t num_layers() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t k) const { return layers_[k]; }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    std::size_t hidden_neurons() const;

    Network with_layer(std::size_t k, Layer replacement) const;

    bool operator==(const Network& other) const = default;

private:
    std::vector<Layer> layers_;
};

struct LabeledSample {
    std::vector<double> input;
    std::size_t label = 0;

    bool operator==(const LabeledSample&) const = default;
};

// Post-activation values x(0)..x(N): the input, every hidden layer, the logits.
using LayerValues = std::vector<std::vector<double>>;

LayerValues forward(const Network& net, std::span<const double> x);
std::vector<double> logits(const Network& net, std::span<const double> x);

// Logits for many inputs, one row per input. The OpenMP version splits the
// batch across threads; the serial one is the reference it is tested against.
std::vector<std::vector<double>> logits_batch(const Network& net,
                                              const std::vector<std::vector<double>>& inputs);
std::vector<std::vector<double>> logits_batch_serial(const Network& net,
                                                     const std::vector<std::vector<double>>& inputs);

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);
std::size_t predict(const Network& net, std::span<const double> x);

// logit[label] - max_{i != label} logit[i]
double logit_margin(std::span<const double> logits, std::size_t label);

struct ActivationPattern {
    // One entry per hidden layer; true iff the pre-activation is strictly positive.
    std::vector<std::vector<bool>> layers;

    bool operator==(const ActivationPattern&) const = default;
};

ActivationPattern activation_pattern(const Network& net, std::span<const double> x);

struct NonzeroCount {
    std::vector<std::size_t> per_layer;
    std::size_t total = 0;
};

// Counts weight and bias entries with |v| > tol.
NonzeroCount count_nonzeros(const Network& net, double tol = 0.0);
std::size_t count_nonzeros(const Layer& layer, double tol = 0.0);

// Sum of |w| over weights and biases.
double l1_mass(const Layer& layer);

}  // namespace vnn

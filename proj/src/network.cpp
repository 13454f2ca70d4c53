#include "vnn/network.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vnn/error.hpp"

namespace vnn {

Layer::Layer(std::size_t in_dim, std::size_t out_dim, std::vector<double> weights,
             std::vector<double> biases, Activation activation)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      activation_(activation) {
    if (in_dim_ == 0 || out_dim_ == 0) {
        throw ValidationError("layer dimensions must be positive");
    }
    if (weights_.size() != in_dim_ * out_dim_) {
        throw ValidationError("weight count " + std::to_string(weights_.size()) + " does not match " +
                              std::to_string(out_dim_) + "x" + std::to_string(in_dim_));
    }
    if (biases_.size() != out_dim_) {
        throw ValidationError("bias count " + std::to_string(biases_.size()) +
                              " does not match out_dim " + std::to_string(out_dim_));
    }
    for (double w : weights_) {
        if (!std::isfinite(w)) throw ValidationError("non-finite weight");
    }
    for (double b : biases_) {
        if (!std::isfinite(b)) throw ValidationError("non-finite bias");
    }

    nz_row_ptr_.reserve(out_dim_ + 1);
    nz_row_ptr_.push_back(0);
    for (std::size_t r = 0; r < out_dim_; ++r) {
        for (std::size_t c = 0; c < in_dim_; ++c) {
            if (weights_[r * in_dim_ + c] != 0.0) nz_cols_.push_back(static_cast<std::uint32_t>(c));
        }
        nz_row_ptr_.push_back(nz_cols_.size());
    }
}

Layer Layer::zeros(std::size_t in_dim, std::size_t out_dim, Activation activation) {
    return Layer(in_dim, out_dim, std::vector<double>(in_dim * out_dim, 0.0),
                 std::vector<double>(out_dim, 0.0), activation);
}

void Layer::affine(std::span<const double> x, std::span<double> out) const {
    if (x.size() != in_dim_ || out.size() != out_dim_) {
        throw ShapeError("affine: expected input of size " + std::to_string(in_dim_) + ", got " +
                         std::to_string(x.size()));
    }
    for (std::size_t r = 0; r < out_dim_; ++r) {
        const double* w = weights_.data() + r * in_dim_;
        double acc = biases_[r];
        for (std::size_t k = nz_row_ptr_[r]; k < nz_row_ptr_[r + 1]; ++k) {
            const std::uint32_t c = nz_cols_[k];
            acc += w[c] * x[c];
        }
        out[r] = acc;
    }
}

void Layer::affine_dense(std::span<const double> x, std::span<double> out) const {
    if (x.size() != in_dim_ || out.size() != out_dim_) {
        throw ShapeError("affine: expected input of size " + std::to_string(in_dim_) + ", got " +
                         std::to_string(x.size()));
    }
    for (std::size_t r = 0; r < out_dim_; ++r) {
        const double* w = weights_.data() + r * in_dim_;
        double acc = biases_[r];
        for (std::size_t c = 0; c < in_dim_; ++c) acc += w[c] * x[c];
        out[r] = acc;
    }
}

bool Layer::operator==(const Layer& other) const {
    return in_dim_ == other.in_dim_ && out_dim_ == other.out_dim_ &&
           activation_ == other.activation_ && weights_ == other.weights_ &&
           biases_ == other.biases_;
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("network needs at least one layer");
    for (std::size_t k = 1; k < layers_.size(); ++k) {
        if (layers_[k].in_dim() != layers_[k - 1].out_dim()) {
            throw ValidationError("layer " + std::to_string(k + 1) + " in_dim " +
                                  std::to_string(layers_[k].in_dim()) + " does not match layer " +
                                  std::to_string(k) + " out_dim " +
                                  std::to_string(layers_[k - 1].out_dim()));
        }
    }
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
        if (layers_[k].activation() != Activation::ReLU) {
            throw ValidationError("hidden layer " + std::to_string(k + 1) + " must use ReLU");
        }
    }
    if (layers_.back().activation() != Activation::Identity) {
        throw ValidationError("output layer must use the identity activation");
    }
}

std::size_t Network::hidden_neurons() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) n += layers_[k].out_dim();
    return n;
}

Network Network::with_layer(std::size_t k, Layer replacement) const {
    std::vector<Layer> layers = layers_;
    layers.at(k) = std::move(replacement);
    return Network(std::move(layers));
}

namespace {

void check_input(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    }
}

}  // namespace

LayerValues forward(const Network& net, std::span<const double> x) {
    check_input(net, x);
    LayerValues values;
    values.reserve(net.num_layers() + 1);
    values.emplace_back(x.begin(), x.end());
    for (const Layer& layer : net.layers()) {
        std::vector<double> out(layer.out_dim());
        layer.affine(values.back(), out);
        if (layer.activation() == Activation::ReLU) {
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        }
        values.push_back(std::move(out));
    }
    return values;
}

std::vector<double> logits(const Network& net, std::span<const double> x) {
    check_input(net, x);
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const Layer& layer : net.layers()) {
        next.assign(layer.out_dim(), 0.0);
        layer.affine(cur, next);
        if (layer.activation() == Activation::ReLU) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        }
        cur.swap(next);
    }
    return cur;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::size_t predict(const Network& net, std::span<const double> x) {
    return argmax(logits(net, x));
}

double logit_margin(std::span<const double> logits, std::size_t label) {
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != label && logits[i] > other) other = logits[i];
    }
    return logits[label] - other;
}

ActivationPattern activation_pattern(const Network& net, std::span<const double> x) {
    check_input(net, x);
    ActivationPattern pattern;
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t k = 0; k + 1 < net.num_layers(); ++k) {
        const Layer& layer = net.layer(k);
        std::vector<double> pre(layer.out_dim());
        layer.affine(cur, pre);
        std::vector<bool> active(layer.out_dim());
        for (std::size_t i = 0; i < pre.size(); ++i) {
            active[i] = pre[i] > 0.0;
            if (!active[i]) pre[i] = 0.0;
        }
        pattern.layers.push_back(std::move(active));
        cur.swap(pre);
    }
    return pattern;
}

std::size_t count_nonzeros(const Layer& layer, double tol) {
    std::size_t n = 0;
    for (double w : layer.weights()) n += std::abs(w) > tol ? 1 : 0;
    for (double b : layer.biases()) n += std::abs(b) > tol ? 1 : 0;
    return n;
}

NonzeroCount count_nonzeros(const Network& net, double tol) {
    NonzeroCount count;
    for (const Layer& layer : net.layers()) {
        count.per_layer.push_back(count_nonzeros(layer, tol));
        count.total += count.per_layer.back();
    }
    return count;
}

double l1_mass(const Layer& layer) {
    double s = 0.0;
    for (double w : layer.weights()) s += std::abs(w);
    for (double b : layer.biases()) s += std::abs(b);
    return s;
}

std::vector<std::vector<double>> logits_batch(const Network& net,
                                              const std::vector<std::vector<double>>& inputs) {
    for (const auto& x : inputs) {
        if (x.size() != net.input_dim()) throw ShapeError("batch input has the wrong dimension");
    }
    std::vector<std::vector<double>> out(inputs.size());
    const long n = static_cast<long>(inputs.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = logits(net, inputs[i]);
    return out;
}

std::vector<std::vector<double>> logits_batch_serial(const Network& net,
                                                     const std::vector<std::vector<double>>& inputs) {
    std::vector<std::vector<double>> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) out.push_back(logits(net, x));
    return out;
}

}  // namespace vnn

#include "vnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vnn/error.hpp"

namespace vnn {

namespace {

struct Params {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

std::vector<Params> to_params(const Network& net) {
    std::vector<Params> params;
    for (const Layer& layer : net.layers()) {
        params.push_back({layer.in_dim(), layer.out_dim(),
                          std::vector<double>(layer.weights().begin(), layer.weights().end()),
                          std::vector<double>(layer.biases().begin(), layer.biases().end())});
    }
    return params;
}

Network to_network(const std::vector<Params>& params) {
    std::vector<Layer> layers;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const bool last = k + 1 == params.size();
        layers.emplace_back(params[k].in, params[k].out, params[k].w, params[k].b,
                            last ? Activation::Identity : Activation::ReLU);
    }
    return Network(std::move(layers));
}

}  // namespace

Network initial_network(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(num_classes);

    std::vector<Layer> layers;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const std::size_t in = widths[k];
        const std::size_t out = widths[k + 1];
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        std::vector<double> w(in * out);
        for (double& v : w) v = he(rng);
        const bool last = k + 2 == widths.size();
        layers.emplace_back(in, out, std::move(w), std::vector<double>(out, 0.0),
                            last ? Activation::Identity : Activation::ReLU);
    }
    return Network(std::move(layers));
}

Network train_fixture(const std::vector<LabeledSample>& train, std::size_t num_classes,
                      const TrainConfig& config) {
    if (train.empty()) throw ConfigError("train_fixture: empty training set");
    const std::size_t input_dim = train.front().input.size();
    for (const auto& s : train) {
        if (s.input.size() != input_dim) throw ShapeError("train_fixture: inconsistent input sizes");
        if (s.label >= num_classes) throw DataError("train_fixture: label out of range");
    }

    Network init = initial_network(input_dim, num_classes, config);
    if (config.epochs == 0) return init;

    std::vector<Params> params = to_params(init);
    const std::size_t n_layers = params.size();
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<double>> acts(n_layers + 1);
    std::vector<std::vector<double>> grads(n_layers + 1);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const LabeledSample& s = train[idx];
            acts[0] = s.input;
            for (std::size_t k = 0; k < n_layers; ++k) {
                const Params& p = params[k];
                acts[k + 1].assign(p.out, 0.0);
                for (std::size_t r = 0; r < p.out; ++r) {
                    double acc = p.b[r];
                    for (std::size_t c = 0; c < p.in; ++c) acc += p.w[r * p.in + c] * acts[k][c];
                    acts[k + 1][r] = (k + 1 < n_layers && acc < 0.0) ? 0.0 : acc;
                }
            }

            // Softmax cross-entropy gradient on the logits.
            const std::vector<double>& z = acts[n_layers];
            const double zmax = *std::max_element(z.begin(), z.end());
            double denom = 0.0;
            for (double v : z) denom += std::exp(v - zmax);
            grads[n_layers].assign(z.size(), 0.0);
            for (std::size_t i = 0; i < z.size(); ++i) {
                grads[n_layers][i] = std::exp(z[i] - zmax) / denom;
            }
            const double loss = -std::log(std::max(grads[n_layers][s.label], 1e-300));
            if (!std::isfinite(loss)) throw TrainingDivergedError("non-finite loss at epoch " +
                                                                  std::to_string(epoch));
            epoch_loss += loss;
            grads[n_layers][s.label] -= 1.0;

            for (std::size_t k = n_layers; k-- > 0;) {
                Params& p = params[k];
                const std::vector<double>& g = grads[k + 1];
                grads[k].assign(p.in, 0.0);
                for (std::size_t r = 0; r < p.out; ++r) {
                    if (g[r] == 0.0) continue;
                    for (std::size_t c = 0; c < p.in; ++c) grads[k][c] += p.w[r * p.in + c] * g[r];
                }
                if (k > 0) {
                    for (std::size_t c = 0; c < p.in; ++c) {
                        if (acts[k][c] <= 0.0) grads[k][c] = 0.0;
                    }
                }
                for (std::size_t r = 0; r < p.out; ++r) {
                    if (g[r] == 0.0) continue;
                    for (std::size_t c = 0; c < p.in; ++c) {
                        p.w[r * p.in + c] -= config.learning_rate * g[r] * acts[k][c];
                    }
                    p.b[r] -= config.learning_rate * g[r];
                }
            }
        }
        if (!std::isfinite(epoch_loss)) {
            throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch));
        }
    }
    for (const Params& p : params) {
        for (double v : p.w) {
            if (!std::isfinite(v)) throw TrainingDivergedError("non-finite weight after training");
        }
        for (double v : p.b) {
            if (!std::isfinite(v)) throw TrainingDivergedError("non-finite bias after training");
        }
    }
    return to_network(params);
}

double accuracy(const Network& net, const std::vector<LabeledSample>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& s : samples) correct += predict(net, s.input) == s.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace vnn

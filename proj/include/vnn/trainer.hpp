#pragma once

#include <cstdint>
#include <vector>

#include "vnn/network.hpp"

namespace vnn {

// Plain SGD on softmax cross-entropy. Produces small fixture models only.
struct TrainConfig {
    std::vector<std::size_t> hidden;  // widths of the ReLU layers
    std::uint64_t seed = 1;
    std::size_t epochs = 50;
    double learning_rate = 0.05;
};

// He-normal weights, zero biases; what train_fixture starts from.
Network initial_network(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config);

Network train_fixture(const std::vector<LabeledSample>& train, std::size_t num_classes,
                      const TrainConfig& config);

double accuracy(const Network& net, const std::vector<LabeledSample>& samples);

}  // namespace vnn

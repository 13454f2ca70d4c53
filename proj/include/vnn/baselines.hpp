#pragma once

#include <cstddef>
#include <string>

#include "vnn/network.hpp"

namespace vnn {

enum class PruneScope { Global, PerLayer };

const char* prune_scope_name(PruneScope scope);
PruneScope parse_prune_scope(const std::string& text);

// Magnitude pruning over weights and biases together. In each pool (the whole
// network, or one layer) the k = floor(rate * size + 0.5) entries of smallest
// |v| are set to zero; equal magnitudes are taken in (layer, row, col) order
// with a layer's biases after its weights. Surviving values are untouched.
// Throws ValidationError unless 0 <= rate <= 1.
Network mbp_prune(const Network& net, double rate, PruneScope scope);

// Global magnitude pruning with the same order, zeroing the smallest entries
// until at most `target_nnz` nonzeros remain. Throws ValidationError when the
// target exceeds the current count.
Network mbp_prune_to_sparsity(const Network& net, std::size_t target_nnz);

}  // namespace vnn

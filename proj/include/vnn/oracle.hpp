#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vnn/network.hpp"
#include "vnn/verify.hpp"

namespace vnn {

struct OracleLimits {
    std::size_t max_neurons = 24;   // total hidden neurons
    std::size_t max_patterns = 4096;
};

enum class OracleStatus { Robust, NotRobust, ResourceExceeded };

const char* oracle_status_name(OracleStatus status);

struct OracleResult {
    OracleStatus status = OracleStatus::ResourceExceeded;
    std::vector<double> counterexample;  // set when NotRobust
    std::size_t patterns = 0;            // complete activation patterns examined
    std::size_t lps = 0;
    std::string note;                    // reason for ResourceExceeded
};

// Gap a counterexample must reach: logit[i] - logit[label] >= this.
inline constexpr double kMisclassifyGap = 1e-9;

// Exact decision by depth-first enumeration of the activation patterns that
// intersect the input box. Every counterexample is re-checked by forward
// evaluation before it is returned.
OracleResult exact_verify(const Network& net, const RobustnessProperty& prop,
                          const OracleLimits& limits = {});

// Same decision restricted to one competing class: NotRobust iff some point
// of the box has logit[target] >= logit[label] + kMisclassifyGap.
OracleResult exact_verify_against(const Network& net, const RobustnessProperty& prop,
                                  std::size_t target, const OracleLimits& limits = {});

// Tries the center, `n_samples` uniform points and, for dim <= 20, every box
// corner. Returns the first point whose argmax differs from the label.
std::optional<std::vector<double>> attack(const Network& net, const RobustnessProperty& prop,
                                          std::size_t n_samples, std::uint64_t seed);

}  // namespace vnn

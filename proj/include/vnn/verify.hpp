#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vnn/network.hpp"

namespace vnn {

// L-infinity ball of radius `delta` around `center`, optionally clamped to [0,1].
struct RobustnessProperty {
    std::vector<double> center;
    double delta = 0.0;
    std::size_t label = 0;
    bool clip = false;

    // Throws ShapeError on a dimension mismatch, ValidationError on a bad
    // delta or label.
    void validate(const Network& net) const;
};

struct Box {
    std::vector<double> lb;
    std::vector<double> ub;
};

// Concrete bounds per layer. pre[k] bounds the affine output of layer k and
// post[k] its activation; for the output layer both are the logits.
struct NetworkBounds {
    Box input;
    std::vector<Box> pre;
    std::vector<Box> post;
};

enum class VerifyMethod { Interval, Polyhedral };

const char* verify_method_name(VerifyMethod method);
VerifyMethod parse_verify_method(const std::string& text);

NetworkBounds interval_bounds(const Network& net, const RobustnessProperty& prop);

// Back-substituting relaxation: every neuron's bounds are obtained by
// substituting its symbolic bounds down to the input box. Concrete bounds are
// intersected with the interval bounds, so they are never looser.
NetworkBounds polyhedral_bounds(const Network& net, const RobustnessProperty& prop);

// Slope of the lower relaxation of an unstable ReLU with bounds l < 0 < u.
inline double relu_lower_slope(double l, double u) { return u > -l ? 1.0 : 0.0; }

enum class Verdict { Verified, Unknown };

const char* verdict_name(Verdict verdict);

struct VerificationResult {
    Verdict verdict = Verdict::Unknown;
    Box output;                      // logit bounds
    // Lower bound of logit[label] - logit[i]; +inf at i == label.
    std::vector<double> margin_lb;
    double min_margin_lb = 0.0;
    double seconds = 0.0;
};

VerificationResult verify_robustness(const Network& net, const RobustnessProperty& prop,
                                     VerifyMethod method);

// Verifies each property; `jobs` == 0 uses the OpenMP default. Results are in
// input order and independent of the thread count apart from timings.
std::vector<VerificationResult> verify_batch(const Network& net,
                                             const std::vector<RobustnessProperty>& props,
                                             VerifyMethod method, std::size_t jobs = 0);
std::vector<VerificationResult> verify_batch_serial(const Network& net,
                                                    const std::vector<RobustnessProperty>& props,
                                                    VerifyMethod method);

}  // namespace vnn

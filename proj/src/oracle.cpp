#include "vnn/oracle.hpp"

#include <algorithm>
#include <random>

#include "vnn/error.hpp"
#include "vnn/lp.hpp"

namespace vnn {

namespace {

// Affine map from the network input: rows of coefficients plus offsets.
struct Affine {
    std::size_t width = 0;
    std::vector<double> coeff;  // row-major
    std::vector<double> offset;

    std::vector<lp::Term> terms(std::size_t row, double scale) const {
        std::vector<lp::Term> out;
        for (std::size_t j = 0; j < width; ++j) {
            const double v = coeff[row * width + j];
            if (v != 0.0) out.push_back({j, scale * v});
        }
        return out;
    }
};

Affine compose(const Layer& layer, const Affine& in) {
    Affine out;
    out.width = in.width;
    out.coeff.assign(layer.out_dim() * in.width, 0.0);
    out.offset.assign(layer.biases().begin(), layer.biases().end());
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        const auto w = layer.row(r);
        for (const std::uint32_t c : layer.row_nonzeros(r)) {
            out.offset[r] += w[c] * in.offset[c];
            for (std::size_t j = 0; j < in.width; ++j) {
                out.coeff[r * in.width + j] += w[c] * in.coeff[c * in.width + j];
            }
        }
    }
    return out;
}

enum class State : std::uint8_t { Active, Inactive, Free };

class Search {
public:
    Search(const Network& net, const RobustnessProperty& prop, const OracleLimits& limits,
           std::optional<std::size_t> target)
        : net_(net), prop_(prop), limits_(limits), target_(target),
          bounds_(interval_bounds(net, prop)) {
        for (std::size_t j = 0; j < net.input_dim(); ++j) {
            base_.add_variable(bounds_.input.lb[j], bounds_.input.ub[j], 0.0);
        }
    }

    OracleResult run() {
        Affine identity;
        identity.width = net_.input_dim();
        identity.coeff.assign(identity.width * identity.width, 0.0);
        for (std::size_t j = 0; j < identity.width; ++j) identity.coeff[j * identity.width + j] = 1.0;
        identity.offset.assign(identity.width, 0.0);
        result_.status = OracleStatus::Robust;
        descend(0, identity, base_);
        return result_;
    }

private:
    bool stopped() const { return result_.status != OracleStatus::Robust; }

    bool feasible(const lp::LinearProgram& prog) {
        ++result_.lps;
        return lp::solve(prog).status == lp::Status::Optimal;
    }

    // Fixes the neurons of layer k one by one, then moves on to layer k + 1.
    void descend(std::size_t k, const Affine& post_prev, const lp::LinearProgram& prog) {
        if (stopped()) return;
        const Affine pre = compose(net_.layer(k), post_prev);
        if (k + 1 == net_.num_layers()) {
            leaf(pre, prog);
            return;
        }
        std::vector<State> states(pre.offset.size(), State::Free);
        branch(k, pre, 0, states, prog);
    }

    void branch(std::size_t k, const Affine& pre, std::size_t j, std::vector<State>& states,
                const lp::LinearProgram& prog) {
        if (stopped()) return;
        if (j == states.size()) {
            Affine post = pre;
            for (std::size_t r = 0; r < states.size(); ++r) {
                if (states[r] == State::Active) continue;
                std::fill_n(post.coeff.begin() + static_cast<long>(r * post.width), post.width, 0.0);
                post.offset[r] = 0.0;
            }
            descend(k + 1, post, prog);
            return;
        }
        const Box& box = bounds_.pre[k];
        if (box.lb[j] >= 0.0) {
            states[j] = State::Active;
            branch(k, pre, j + 1, states, prog);
            return;
        }
        if (box.ub[j] <= 0.0) {
            states[j] = State::Inactive;
            branch(k, pre, j + 1, states, prog);
            return;
        }
        // Active branch first: pre >= 0 is coeff.x >= -offset, inactive flips both signs.
        for (const State s : {State::Active, State::Inactive}) {
            if (stopped()) return;
            lp::LinearProgram child = prog;
            const double sign = s == State::Active ? 1.0 : -1.0;
            child.add_constraint(pre.terms(j, sign), lp::Relation::GreaterEqual,
                                 -sign * pre.offset[j]);
            if (!feasible(child)) continue;
            states[j] = s;
            branch(k, pre, j + 1, states, child);
        }
    }

    void leaf(const Affine& logits, const lp::LinearProgram& prog) {
        if (++result_.patterns > limits_.max_patterns) {
            result_.status = OracleStatus::ResourceExceeded;
            result_.note = "more than " + std::to_string(limits_.max_patterns) + " activation patterns";
            return;
        }
        const std::size_t label = prop_.label;
        for (std::size_t i = 0; i < logits.offset.size(); ++i) {
            if (i == label || (target_ && i != *target_)) continue;
            // Maximize logit_i - logit_label over the pattern's region.
            lp::LinearProgram child = prog;
            for (std::size_t c = 0; c < logits.width; ++c) {
                child.set_cost(c, logits.coeff[label * logits.width + c] -
                                      logits.coeff[i * logits.width + c]);
            }
            ++result_.lps;
            const lp::Solution sol = lp::solve(child);
            if (sol.status != lp::Status::Optimal) continue;
            const double gap = -sol.objective + logits.offset[i] - logits.offset[label];
            if (gap < kMisclassifyGap) continue;
            std::vector<double> x = sol.values;
            for (std::size_t c = 0; c < x.size(); ++c) {
                x[c] = std::clamp(x[c], bounds_.input.lb[c], bounds_.input.ub[c]);
            }
            if (loses(x, i)) {
                result_.status = OracleStatus::NotRobust;
                result_.counterexample = std::move(x);
                return;
            }
            // The region reaches the gap but the vertex does not reproduce it
            // under forward evaluation; refuse to guess either way.
            result_.status = OracleStatus::ResourceExceeded;
            result_.note = "counterexample candidate failed the forward re-check";
            return;
        }
    }

    // Forward re-check of a candidate against class i (or any class).
    bool loses(const std::vector<double>& x, std::size_t i) const {
        const std::vector<double> out = logits(net_, x);
        if (!target_) return argmax(out) != prop_.label;
        return out[i] > out[prop_.label] || (out[i] == out[prop_.label] && i < prop_.label);
    }

    const Network& net_;
    const RobustnessProperty& prop_;
    OracleLimits limits_;
    std::optional<std::size_t> target_;
    NetworkBounds bounds_;
    lp::LinearProgram base_;
    OracleResult result_;
};

}  // namespace

const char* oracle_status_name(OracleStatus status) {
    switch (status) {
        case OracleStatus::Robust: return "robust";
        case OracleStatus::NotRobust: return "not_robust";
        case OracleStatus::ResourceExceeded: return "resource_exceeded";
    }
    return "?";
}

OracleResult exact_verify(const Network& net, const RobustnessProperty& prop,
                          const OracleLimits& limits) {
    prop.validate(net);
    if (net.hidden_neurons() > limits.max_neurons) {
        OracleResult r;
        r.note = std::to_string(net.hidden_neurons()) + " hidden neurons exceed the limit of " +
                 std::to_string(limits.max_neurons);
        return r;
    }
    if (predict(net, prop.center) != prop.label) {
        OracleResult r;
        r.status = OracleStatus::NotRobust;
        r.counterexample = prop.center;
        return r;
    }
    Search search(net, prop, limits, std::nullopt);
    return search.run();
}

OracleResult exact_verify_against(const Network& net, const RobustnessProperty& prop,
                                  std::size_t target, const OracleLimits& limits) {
    prop.validate(net);
    if (target >= net.output_dim() || target == prop.label) {
        throw ValidationError("target class must differ from the label and be in range");
    }
    if (net.hidden_neurons() > limits.max_neurons) {
        OracleResult r;
        r.note = std::to_string(net.hidden_neurons()) + " hidden neurons exceed the limit of " +
                 std::to_string(limits.max_neurons);
        return r;
    }
    Search search(net, prop, limits, target);
    return search.run();
}

std::optional<std::vector<double>> attack(const Network& net, const RobustnessProperty& prop,
                                          std::size_t n_samples, std::uint64_t seed) {
    prop.validate(net);
    if (predict(net, prop.center) != prop.label) return prop.center;
    const std::size_t dim = prop.center.size();
    std::vector<double> lo(dim);
    std::vector<double> hi(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        lo[j] = prop.center[j] - prop.delta;
        hi[j] = prop.center[j] + prop.delta;
        if (prop.clip) {
            lo[j] = std::clamp(lo[j], 0.0, 1.0);
            hi[j] = std::clamp(hi[j], 0.0, 1.0);
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(dim);
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t j = 0; j < dim; ++j) x[j] = lo[j] + unit(rng) * (hi[j] - lo[j]);
        if (predict(net, x) != prop.label) return x;
    }
    if (dim <= 20) {
        const std::uint64_t corners = std::uint64_t{1} << dim;
        for (std::uint64_t mask = 0; mask < corners; ++mask) {
            for (std::size_t j = 0; j < dim; ++j) x[j] = (mask >> j) & 1U ? hi[j] : lo[j];
            if (predict(net, x) != prop.label) return x;
        }
    }
    return std::nullopt;
}

}  // namespace vnn

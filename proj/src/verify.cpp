#include "vnn/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "vnn/error.hpp"

namespace vnn {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

Box input_box(const RobustnessProperty& prop) {
    Box box;
    box.lb.resize(prop.center.size());
    box.ub.resize(prop.center.size());
    for (std::size_t i = 0; i < prop.center.size(); ++i) {
        double lo = prop.center[i] - prop.delta;
        double hi = prop.center[i] + prop.delta;
        if (prop.clip) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
            if (lo > hi) lo = hi = std::clamp(prop.center[i], 0.0, 1.0);
        }
        box.lb[i] = lo;
        box.ub[i] = hi;
    }
    return box;
}

Box affine_interval(const Layer& layer, const Box& in) {
    Box out;
    out.lb.assign(layer.biases().begin(), layer.biases().end());
    out.ub = out.lb;
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        const auto w = layer.row(r);
        double lo = out.lb[r];
        double hi = out.ub[r];
        for (const std::uint32_t c : layer.row_nonzeros(r)) {
            if (w[c] > 0.0) {
                lo += w[c] * in.lb[c];
                hi += w[c] * in.ub[c];
            } else {
                lo += w[c] * in.ub[c];
                hi += w[c] * in.lb[c];
            }
        }
        out.lb[r] = lo;
        out.ub[r] = hi;
    }
    return out;
}

Box activate(const Layer& layer, const Box& pre) {
    if (layer.activation() == Activation::Identity) return pre;
    Box post = pre;
    for (double& v : post.lb) v = std::max(v, 0.0);
    for (double& v : post.ub) v = std::max(v, 0.0);
    return post;
}

// Lower bounds of rows of (coeff . x + offset) with x in `box`.
void concretize_lower(const std::vector<double>& coeff, const std::vector<double>& offset,
                      std::size_t width, const Box& box, std::vector<double>& out) {
    const std::size_t rows = offset.size();
    out.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* e = &coeff[i * width];
        double acc = offset[i];
        for (std::size_t j = 0; j < width; ++j) {
            if (e[j] > 0.0) acc += e[j] * box.lb[j];
            else if (e[j] < 0.0) acc += e[j] * box.ub[j];
        }
        out[i] = acc;
    }
}

// Linear relaxation of one ReLU layer: slope_lo * z <= x <= slope_up * z + shift_up.
struct Relaxation {
    std::vector<double> slope_lo;
    std::vector<double> slope_up;
    std::vector<double> shift_up;
};

Relaxation relax(const Box& pre) {
    const std::size_t n = pre.lb.size();
    Relaxation r{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                 std::vector<double>(n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) {
        const double l = pre.lb[j];
        const double u = pre.ub[j];
        if (l >= 0.0) {
            r.slope_lo[j] = r.slope_up[j] = 1.0;
        } else if (u <= 0.0) {
            // stays zero
        } else {
            r.slope_lo[j] = relu_lower_slope(l, u);
            r.slope_up[j] = u / (u - l);
            r.shift_up[j] = -l * u / (u - l);
        }
    }
    return r;
}

class Polyhedral {
public:
    Polyhedral(const Network& net, const RobustnessProperty& prop) : net_(net) {
        bounds_.input = input_box(prop);
    }

    const NetworkBounds& run() {
        const std::size_t n_layers = net_.num_layers();
        Box in = bounds_.input;
        for (std::size_t k = 0; k < n_layers; ++k) {
            const Layer& layer = net_.layer(k);
            const std::size_t rows = layer.out_dim();
            const std::size_t width = layer.in_dim();
            std::vector<double> coeff(rows * width);
            std::vector<double> offset(layer.biases().begin(), layer.biases().end());
            std::copy(layer.weights().begin(), layer.weights().end(), coeff.begin());

            Box pre = affine_interval(layer, in);
            std::vector<double> lo;
            std::vector<double> hi;
            lower_bounds(coeff, offset, k, lo);
            for (double& v : coeff) v = -v;
            for (double& v : offset) v = -v;
            lower_bounds(coeff, offset, k, hi);
            for (std::size_t r = 0; r < rows; ++r) {
                pre.lb[r] = std::max(pre.lb[r], lo[r]);
                pre.ub[r] = std::min(pre.ub[r], -hi[r]);
            }
            if (layer.activation() == Activation::ReLU) relax_.push_back(relax(pre));
            bounds_.pre.push_back(pre);
            bounds_.post.push_back(activate(layer, pre));
            in = bounds_.post.back();
        }
        return bounds_;
    }

    // Lower bounds of rows over the input of layer `k`.
    void lower_bounds(std::vector<double> coeff, std::vector<double> offset, std::size_t k,
                      std::vector<double>& out) const {
        const std::size_t rows = offset.size();
        std::size_t width = net_.layer(k).in_dim();
        while (k > 0) {
            // Through the ReLU of layer k-1: choose the relaxation by sign.
            const Relaxation& rel = relax_[k - 1];
            for (std::size_t i = 0; i < rows; ++i) {
                double* e = &coeff[i * width];
                for (std::size_t j = 0; j < width; ++j) {
                    if (e[j] > 0.0) {
                        e[j] *= rel.slope_lo[j];
                    } else if (e[j] < 0.0) {
                        offset[i] += e[j] * rel.shift_up[j];
                        e[j] *= rel.slope_up[j];
                    }
                }
            }
            // Through the affine map of layer k-1.
            const Layer& layer = net_.layer(k - 1);
            const std::size_t next = layer.in_dim();
            std::vector<double> composed(rows * next, 0.0);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* e = &coeff[i * width];
                double* dst = &composed[i * next];
                for (std::size_t a = 0; a < width; ++a) {
                    if (e[a] == 0.0) continue;
                    offset[i] += e[a] * layer.bias(a);
                    const auto w = layer.row(a);
                    for (const std::uint32_t c : layer.row_nonzeros(a)) dst[c] += e[a] * w[c];
                }
            }
            coeff = std::move(composed);
            width = next;
            --k;
        }
        concretize_lower(coeff, offset, width, bounds_.input, out);
    }

private:
    const Network& net_;
    NetworkBounds bounds_;
    std::vector<Relaxation> relax_;
};

// Rows logit[label] - logit[i] expressed over the input of the output layer.
void difference_rows(const Layer& out_layer, std::size_t label, std::vector<double>& coeff,
                     std::vector<double>& offset) {
    const std::size_t classes = out_layer.out_dim();
    const std::size_t width = out_layer.in_dim();
    coeff.assign(classes * width, 0.0);
    offset.assign(classes, 0.0);
    const auto wl = out_layer.row(label);
    for (std::size_t i = 0; i < classes; ++i) {
        if (i == label) continue;
        const auto wi = out_layer.row(i);
        for (std::size_t j = 0; j < width; ++j) coeff[i * width + j] = wl[j] - wi[j];
        offset[i] = out_layer.bias(label) - out_layer.bias(i);
    }
}

}  // namespace

void RobustnessProperty::validate(const Network& net) const {
    if (center.size() != net.input_dim()) {
        throw ShapeError("property center has " + std::to_string(center.size()) +
                         " entries, network expects " + std::to_string(net.input_dim()));
    }
    if (!std::isfinite(delta) || delta < 0.0) throw ValidationError("delta must be finite and >= 0");
    if (label >= net.output_dim()) throw ValidationError("property label out of range");
}

const char* verify_method_name(VerifyMethod method) {
    return method == VerifyMethod::Interval ? "interval" : "polyhedral";
}

VerifyMethod parse_verify_method(const std::string& text) {
    if (text == "interval") return VerifyMethod::Interval;
    if (text == "polyhedral" || text == "deeppoly") return VerifyMethod::Polyhedral;
    throw ConfigError("unknown verification method '" + text + "'");
}

const char* verdict_name(Verdict verdict) {
    return verdict == Verdict::Verified ? "verified" : "unknown";
}

NetworkBounds interval_bounds(const Network& net, const RobustnessProperty& prop) {
    prop.validate(net);
    NetworkBounds b;
    b.input = input_box(prop);
    const Box* in = &b.input;
    for (const Layer& layer : net.layers()) {
        b.pre.push_back(affine_interval(layer, *in));
        b.post.push_back(activate(layer, b.pre.back()));
        in = &b.post.back();
    }
    return b;
}

NetworkBounds polyhedral_bounds(const Network& net, const RobustnessProperty& prop) {
    prop.validate(net);
    Polyhedral poly(net, prop);
    return poly.run();
}

VerificationResult verify_robustness(const Network& net, const RobustnessProperty& prop,
                                     VerifyMethod method) {
    const auto t0 = std::chrono::steady_clock::now();
    prop.validate(net);
    const std::size_t last = net.num_layers() - 1;
    const Layer& out_layer = net.layer(last);
    std::vector<double> coeff;
    std::vector<double> offset;
    difference_rows(out_layer, prop.label, coeff, offset);

    VerificationResult res;
    std::vector<double> interval_lb;
    if (method == VerifyMethod::Interval) {
        const NetworkBounds b = interval_bounds(net, prop);
        const Box& in = last == 0 ? b.input : b.post[last - 1];
        concretize_lower(coeff, offset, out_layer.in_dim(), in, res.margin_lb);
        res.output = b.post[last];
    } else {
        Polyhedral poly(net, prop);
        const NetworkBounds& b = poly.run();
        poly.lower_bounds(coeff, offset, last, res.margin_lb);
        const Box& in = last == 0 ? b.input : b.post[last - 1];
        concretize_lower(coeff, offset, out_layer.in_dim(), in, interval_lb);
        for (std::size_t i = 0; i < res.margin_lb.size(); ++i) {
            res.margin_lb[i] = std::max(res.margin_lb[i], interval_lb[i]);
        }
        res.output = b.post[last];
    }
    res.margin_lb[prop.label] = kInfinity;
    res.min_margin_lb = *std::min_element(res.margin_lb.begin(), res.margin_lb.end());
    res.verdict = res.min_margin_lb > 0.0 ? Verdict::Verified : Verdict::Unknown;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<VerificationResult> verify_batch(const Network& net,
                                             const std::vector<RobustnessProperty>& props,
                                             VerifyMethod method, std::size_t jobs) {
    for (const auto& p : props) p.validate(net);
    std::vector<VerificationResult> out(props.size());
    const long n = static_cast<long>(props.size());
    const int threads = jobs == 0 ? 0 : static_cast<int>(jobs);
    if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long i = 0; i < n; ++i) out[i] = verify_robustness(net, props[i], method);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) out[i] = verify_robustness(net, props[i], method);
    }
    return out;
}

std::vector<VerificationResult> verify_batch_serial(const Network& net,
                                                    const std::vector<RobustnessProperty>& props,
                                                    VerifyMethod method) {
    std::vector<VerificationResult> out;
    out.reserve(props.size());
    for (const auto& p : props) out.push_back(verify_robustness(net, p, method));
    return out;
}

}  // namespace vnn

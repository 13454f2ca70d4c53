#include "vnn/sparsify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <tuple>

#include "vnn/error.hpp"
#include "vnn/model_io.hpp"

namespace vnn {

const char* epsilon_mode_name(EpsilonMode mode) {
    return mode == EpsilonMode::Additive ? "additive" : "multiplicative";
}

EpsilonMode parse_epsilon_mode(const std::string& text) {
    if (text == "additive") return EpsilonMode::Additive;
    if (text == "multiplicative") return EpsilonMode::Multiplicative;
    throw ConfigError("epsilon_mode must be additive or multiplicative, got '" + text + "'");
}

void SparsifyConfig::validate() const {
    if (!std::isfinite(epsilon) || epsilon < 0.0) {
        throw ValidationError("epsilon must be a finite value >= 0");
    }
    if (!std::isfinite(margin) || margin < 0.0) {
        throw ValidationError("margin must be a finite value >= 0");
    }
    if (!std::isfinite(zero_threshold) || zero_threshold < 0.0) {
        throw ValidationError("zero_threshold must be a finite value >= 0");
    }
}

namespace {

// Pre-activations and post-activations of every layer for one input.
struct Trace {
    std::vector<std::vector<double>> pre;   // pre[k]: layer k
    std::vector<std::vector<double>> post;  // post[0] = x, post[k+1] = act(pre[k])
};

Trace trace(const Network& net, std::span<const double> x) {
    Trace t;
    t.post.emplace_back(x.begin(), x.end());
    for (const Layer& layer : net.layers()) {
        std::vector<double> z(layer.out_dim());
        layer.affine(t.post.back(), z);
        std::vector<double> y = z;
        if (layer.activation() == Activation::ReLU) {
            for (double& v : y) v = std::max(v, 0.0);
        }
        t.pre.push_back(std::move(z));
        t.post.push_back(std::move(y));
    }
    return t;
}

bool is_hidden(const Network& net, std::size_t k) { return k + 1 < net.num_layers(); }

void check_inputs(const Network& original, const Network& current, std::size_t layer,
                  const std::vector<LabeledSample>& val) {
    if (val.empty()) throw ConfigError("validation set is empty");
    if (layer >= original.num_layers()) {
        throw ConfigError("layer " + std::to_string(layer + 1) + " out of range (network has " +
                          std::to_string(original.num_layers()) + " layers)");
    }
    if (original.num_layers() != current.num_layers()) {
        throw ShapeError("original and current networks differ in depth");
    }
    for (std::size_t k = 0; k < original.num_layers(); ++k) {
        if (original.layer(k).in_dim() != current.layer(k).in_dim() ||
            original.layer(k).out_dim() != current.layer(k).out_dim()) {
            throw ShapeError("original and current networks differ at layer " +
                             std::to_string(k + 1));
        }
    }
    for (std::size_t s = 0; s < val.size(); ++s) {
        if (val[s].input.size() != original.input_dim()) {
            throw ShapeError("validation sample " + std::to_string(s) + " has the wrong dimension");
        }
        if (val[s].label >= original.output_dim()) {
            throw DataError("validation sample " + std::to_string(s) + " label " +
                            std::to_string(val[s].label) + " out of range");
        }
    }
}

// Everything the constraints of one sample need, taken from the current
// network (values, slacks) and the original network (activation states).
struct SampleData {
    std::size_t index = 0;
    std::size_t label = 0;
    Trace cur;
    ActivationPattern pattern;
    double class_gap = 0.0;  // required logit gap
};

struct Interval {
    double lo;
    double hi;
};

// Distance an active (inactive) neuron's pre-activation must keep above
// (below) zero. Half the current distance, so the current network satisfies it.
double neuron_slack(double current_pre) {
    return std::min(kStrictSlack, 0.5 * std::abs(current_pre));
}

// Neurons of `layer` inactive on every sample. Zero parameters keep them at
// exactly zero, so they need no slack.
std::vector<bool> dead_neurons(const Network& net, std::size_t layer,
                               const std::vector<SampleData>& data);

// Allowed range of x~ for neuron i of `layer` given its reference value r.
Interval value_box(const SparsifyConfig& cfg, bool logit, double r) {
    const double e = cfg.epsilon;
    if (cfg.epsilon_mode == EpsilonMode::Additive) return {r - e, r + e};
    if (logit) return {r - e * std::abs(r), r + e * std::abs(r)};
    return {(1.0 - e) * r, (1.0 + e) * r};
}

std::vector<SampleData> prepare(const Network& original, const Network& current,
                                std::size_t layer, const std::vector<LabeledSample>& val,
                                const std::vector<std::size_t>& kept, const SparsifyConfig& cfg) {
    std::vector<SampleData> out;
    out.reserve(kept.size());
    for (std::size_t s : kept) {
        SampleData d;
        d.index = s;
        d.label = val[s].label;
        d.cur = trace(current, val[s].input);
        d.pattern = activation_pattern(original, val[s].input);
        const double gap = logit_margin(d.cur.post.back(), d.label);
        const bool correct = argmax(d.cur.post.back()) == d.label;
        if (!correct || !(gap > 0.0)) {
            throw InternalConsistencyError("sample " + std::to_string(s) +
                                           " is not correctly classified by the current network");
        }
        d.class_gap = cfg.margin > 0.0 ? std::min(cfg.margin, gap) : std::min(kStrictSlack, 0.5 * gap);
        for (std::size_t k = layer; k + 1 < current.num_layers(); ++k) {
            for (std::size_t j = 0; j < current.layer(k).out_dim(); ++j) {
                const bool active = d.pattern.layers[k][j];
                const double pre = d.cur.pre[k][j];
                if (active != (pre > 0.0)) {
                    throw InternalConsistencyError(
                        "sample " + std::to_string(s) + ": current network leaves the original "
                        "activation pattern at layer " + std::to_string(k + 1));
                }
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<bool> dead_neurons(const Network& net, std::size_t layer,
                               const std::vector<SampleData>& data) {
    std::vector<bool> dead(net.layer(layer).out_dim(), is_hidden(net, layer));
    for (const SampleData& d : data) {
        for (std::size_t i = 0; i < dead.size(); ++i) {
            if (dead[i] && d.pattern.layers[layer][i]) dead[i] = false;
        }
    }
    return dead;
}

}  // namespace

Retention retain_samples(const Network& original, const std::vector<LabeledSample>& val,
                         const SparsifyConfig& cfg) {
    Retention r;
    for (std::size_t s = 0; s < val.size(); ++s) {
        const std::vector<double> out = logits(original, val[s].input);
        const double gap = logit_margin(out, val[s].label);
        if (argmax(out) == val[s].label && gap > 0.0 && gap >= cfg.margin) {
            r.kept.push_back(s);
        } else {
            r.excluded.push_back(s);
        }
    }
    return r;
}

LayerLp build_layer_lp(const Network& original, const Network& current, std::size_t layer,
                       const std::vector<LabeledSample>& val, const SparsifyConfig& cfg) {
    cfg.validate();
    check_inputs(original, current, layer, val);
    const Retention ret = retain_samples(original, val, cfg);
    const std::vector<SampleData> data = prepare(original, current, layer, val, ret.kept, cfg);

    using lp::kInf;
    using lp::Relation;
    LayerLp out;
    out.layer = layer;
    out.samples = ret.kept;
    lp::LinearProgram& p = out.program;

    const Layer& target = current.layer(layer);
    const std::size_t in = target.in_dim();
    const std::size_t n_out = target.out_dim();
    for (std::size_t k = 0; k < in * n_out; ++k) out.weight_vars.push_back(p.add_variable(-kInf, kInf));
    for (std::size_t k = 0; k < n_out; ++k) out.bias_vars.push_back(p.add_variable(-kInf, kInf));

    auto add_abs = [&](std::size_t v) {
        const std::size_t t = p.add_variable(0.0, kInf, 1.0);
        p.add_constraint({{t, 1.0}, {v, -1.0}}, Relation::GreaterEqual, 0.0);
        p.add_constraint({{t, 1.0}, {v, 1.0}}, Relation::GreaterEqual, 0.0);
        out.l1_vars.push_back(t);
    };
    for (std::size_t v : out.weight_vars) add_abs(v);
    for (std::size_t v : out.bias_vars) add_abs(v);

    const std::size_t n_layers = current.num_layers();
    const std::vector<bool> dead = dead_neurons(current, layer, data);
    for (const SampleData& d : data) {
        std::vector<std::vector<std::size_t>> vars;
        for (std::size_t k = layer; k < n_layers; ++k) {
            const Layer& L = current.layer(k);
            const bool hidden = is_hidden(current, k);
            std::vector<std::size_t> cur_vars(L.out_dim());
            for (std::size_t j = 0; j < L.out_dim(); ++j) {
                // Affine expression feeding neuron j.
                std::vector<lp::Term> affine;
                double constant = 0.0;
                if (k == layer) {
                    for (std::size_t c = 0; c < in; ++c) {
                        const double a = d.cur.post[k][c];
                        if (a != 0.0) affine.push_back({out.weight_vars[j * in + c], a});
                    }
                    affine.push_back({out.bias_vars[j], 1.0});
                } else {
                    const std::vector<std::size_t>& prev = vars.back();
                    for (std::size_t c = 0; c < L.in_dim(); ++c) {
                        const double w = L.weight(j, c);
                        if (w != 0.0) affine.push_back({prev[c], w});
                    }
                    constant = L.bias(j);
                }

                const bool active = hidden ? static_cast<bool>(d.pattern.layers[k][j]) : true;
                Interval box{-kInf, kInf};
                if (k == layer) box = value_box(cfg, !hidden, d.cur.post[k + 1][j]);
                if (!active) {
                    // Pinned to zero; the box always contains zero here.
                    cur_vars[j] = p.add_variable(0.0, 0.0);
                    const double sigma =
                        k == layer && dead[j] ? 0.0 : neuron_slack(d.cur.pre[k][j]);
                    p.add_constraint(affine, Relation::LessEqual, -sigma - constant);
                    continue;
                }
                cur_vars[j] = p.add_variable(box.lo, box.hi);
                std::vector<lp::Term> eq = affine;
                eq.push_back({cur_vars[j], -1.0});
                p.add_constraint(std::move(eq), Relation::Equal, -constant);
                if (hidden) {
                    const double tau = neuron_slack(d.cur.pre[k][j]);
                    p.add_constraint(affine, Relation::GreaterEqual, tau - constant);
                }
            }
            vars.push_back(std::move(cur_vars));
        }
        const std::vector<std::size_t>& logit_vars = vars.back();
        for (std::size_t i = 0; i < logit_vars.size(); ++i) {
            if (i == d.label) continue;
            out.class_rows.push_back(p.add_constraint(
                {{logit_vars[d.label], 1.0}, {logit_vars[i], -1.0}}, Relation::GreaterEqual,
                d.class_gap));
        }
        out.value_vars.push_back(std::move(vars));
    }
    return out;
}

std::string check_layer(const Network& original, const Network& current, std::size_t layer,
                        const Layer& candidate, const std::vector<LabeledSample>& val,
                        const std::vector<std::size_t>& kept, const SparsifyConfig& cfg,
                        double tol) {
    const Network trial = current.with_layer(layer, candidate);
    const bool logit_layer = !is_hidden(current, layer);
    for (std::size_t s : kept) {
        const std::string tag = "sample " + std::to_string(s) + ": ";
        const Trace ref = trace(current, val[s].input);
        const Trace got = trace(trial, val[s].input);
        const ActivationPattern want = activation_pattern(original, val[s].input);
        for (std::size_t k = layer; k + 1 < trial.num_layers(); ++k) {
            for (std::size_t j = 0; j < got.pre[k].size(); ++j) {
                if ((got.pre[k][j] > 0.0) != static_cast<bool>(want.layers[k][j])) {
                    return tag + "activation of layer " + std::to_string(k + 1) + " neuron " +
                           std::to_string(j) + " changed";
                }
            }
        }
        for (std::size_t j = 0; j < got.post[layer + 1].size(); ++j) {
            const Interval box = value_box(cfg, logit_layer, ref.post[layer + 1][j]);
            const double v = got.post[layer + 1][j];
            if (v < box.lo - tol || v > box.hi + tol) {
                return tag + "value of layer " + std::to_string(layer + 1) + " neuron " +
                       std::to_string(j) + " leaves the epsilon box";
            }
        }
        const std::vector<double>& out = got.post.back();
        if (argmax(out) != val[s].label) return tag + "class changed";
        if (logit_margin(out, val[s].label) < cfg.margin - tol) return tag + "margin below M";
    }
    return {};
}

namespace {

// ----- compact program --------------------------------------------------
//
// Unknowns are the parameters of the optimized layer, each split as p - q
// with p, q >= 0 so the objective sum(p + q) is the L1 mass. Every value the
// full program introduces per sample is an affine function of the layer's
// own outputs z once activation states are frozen, so substituting it out
// leaves only rows over the parameters. Rows that hold for every z in the
// epsilon box are dropped; the rest couple neurons into independent blocks.

struct Row {
    std::vector<std::pair<std::size_t, double>> coeffs;  // over block parameters
    double lo;
    double hi;
};

enum class Side : std::uint8_t { Lower, Upper };

double row_value(const Row& r, const std::vector<double>& params) {
    double v = 0.0;
    for (auto [k, c] : r.coeffs) v += c * params[k];
    return v;
}

struct BlockResult {
    lp::Status status = lp::Status::Optimal;
    std::vector<double> params;
};

// Solves min sum|param| subject to rows. Rows enter lazily: the program is
// re-optimized from its previous basis after each batch of violated rows,
// and the loop ends when the candidate satisfies every row, so the result
// is optimal for the full row set.
BlockResult solve_block(std::size_t n_params, const std::vector<Row>& rows) {
    constexpr double kViolTol = 1e-9;
    lp::DualSimplex dual(std::vector<double>(2 * n_params, 1.0));
    std::vector<std::uint8_t> in_lo(rows.size(), 0);
    std::vector<std::uint8_t> in_hi(rows.size(), 0);
    std::vector<double> norm(rows.size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto [k, c] : rows[r].coeffs) norm[r] += c * c;
        norm[r] = std::sqrt(std::max(norm[r], 1e-300));
    }

    std::vector<lp::Term> terms;
    auto add_side = [&](std::size_t r, Side side) {
        const Row& row = rows[r];
        const double sign = side == Side::Upper ? 1.0 : -1.0;
        terms.clear();
        for (auto [k, c] : row.coeffs) {
            terms.push_back({2 * k, sign * c});
            terms.push_back({2 * k + 1, -sign * c});
        }
        dual.add_row(terms, side == Side::Upper ? row.hi : -row.lo);
        (side == Side::Upper ? in_hi : in_lo)[r] = 1;
    };

    const std::size_t per_round = std::max<std::size_t>(16, n_params / 4);
    std::vector<double> params(n_params, 0.0);
    std::vector<std::tuple<double, std::size_t, Side>> violated;
    bool confirmed = false;
    while (true) {
        violated.clear();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Row& row = rows[r];
            const double v = row_value(row, params);
            if (!in_lo[r] && v < row.lo - kViolTol * std::max(1.0, std::abs(row.lo))) {
                violated.emplace_back((row.lo - v) / norm[r], r, Side::Lower);
            }
            if (!in_hi[r] && v > row.hi + kViolTol * std::max(1.0, std::abs(row.hi))) {
                violated.emplace_back((v - row.hi) / norm[r], r, Side::Upper);
            }
        }
        if (violated.empty()) {
            if (confirmed || dual.num_rows() == 0) break;
            // Re-solve once on a refreshed tableau before accepting.
            confirmed = true;
            if (dual.solve(true) != lp::Status::Optimal) return {lp::Status::Infeasible, {}};
            const std::vector<double> x = dual.values();
            for (std::size_t k = 0; k < n_params; ++k) params[k] = x[2 * k] - x[2 * k + 1];
            continue;
        }
        confirmed = false;
        std::stable_sort(violated.begin(), violated.end(),
                         [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
        for (std::size_t k = 0; k < std::min(per_round, violated.size()); ++k) {
            const auto [amount, r, side] = violated[k];
            add_side(r, side);
            // An equality row enters whole.
            if (rows[r].lo == rows[r].hi) {
                const Side other = side == Side::Upper ? Side::Lower : Side::Upper;
                if (!(other == Side::Upper ? in_hi : in_lo)[r]) add_side(r, other);
            }
        }
        if (dual.solve(false) != lp::Status::Optimal) return {lp::Status::Infeasible, {}};
        const std::vector<double> x = dual.values();
        for (std::size_t k = 0; k < n_params; ++k) params[k] = x[2 * k] - x[2 * k + 1];
    }
    return {lp::Status::Optimal, std::move(params)};
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// A row over the outputs z of the optimized layer: lo <= g.z + c <= hi.
struct OutputRow {
    std::vector<std::pair<std::size_t, double>> g;  // (neuron, coefficient)
    double constant;
    double lo;
    double hi;
    std::size_t sample;  // position in the kept list
};

struct CompactOutcome {
    lp::Status status = lp::Status::Optimal;
    std::vector<double> weights;
    std::vector<double> biases;
};

CompactOutcome solve_compact(const Network& current, std::size_t layer,
                             const std::vector<SampleData>& data, const SparsifyConfig& cfg) {
    const Layer& target = current.layer(layer);
    const std::size_t in = target.in_dim();
    const std::size_t n_out = target.out_dim();
    const bool hidden = is_hidden(current, layer);
    const std::size_t n_layers = current.num_layers();
    const std::size_t S = data.size();

    // Range of each z over the box, per sample; inactive neurons carry no range.
    std::vector<std::vector<Interval>> zbox(S, std::vector<Interval>(n_out));
    for (std::size_t s = 0; s < S; ++s) {
        const SampleData& d = data[s];
        for (std::size_t i = 0; i < n_out; ++i) {
            const Interval box = value_box(cfg, !hidden, d.cur.post[layer + 1][i]);
            if (!hidden) {
                zbox[s][i] = box;
            } else if (d.pattern.layers[layer][i]) {
                zbox[s][i] = {std::max(box.lo, neuron_slack(d.cur.pre[layer][i])), box.hi};
            } else {
                zbox[s][i] = {-lp::kInf, -neuron_slack(d.cur.pre[layer][i])};
            }
        }
    }

    // Rows after the optimized layer, in terms of z, keeping the ones that
    // can bind somewhere in the box.
    std::vector<OutputRow> coupling;
    auto consider = [&](std::size_t s, const std::vector<double>& g, double c, double lo, double hi) {
        OutputRow row{{}, c, lo, hi, s};
        double min_v = c;
        double max_v = c;
        for (std::size_t i = 0; i < n_out; ++i) {
            if (g[i] == 0.0) continue;
            row.g.emplace_back(i, g[i]);
            const Interval& b = zbox[s][i];
            min_v += g[i] * (g[i] > 0 ? b.lo : b.hi);
            max_v += g[i] * (g[i] > 0 ? b.hi : b.lo);
        }
        const double guard = 1e-12 * (1.0 + std::abs(c));
        const bool lo_ok = !std::isfinite(lo) || min_v >= lo + guard;
        const bool hi_ok = !std::isfinite(hi) || max_v <= hi - guard;
        if (lo_ok && hi_ok) return;
        coupling.push_back(std::move(row));
    };

    for (std::size_t s = 0; s < S; ++s) {
        const SampleData& d = data[s];
        // x~ of the current layer as a map of z: identity on active neurons.
        std::vector<std::vector<double>> E(n_out, std::vector<double>(n_out, 0.0));
        std::vector<double> e(n_out, 0.0);
        for (std::size_t i = 0; i < n_out; ++i) {
            if (!hidden || d.pattern.layers[layer][i]) E[i][i] = 1.0;
        }
        for (std::size_t m = layer + 1; m < n_layers; ++m) {
            const Layer& L = current.layer(m);
            std::vector<std::vector<double>> P(L.out_dim(), std::vector<double>(n_out, 0.0));
            std::vector<double> pc(L.out_dim(), 0.0);
            for (std::size_t j = 0; j < L.out_dim(); ++j) {
                pc[j] = L.bias(j);
                for (std::uint32_t c : L.row_nonzeros(j)) {
                    const double w = L.weight(j, c);
                    pc[j] += w * e[c];
                    for (std::size_t i = 0; i < n_out; ++i) P[j][i] += w * E[c][i];
                }
            }
            if (is_hidden(current, m)) {
                for (std::size_t j = 0; j < L.out_dim(); ++j) {
                    if (d.pattern.layers[m][j]) {
                        consider(s, P[j], pc[j], neuron_slack(d.cur.pre[m][j]), lp::kInf);
                    } else {
                        consider(s, P[j], pc[j], -lp::kInf, -neuron_slack(d.cur.pre[m][j]));
                        std::fill(P[j].begin(), P[j].end(), 0.0);
                        pc[j] = 0.0;
                    }
                }
            }
            E = std::move(P);
            e = std::move(pc);
        }
        // E, e now give the logits.
        const std::size_t c = d.label;
        for (std::size_t i = 0; i < E.size(); ++i) {
            if (i == c) continue;
            std::vector<double> g(n_out);
            for (std::size_t k = 0; k < n_out; ++k) g[k] = E[c][k] - E[i][k];
            consider(s, g, e[c] - e[i], d.class_gap, lp::kInf);
        }
    }

    // Input coordinates used by at least one sample.
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < in; ++c) {
        for (const SampleData& d : data) {
            if (d.cur.post[layer][c] != 0.0) {
                cols.push_back(c);
                break;
            }
        }
    }
    const std::size_t per_neuron = cols.size() + 1;

    UnionFind uf(n_out);
    for (const OutputRow& r : coupling) {
        for (std::size_t k = 1; k < r.g.size(); ++k) uf.unite(r.g[0].first, r.g[k].first);
    }
    std::vector<std::vector<std::size_t>> blocks(n_out);
    const std::vector<bool> dead = dead_neurons(current, layer, data);
    for (std::size_t i = 0; i < n_out; ++i) {
        if (!dead[i]) blocks[uf.find(i)].push_back(i);
    }
    std::vector<std::vector<std::size_t>> coupling_of(n_out);
    for (std::size_t r = 0; r < coupling.size(); ++r) {
        if (!coupling[r].g.empty()) coupling_of[uf.find(coupling[r].g[0].first)].push_back(r);
    }

    CompactOutcome outcome;
    outcome.weights.assign(in * n_out, 0.0);
    outcome.biases.assign(n_out, 0.0);

    for (std::size_t root = 0; root < n_out; ++root) {
        const std::vector<std::size_t>& members = blocks[root];
        if (members.empty()) continue;
        std::vector<std::size_t> slot(n_out, static_cast<std::size_t>(-1));
        for (std::size_t k = 0; k < members.size(); ++k) slot[members[k]] = k;

        // z_i of sample s as parameter coefficients, scaled by g.
        auto append_z = [&](Row& row, std::size_t s, std::size_t i, double g) {
            const std::size_t base = slot[i] * per_neuron;
            const std::vector<double>& a = data[s].cur.post[layer];
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const double v = a[cols[k]];
                if (v != 0.0) row.coeffs.emplace_back(base + k, g * v);
            }
            row.coeffs.emplace_back(base + cols.size(), g);
        };

        std::vector<Row> rows;
        bool zero_ok = true;
        for (std::size_t i : members) {
            for (std::size_t s = 0; s < S; ++s) {
                Row row;
                append_z(row, s, i, 1.0);
                row.lo = zbox[s][i].lo;
                row.hi = zbox[s][i].hi;
                if (row.lo > 0.0 || row.hi < 0.0) zero_ok = false;
                rows.push_back(std::move(row));
            }
        }
        for (std::size_t r : coupling_of[root]) {
            const OutputRow& o = coupling[r];
            Row row;
            for (auto [i, g] : o.g) append_z(row, o.sample, i, g);
            row.lo = o.lo - o.constant;
            row.hi = o.hi - o.constant;
            if (row.lo > 0.0 || row.hi < 0.0) zero_ok = false;
            rows.push_back(std::move(row));
        }
        if (zero_ok) continue;  // all-zero parameters are feasible and cost nothing

        BlockResult res = solve_block(members.size() * per_neuron, rows);
        if (res.status != lp::Status::Optimal) {
            outcome.status = res.status;
            return outcome;
        }
        for (std::size_t i : members) {
            const std::size_t base = slot[i] * per_neuron;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                outcome.weights[i * in + cols[k]] = res.params[base + k];
            }
            outcome.biases[i] = res.params[base + cols.size()];
        }
    }
    return outcome;
}

}  // namespace

LayerSolution sparsify_layer(const Network& original, const Network& current, std::size_t layer,
                             const std::vector<LabeledSample>& val, const SparsifyConfig& cfg) {
    cfg.validate();
    check_inputs(original, current, layer, val);
    const Retention ret = retain_samples(original, val, cfg);
    const std::vector<SampleData> data = prepare(original, current, layer, val, ret.kept, cfg);
    const Layer& base = current.layer(layer);

    LayerSolution sol{.layer = layer, .weights = base, .values = {}, .warning = {}};
    sol.objective = l1_mass(base);
    sol.lp_objective = sol.objective;

    // Sizes of the full program, without materializing it.
    {
        const std::size_t params = base.in_dim() * base.out_dim() + base.out_dim();
        std::size_t vars = 2 * params;
        std::size_t rows = 2 * params;
        for (const SampleData& d : data) {
            for (std::size_t k = layer; k < current.num_layers(); ++k) {
                const std::size_t w = current.layer(k).out_dim();
                vars += w;
                if (!is_hidden(current, k)) {
                    rows += w + (w - 1);
                } else {
                    for (std::size_t j = 0; j < w; ++j) rows += d.pattern.layers[k][j] ? 2 : 1;
                }
            }
        }
        sol.lp_vars = vars;
        sol.lp_constraints = rows;
    }

    auto record_values = [&](const Layer& chosen) {
        sol.values.clear();
        for (const SampleData& d : data) {
            std::vector<double> z(chosen.out_dim());
            chosen.affine(d.cur.post[layer], z);
            if (chosen.activation() == Activation::ReLU) {
                for (double& v : z) v = std::max(v, 0.0);
            }
            sol.values.push_back(std::move(z));
        }
    };

    const std::string base_check = check_layer(original, current, layer, base, val, ret.kept, cfg);
    if (!base_check.empty()) {
        throw InternalConsistencyError("layer " + std::to_string(layer + 1) +
                                       ": the current layer fails its own constraints (" +
                                       base_check + ")");
    }
    if (data.empty()) {
        sol.warning = "no validation sample retained; layer " + std::to_string(layer + 1) +
                      " left unchanged";
        sol.fell_back = true;
        record_values(base);
        return sol;
    }

    const CompactOutcome lp_out = solve_compact(current, layer, data, cfg);
    if (lp_out.status != lp::Status::Optimal) {
        sol.fell_back = true;
        sol.warning = "layer " + std::to_string(layer + 1) + ": program reported " +
                      lp::status_name(lp_out.status) + "; original layer kept";
        record_values(base);
        return sol;
    }

    std::vector<double> values = lp_out.weights;
    values.insert(values.end(), lp_out.biases.begin(), lp_out.biases.end());
    const std::size_t n_w = lp_out.weights.size();
    auto make_layer = [&](const std::vector<double>& v) {
        return Layer(base.in_dim(), base.out_dim(), std::vector<double>(v.begin(), v.begin() + n_w),
                     std::vector<double>(v.begin() + n_w, v.end()), base.activation());
    };
    {
        double l1 = 0.0;
        for (double v : values) l1 += std::abs(v);
        sol.lp_objective = l1;
    }

    // Zero-thresholding, then rollback in increasing magnitude order.
    std::vector<std::size_t> snapped;
    std::vector<double> trial = values;
    for (std::size_t k = 0; k < trial.size(); ++k) {
        if (trial[k] != 0.0 && std::abs(trial[k]) < cfg.zero_threshold) {
            snapped.push_back(k);
            trial[k] = 0.0;
        }
    }
    std::stable_sort(snapped.begin(), snapped.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(values[a]) < std::abs(values[b]);
    });

    std::optional<Layer> accepted;
    std::size_t restored = 0;
    std::string last_failure;
    while (true) {
        Layer cand = make_layer(trial);
        last_failure = check_layer(original, current, layer, cand, val, ret.kept, cfg);
        if (last_failure.empty()) {
            accepted = std::move(cand);
            break;
        }
        if (restored == snapped.size()) break;
        trial[snapped[restored]] = values[snapped[restored]];
        ++restored;
    }

    if (!accepted || l1_mass(*accepted) > l1_mass(base)) {
        sol.fell_back = true;
        sol.warning = "layer " + std::to_string(layer + 1) +
                      ": solution failed the re-check (" +
                      (last_failure.empty() ? "L1 mass grew" : last_failure) +
                      "); original layer kept";
        record_values(base);
        return sol;
    }
    sol.snapped = snapped.size() - restored;
    sol.restored = restored;
    sol.weights = std::move(*accepted);
    sol.objective = l1_mass(sol.weights);
    record_values(sol.weights);
    return sol;
}

std::string SparsifyReport::to_csv() const {
    std::ostringstream out;
    out << "layer,l1_before,l1_after,nnz_before,nnz_after,lp_vars,lp_constraints,seconds\n";
    for (const LayerReport& r : layers) {
        out << r.layer + 1 << ',' << format_real(r.l1_before) << ',' << format_real(r.l1_after)
            << ',' << r.nnz_before << ',' << r.nnz_after << ',' << r.lp_vars << ','
            << r.lp_constraints << ',' << format_real(r.seconds) << '\n';
    }
    return out.str();
}

SparsifyResult sparsify_network(const Network& net, const std::vector<LabeledSample>& val,
                                const SparsifyConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> order;
    if (cfg.layers) {
        order = *cfg.layers;
        for (std::size_t l : order) {
            if (l >= net.num_layers()) {
                throw ConfigError("layer " + std::to_string(l + 1) + " out of range (network has " +
                                  std::to_string(net.num_layers()) + " layers)");
            }
        }
        std::sort(order.begin(), order.end());
        order.erase(std::unique(order.begin(), order.end()), order.end());
    } else {
        order.resize(net.num_layers());
        std::iota(order.begin(), order.end(), 0);
    }

    SparsifyResult result{net, {}};
    if (order.empty()) return result;
    if (val.empty()) throw ConfigError("validation set is empty");

    const Retention ret = retain_samples(net, val, cfg);
    result.report.excluded = ret.excluded;
    if (!ret.excluded.empty()) {
        result.report.warnings.push_back(std::to_string(ret.excluded.size()) +
                                         " validation sample(s) misclassified or below the margin "
                                         "were excluded");
    }
    std::vector<LabeledSample> kept;
    for (std::size_t s : ret.kept) kept.push_back(val[s]);
    if (kept.empty()) {
        result.report.warnings.push_back("no validation sample retained; network unchanged");
        return result;
    }

    for (std::size_t l : order) {
        const auto t0 = std::chrono::steady_clock::now();
        LayerSolution sol = sparsify_layer(net, result.network, l, kept, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        LayerReport row;
        row.layer = l;
        row.l1_before = l1_mass(result.network.layer(l));
        row.nnz_before = count_nonzeros(result.network.layer(l));
        row.l1_after = l1_mass(sol.weights);
        row.nnz_after = count_nonzeros(sol.weights);
        row.lp_vars = sol.lp_vars;
        row.lp_constraints = sol.lp_constraints;
        row.seconds = std::chrono::duration<double>(t1 - t0).count();
        row.fell_back = sol.fell_back;
        if (!sol.warning.empty()) result.report.warnings.push_back(sol.warning);
        result.report.layers.push_back(row);
        result.network = result.network.with_layer(l, std::move(sol.weights));
    }
    return result;
}

}  // namespace vnn

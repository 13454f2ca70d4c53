#include "vnn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vnn/error.hpp"
#include "vnn/io_util.hpp"
#include "vnn/model_io.hpp"
#include "vnn/trainer.hpp"

namespace vnn {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double parse_real(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
    }
}

std::size_t verdict_column(OracleStatus s) {
    switch (s) {
        case OracleStatus::Robust: return 0;
        case OracleStatus::NotRobust: return 1;
        case OracleStatus::ResourceExceeded: return 2;
    }
    return 2;
}

}  // namespace

std::vector<FixtureSpec> standard_fixtures() {
    return {
        {.name = "blobs_2x8_a", .hidden = {8, 8}, .dim = 4, .classes = 3, .samples = 250, .seed = 11, .epochs = 40},
        {.name = "blobs_2x8_b", .hidden = {8, 8}, .dim = 3, .classes = 2, .samples = 250, .seed = 12, .epochs = 40},
        {.name = "blobs_2x20", .hidden = {20, 20}, .dim = 6, .classes = 3, .samples = 250, .seed = 13, .epochs = 40},
        {.name = "blobs_3x16", .hidden = {16, 16, 16}, .dim = 8, .classes = 4, .samples = 250, .seed = 14, .epochs = 40},
        {.name = "blobs_4x32", .hidden = {32, 32, 32, 32}, .dim = 10, .classes = 5, .samples = 250, .seed = 15, .epochs = 40},
    };
}

Fixture build_fixture(const FixtureSpec& spec) {
    const Dataset data = synth_blobs(spec.samples, spec.dim, spec.classes, spec.seed);
    TrainConfig cfg;
    cfg.hidden = spec.hidden;
    cfg.seed = spec.seed;
    cfg.epochs = spec.epochs;
    return Fixture{spec.name, train_fixture(data.subset(Split::Train), spec.classes, cfg),
                   data.subset(Split::Validation), data.subset(Split::Test)};
}

void save_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_network(fixture.net, dir / (fixture.name + ".vnn"));
    export_csv(fixture.validation, dir / (fixture.name + ".val.csv"));
    export_csv(fixture.test, dir / (fixture.name + ".test.csv"));
}

Fixture load_fixture(const std::filesystem::path& dir, const std::string& name) {
    return Fixture{name, load_network(dir / (name + ".vnn")), import_csv(dir / (name + ".val.csv")),
                   import_csv(dir / (name + ".test.csv"))};
}

std::vector<std::size_t> parse_layer_list(std::string_view text) {
    std::vector<std::size_t> layers;
    for (const std::string& part : split(text, ',')) {
        const std::string t = trim(part);
        if (t.empty()) continue;
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size() || v < 1) throw ConfigError("layer '" + t + "' is not a positive integer");
        layers.push_back(static_cast<std::size_t>(v - 1));
    }
    if (layers.empty()) throw ConfigError("empty layer list");
    return layers;
}

SparsifyConfig parse_sparsify_config(std::string_view text, SparsifyConfig cfg) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "epsilon") cfg.epsilon = parse_real(key, value);
        else if (key == "epsilon_mode") cfg.epsilon_mode = parse_epsilon_mode(value);
        else if (key == "margin") cfg.margin = parse_real(key, value);
        else if (key == "zero_threshold") cfg.zero_threshold = parse_real(key, value);
        else if (key == "layers") cfg.layers = value == "all" ? std::nullopt
                                                             : std::optional(parse_layer_list(value));
        else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::vector<SweepRow> verify_sweep(const Network& net, const std::vector<LabeledSample>& samples,
                                   const SweepOptions& options) {
    if (options.deltas.empty()) throw ConfigError("at least one delta is required");
    for (double d : options.deltas) {
        if (!std::isfinite(d) || d < 0.0) throw ValidationError("delta must be finite and >= 0");
    }
    std::vector<bool> correct(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].input.size() != net.input_dim()) throw ShapeError("sample dimension mismatch");
        if (samples[s].label >= net.output_dim()) throw DataError("sample label out of range");
        correct[s] = predict(net, samples[s].input) == samples[s].label;
    }
    std::vector<SweepRow> rows;
    for (const VerifyMethod method : options.methods) {
        for (const double delta : options.deltas) {
            std::vector<RobustnessProperty> props;
            std::vector<std::size_t> ids;
            for (std::size_t s = 0; s < samples.size(); ++s) {
                if (!correct[s]) continue;
                props.push_back({samples[s].input, delta, samples[s].label, options.clip});
                ids.push_back(s);
            }
            const auto results = verify_batch(net, props, method, options.jobs);
            std::size_t next = 0;
            for (std::size_t s = 0; s < samples.size(); ++s) {
                SweepRow row{.sample_id = s, .delta = delta, .method = method};
                if (next < ids.size() && ids[next] == s) {
                    const VerificationResult& r = results[next++];
                    row.verdict = r.verdict;
                    row.time_ms = 1e3 * r.seconds;
                    row.min_margin_lb = r.min_margin_lb;
                } else {
                    row.misclassified = true;
                    row.min_margin_lb = logit_margin(logits(net, samples[s].input), samples[s].label);
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
    std::vector<SweepSummary> out;
    std::vector<std::size_t> timed;
    for (const SweepRow& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) {
            return s.method == r.method && s.delta == r.delta;
        });
        if (it == out.end()) {
            out.push_back({.method = r.method, .delta = r.delta});
            timed.push_back(0);
            it = out.end() - 1;
        }
        const std::size_t k = static_cast<std::size_t>(it - out.begin());
        ++it->total;
        if (r.misclassified) continue;
        ++timed[k];
        it->mean_time_ms += r.time_ms;
        if (r.verdict == Verdict::Verified) ++it->verified;
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (timed[k] > 0) out[k].mean_time_ms /= static_cast<double>(timed[k]);
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "sample_id,delta,method,verdict,time_ms,min_margin_lb\n";
    for (const SweepRow& r : rows) {
        out += std::to_string(r.sample_id) + "," + format_real(r.delta) + "," +
               verify_method_name(r.method) + "," +
               (r.misclassified ? "misclassified" : verdict_name(r.verdict)) + "," +
               fixed(r.time_ms, 4) + "," + format_real(r.min_margin_lb) + "\n";
    }
    return out;
}

std::size_t OracleMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (std::size_t c : row) t += c;
    }
    return t;
}

std::string OracleMatrix::markdown(const std::string& original_name, const std::string& other_name) const {
    static const char* names[3] = {"Robust", "NotRobust", "Timeout"};
    std::string out = "| " + original_name + " \\ " + other_name + " | Robust | NotRobust | Timeout |\n";
    out += "|---|---|---|---|\n";
    for (std::size_t r = 0; r < 3; ++r) {
        out += std::string("| ") + names[r];
        for (std::size_t c = 0; c < 3; ++c) out += " | " + std::to_string(counts[r][c]);
        out += " |\n";
    }
    return out;
}

std::optional<OracleMatrix> oracle_matrix(const Network& original, const Network& other,
                                          const std::vector<LabeledSample>& samples, double delta,
                                          bool clip, const OracleLimits& limits, std::string* note) {
    for (const Network* net : {&original, &other}) {
        if (net->hidden_neurons() > limits.max_neurons) {
            if (note) {
                *note = "resource exceeded: " + std::to_string(net->hidden_neurons()) +
                        " hidden neurons, oracle limit " + std::to_string(limits.max_neurons);
            }
            return std::nullopt;
        }
    }
    OracleMatrix m;
    m.samples = samples.size();
    m.classes = original.output_dim();
    m.delta = delta;
    for (const LabeledSample& s : samples) {
        const RobustnessProperty prop{s.input, delta, s.label, clip};
        for (std::size_t t = 0; t < m.classes; ++t) {
            if (t == s.label) continue;
            const OracleResult a = exact_verify_against(original, prop, t, limits);
            const OracleResult b = exact_verify_against(other, prop, t, limits);
            ++m.counts[verdict_column(a.status)][verdict_column(b.status)];
        }
    }
    return m;
}

CompareResult compare_models(const Network& original, const Network& vnn,
                             const std::vector<LabeledSample>& samples, const CompareOptions& options) {
    if (options.sweep.deltas.empty()) throw ConfigError("at least one delta is required");
    if (vnn.num_layers() != original.num_layers() || vnn.input_dim() != original.input_dim() ||
        vnn.output_dim() != original.output_dim()) {
        throw ShapeError("original and sparsified models differ in shape");
    }
    CompareResult res;
    const std::size_t vnn_nnz = count_nonzeros(vnn).total;
    const std::size_t orig_nnz = count_nonzeros(original).total;
    auto add = [&](std::string name, Network net) {
        const double acc = accuracy(net, samples);
        const std::size_t nnz = count_nonzeros(net).total;
        res.models.push_back({std::move(name), std::move(net), acc, nnz});
    };
    add("original", original);
    add("vnn", vnn);
    add("mbp_rate_" + format_real(options.mbp_rate), mbp_prune(original, options.mbp_rate, options.mbp_scope));
    add("mbp_matched", mbp_prune_to_sparsity(original, std::min(vnn_nnz, orig_nnz)));

    for (const ModelSummary& m : res.models) {
        for (const SweepSummary& s : summarize(verify_sweep(m.net, samples, options.sweep))) {
            res.curve.push_back({m.name, s});
        }
    }
    if (options.oracle) {
        res.matrix = oracle_matrix(original, vnn, samples, options.oracle_delta, options.sweep.clip,
                                   options.oracle_limits, &res.oracle_note);
    }
    return res;
}

std::string CompareResult::curve_csv() const {
    std::string out = "model,method,delta,verified,total,percent,mean_time_ms\n";
    for (const CurveRow& r : curve) {
        out += r.model + "," + verify_method_name(r.summary.method) + "," + format_real(r.summary.delta) +
               "," + std::to_string(r.summary.verified) + "," + std::to_string(r.summary.total) + "," +
               fixed(r.summary.percent(), 2) + "," + fixed(r.summary.mean_time_ms, 4) + "\n";
    }
    return out;
}

std::string CompareResult::markdown() const {
    std::string out = "| model | nnz | accuracy |\n|---|---|---|\n";
    for (const ModelSummary& m : models) {
        out += "| " + m.name + " | " + std::to_string(m.nnz) + " | " + fixed(100.0 * m.accuracy, 2) + "% |\n";
    }
    out += "\n| model | method | delta | verified % | mean time (ms) |\n|---|---|---|---|---|\n";
    for (const CurveRow& r : curve) {
        out += "| " + r.model + " | " + verify_method_name(r.summary.method) + " | " +
               format_real(r.summary.delta) + " | " + fixed(r.summary.percent(), 2) + " | " +
               fixed(r.summary.mean_time_ms, 4) + " |\n";
    }
    if (matrix) {
        out += "\nExact oracle at delta " + format_real(matrix->delta) + " (" +
               std::to_string(matrix->samples) + " samples x " + std::to_string(matrix->classes - 1) +
               " competing classes):\n\n" + matrix->markdown("original", "vnn");
    } else if (!oracle_note.empty()) {
        out += "\nExact oracle: " + oracle_note + "\n";
    }
    return out;
}

}  // namespace vnn

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vnn/baselines.hpp"
#include "vnn/dataset.hpp"
#include "vnn/error.hpp"
#include "vnn/harness.hpp"
#include "vnn/io_util.hpp"
#include "vnn/model_io.hpp"
#include "vnn/sparsify.hpp"
#include "vnn/trainer.hpp"
#include "vnn/verify.hpp"

using namespace vnn;

namespace {

// Where samples come from: a CSV file, or a pair of IDX files.
struct DataSource {
    std::string csv;
    std::string mnist_images;
    std::string mnist_labels;
    bool paper_split = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", csv, "Samples as CSV rows label,v0,v1,...");
        cmd->add_option("--mnist-images", mnist_images, "IDX image file");
        cmd->add_option("--mnist-labels", mnist_labels, "IDX label file");
        cmd->add_flag("--paper-split", paper_split,
                      "Keep the first 400 MNIST items: 0-199 validation, 200-399 test");
    }

    std::vector<LabeledSample> load(Split wanted) const {
        if (!csv.empty()) return import_csv(csv);
        if (mnist_images.empty() || mnist_labels.empty()) {
            throw ConfigError("give --data, or both --mnist-images and --mnist-labels");
        }
        MnistOptions opts;
        opts.paper_split = paper_split;
        const Dataset d = load_mnist(mnist_images, mnist_labels, opts);
        return paper_split ? d.subset(wanted) : d.samples();
    }

    bool image_like() const { return csv.empty(); }
};

struct SparsifyFlags {
    std::string config;
    std::optional<double> epsilon;
    std::optional<std::string> epsilon_mode;
    std::optional<double> margin;
    std::optional<double> zero_threshold;
    std::optional<std::string> layers;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "key=value file: epsilon, epsilon_mode, margin, zero_threshold, layers");
        cmd->add_option("--epsilon", epsilon, "Allowed deviation of the optimized layer's values");
        cmd->add_option("--epsilon-mode", epsilon_mode, "additive or multiplicative");
        cmd->add_option("--margin", margin, "Required logit margin M");
        cmd->add_option("--zero-threshold", zero_threshold, "Magnitude below which LP values become zero");
        cmd->add_option("--layers", layers, "Comma-separated 1-based layers to optimize (default: all)");
    }

    SparsifyConfig resolve() const {
        SparsifyConfig cfg;
        if (!config.empty()) {
            std::ifstream in(config);
            if (!in) throw IoError("config not found: " + config);
            std::stringstream text;
            text << in.rdbuf();
            cfg = parse_sparsify_config(text.str());
        }
        if (epsilon) cfg.epsilon = *epsilon;
        if (epsilon_mode) cfg.epsilon_mode = parse_epsilon_mode(*epsilon_mode);
        if (margin) cfg.margin = *margin;
        if (zero_threshold) cfg.zero_threshold = *zero_threshold;
        if (layers) cfg.layers = parse_layer_list(*layers);
        cfg.validate();
        return cfg;
    }
};

std::vector<VerifyMethod> parse_methods(const std::string& text) {
    if (text == "both") return {VerifyMethod::Interval, VerifyMethod::Polyhedral};
    return {parse_verify_method(text)};
}

std::vector<double> parse_deltas(const std::string& text) {
    std::vector<double> deltas = parse_real_list(text);
    if (deltas.empty()) throw ConfigError("at least one delta is required (--delta)");
    return deltas;
}

void print_summary(const std::vector<SweepSummary>& summary) {
    std::printf("method,delta,verified,total,percent,mean_time_ms\n");
    for (const SweepSummary& s : summary) {
        std::printf("%s,%s,%zu,%zu,%.2f,%.4f\n", verify_method_name(s.method), format_real(s.delta).c_str(),
                    s.verified, s.total, s.percent(), s.mean_time_ms);
    }
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case Error::Kind::SolverStalled:
        case Error::Kind::TrainingDiverged:
        case Error::Kind::InternalConsistency:
            return 1;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verification-friendly sparsification of ReLU networks"};
    app.require_subcommand(1);

    // sparsify
    auto* sp = app.add_subcommand("sparsify", "Sparsify a model layer by layer");
    std::string sp_model, sp_out, sp_report;
    DataSource sp_data;
    SparsifyFlags sp_flags;
    sp->add_option("--model", sp_model, "Input model")->required();
    sp->add_option("--out", sp_out, "Output model")->required();
    sp->add_option("--report", sp_report, "Report CSV (default: <out>.report.csv)");
    sp_data.attach(sp);
    sp_flags.attach(sp);

    // verify
    auto* ve = app.add_subcommand("verify", "Verify L-infinity robustness of every sample");
    std::string ve_model, ve_delta, ve_method = "both", ve_out;
    bool ve_clip = false;
    std::size_t ve_jobs = 0;
    DataSource ve_data;
    ve->add_option("--model", ve_model, "Model")->required();
    ve->add_option("--delta", ve_delta, "Comma-separated radii")->required();
    ve->add_option("--method", ve_method, "interval, polyhedral or both");
    ve->add_option("--out", ve_out, "Per-sample results CSV");
    ve->add_flag("--clip", ve_clip, "Clamp the input box to [0,1] (default on for MNIST input)");
    ve->add_option("--jobs", ve_jobs, "Worker threads (0: all)");
    ve_data.attach(ve);

    // prune
    auto* pr = app.add_subcommand("prune", "Magnitude-based pruning");
    std::string pr_model, pr_out, pr_scope = "global";
    std::optional<double> pr_rate;
    std::optional<std::size_t> pr_target;
    pr->add_option("--model", pr_model, "Model")->required();
    pr->add_option("--out", pr_out, "Output model")->required();
    pr->add_option("--rate", pr_rate, "Fraction of weights and biases to zero");
    pr->add_option("--target-nnz", pr_target, "Prune globally down to this many nonzeros");
    pr->add_option("--scope", pr_scope, "global or per-layer");

    // compare
    auto* co = app.add_subcommand("compare", "Compare original, sparsified and pruned models");
    std::string co_orig, co_vnn, co_delta, co_prefix, co_scope = "global", co_method = "both";
    double co_rate = 0.5;
    double co_oracle_delta = 0.02;
    bool co_oracle = false;
    bool co_clip = false;
    std::size_t co_jobs = 0;
    DataSource co_data;
    co->add_option("--original", co_orig, "Original model")->required();
    co->add_option("--vnn", co_vnn, "Sparsified model")->required();
    co->add_option("--delta", co_delta, "Comma-separated radii")->required();
    co->add_option("--rate", co_rate, "Pruning rate of the rate-matched MBP model");
    co->add_option("--scope", co_scope, "global or per-layer");
    co->add_option("--method", co_method, "interval, polyhedral or both");
    co->add_flag("--oracle", co_oracle, "Add the exact-oracle matrix when models are small enough");
    co->add_option("--oracle-delta", co_oracle_delta, "Radius for the oracle matrix");
    co->add_option("--out-prefix", co_prefix, "Writes <prefix>.curve.csv and <prefix>.md");
    co->add_flag("--clip", co_clip, "Clamp the input box to [0,1]");
    co->add_option("--jobs", co_jobs, "Worker threads (0: all)");
    co_data.attach(co);

    // gen-fixtures
    auto* gf = app.add_subcommand("gen-fixtures", "Train the standard fixture networks");
    std::string gf_out = "fixtures";
    std::uint64_t gf_seed = 0;
    gf->add_option("--out", gf_out, "Output directory");
    gf->add_option("--seed", gf_seed, "Added to every fixture's seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sp) {
            const Network net = load_network(sp_model);
            const std::vector<LabeledSample> val = sp_data.load(Split::Validation);
            const SparsifyConfig cfg = sp_flags.resolve();
            const SparsifyResult res = sparsify_network(net, val, cfg);
            const std::string report_path = sp_report.empty() ? sp_out + ".report.csv" : sp_report;
            save_network(res.network, sp_out);
            write_file_atomic(report_path, res.report.to_csv());
            for (const auto& w : res.report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            std::fputs(res.report.to_csv().c_str(), stdout);
            std::printf("nnz %zu -> %zu\n", count_nonzeros(net).total, count_nonzeros(res.network).total);
        } else if (*ve) {
            SweepOptions opts;
            opts.deltas = parse_deltas(ve_delta);
            opts.methods = parse_methods(ve_method);
            opts.clip = ve_clip || ve_data.image_like();
            opts.jobs = ve_jobs;
            const Network net = load_network(ve_model);
            const std::vector<LabeledSample> samples = ve_data.load(Split::Test);
            const auto rows = verify_sweep(net, samples, opts);
            if (!ve_out.empty()) write_file_atomic(ve_out, sweep_csv(rows));
            print_summary(summarize(rows));
        } else if (*pr) {
            const Network net = load_network(pr_model);
            if (pr_rate.has_value() == pr_target.has_value()) {
                throw ConfigError("give exactly one of --rate and --target-nnz");
            }
            const Network pruned = pr_rate ? mbp_prune(net, *pr_rate, parse_prune_scope(pr_scope))
                                           : mbp_prune_to_sparsity(net, *pr_target);
            save_network(pruned, pr_out);
            std::printf("nnz %zu -> %zu\n", count_nonzeros(net).total, count_nonzeros(pruned).total);
        } else if (*co) {
            CompareOptions opts;
            opts.mbp_rate = co_rate;
            opts.mbp_scope = parse_prune_scope(co_scope);
            opts.sweep.deltas = parse_deltas(co_delta);
            opts.sweep.methods = parse_methods(co_method);
            opts.sweep.clip = co_clip || co_data.image_like();
            opts.sweep.jobs = co_jobs;
            opts.oracle = co_oracle;
            opts.oracle_delta = co_oracle_delta;
            const Network original = load_network(co_orig);
            const Network vnn = load_network(co_vnn);
            const std::vector<LabeledSample> samples = co_data.load(Split::Test);
            const CompareResult res = compare_models(original, vnn, samples, opts);
            if (!co_prefix.empty()) {
                write_file_atomic(co_prefix + ".curve.csv", res.curve_csv());
                write_file_atomic(co_prefix + ".md", res.markdown());
            }
            std::fputs(res.markdown().c_str(), stdout);
        } else if (*gf) {
            for (FixtureSpec spec : standard_fixtures()) {
                spec.seed += gf_seed;
                const Fixture fx = build_fixture(spec);
                save_fixture(fx, gf_out);
                std::printf("%s: test accuracy %.3f, nnz %zu\n", fx.name.c_str(), accuracy(fx.net, fx.test),
                            count_nonzeros(fx.net).total);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

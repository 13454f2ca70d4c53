// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 on any FAIL.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../lp_suite.hpp"
#include "vnn/baselines.hpp"
#include "vnn/dataset.hpp"
#include "vnn/harness.hpp"
#include "vnn/lp.hpp"
#include "vnn/oracle.hpp"
#include "vnn/sparsify.hpp"
#include "vnn/trainer.hpp"
#include "vnn/verify.hpp"

using namespace vnn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    int failures = 0;

    void line(int id, bool pass, const std::string& detail) {
        std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    void skip(int id, const std::string& detail) {
        std::printf("SKIP criterion %d: %s\n", id, detail.c_str());
        std::fflush(stdout);
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Loaded {
    Fixture fx;
    Network vnn;  // the configuration used by the directional criteria
    bool have_vnn = false;
};

// Counts retained samples that lose their class, margin or pattern.
std::size_t guarantee_violations(const Network& original, const SparsifyResult& res,
                                 const std::vector<LabeledSample>& val, const SparsifyConfig& cfg) {
    const Retention ret = retain_samples(original, val, cfg);
    std::size_t bad = 0;
    for (const std::size_t s : ret.kept) {
        const auto& x = val[s].input;
        const auto out = logits(res.network, x);
        const bool ok = argmax(out) == val[s].label && logit_margin(out, val[s].label) >= cfg.margin - 1e-6 &&
                        activation_pattern(res.network, x) == activation_pattern(original, x);
        if (!ok) ++bad;
    }
    return bad;
}

std::size_t verified_count(const Network& net, const std::vector<LabeledSample>& samples, double delta,
                           VerifyMethod method) {
    SweepOptions opts;
    opts.deltas = {delta};
    opts.methods = {method};
    return summarize(verify_sweep(net, samples, opts)).front().verified;
}

std::vector<double> golden_lookup(const std::filesystem::path& path, const std::string& key) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string k;
        ss >> k;
        if (k != key) continue;
        std::vector<double> values;
        double v = 0.0;
        while (ss >> v) values.push_back(v);
        return values;
    }
    return {};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::string fixture_dir = VNN_FIXTURE_DIR;
    double vnn_epsilon = 0.05;
    double vnn_margin = 0.0;
    std::set<int> only;
    std::string mnist_dir;
    if (const char* env = std::getenv("VNN_MNIST_DIR")) mnist_dir = env;
    app.add_option("--fixtures", fixture_dir, "Fixture directory");
    app.add_option("--vnn-epsilon", vnn_epsilon, "Epsilon of the VNN used by criteria 2-10");
    app.add_option("--vnn-margin", vnn_margin, "Margin of the VNN used by criteria 2-10");
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--mnist-dir", mnist_dir, "Directory with the MNIST IDX files (optional)");
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

    Outcome out;
    const std::vector<double> grid{0.01, 0.02, 0.05};
    SparsifyConfig vnn_cfg;
    vnn_cfg.epsilon = vnn_epsilon;
    vnn_cfg.margin = vnn_margin;
    std::printf("VNN configuration for criteria 2-10: epsilon=%g (additive), margin=%g\n", vnn_epsilon,
                vnn_margin);

    std::vector<Loaded> fixtures;
    for (const FixtureSpec& spec : standard_fixtures()) {
        Fixture fx = load_fixture(fixture_dir, spec.name);
        Network net = fx.net;
        fixtures.push_back({std::move(fx), std::move(net)});
    }

    // 1 + 2: hard guarantees and sparsity over the full configuration grid.
    {
        const auto t0 = Clock::now();
        std::size_t violations = 0;
        std::size_t checked = 0;
        std::size_t fallbacks = 0;
        std::size_t nnz_increase = 0;
        std::size_t runs = 0;
        for (Loaded& l : fixtures) {
            for (const double eps : {0.0, 0.05, 0.1}) {
                for (const double margin : {0.0, 0.1}) {
                    SparsifyConfig cfg;
                    cfg.epsilon = eps;
                    cfg.margin = margin;
                    if (!wanted(1) && !wanted(2) && !(eps == vnn_epsilon && margin == vnn_margin)) continue;
                    const SparsifyResult res = sparsify_network(l.fx.net, l.fx.validation, cfg);
                    ++runs;
                    violations += guarantee_violations(l.fx.net, res, l.fx.validation, cfg);
                    checked += retain_samples(l.fx.net, l.fx.validation, cfg).kept.size();
                    for (const auto& row : res.report.layers) fallbacks += row.fell_back ? 1 : 0;
                    if (count_nonzeros(res.network).total > count_nonzeros(l.fx.net).total) ++nnz_increase;
                    if (eps == vnn_epsilon && margin == vnn_margin) {
                        l.vnn = res.network;
                        l.have_vnn = true;
                    }
                }
            }
            if (!l.have_vnn) l.vnn = sparsify_network(l.fx.net, l.fx.validation, vnn_cfg).network;
        }
        const double elapsed = seconds_since(t0);
        if (wanted(1)) {
            out.line(1, violations == 0 && elapsed < 300.0,
                     std::to_string(runs) + " runs, " + std::to_string(checked) + " retained samples checked, " +
                         std::to_string(violations) + " violations, " + std::to_string(fallbacks) +
                         " layer fallbacks, " + fmt("%.1f s", elapsed) + " (limit 300 s)");
            if (mnist_dir.empty()) {
                out.skip(1, "MNIST 2x50 run: no IDX files (set VNN_MNIST_DIR)");
            } else {
                const auto m0 = Clock::now();
                const std::filesystem::path dir(mnist_dir);
                const Dataset all = load_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
                const auto& items = all.samples();
                std::vector<LabeledSample> val(items.begin(), items.begin() + 200);
                std::vector<LabeledSample> train(items.begin() + 400, items.begin() + std::min<std::size_t>(items.size(), 2400));
                TrainConfig tc;
                tc.hidden = {50, 50};
                tc.epochs = 10;
                tc.seed = 1;
                const Network net = train_fixture(train, 10, tc);
                std::size_t bad = 0;
                for (const double eps : {0.0, 0.05, 0.1}) {
                    for (const double margin : {0.0, 0.1}) {
                        SparsifyConfig cfg;
                        cfg.epsilon = eps;
                        cfg.margin = margin;
                        bad += guarantee_violations(net, sparsify_network(net, val, cfg), val, cfg);
                    }
                }
                out.line(1, bad == 0, "MNIST 2x50: " + std::to_string(bad) + " violations, " +
                                          fmt("%.1f s", seconds_since(m0)));
            }
        }
        if (wanted(2)) {
            const Loaded& l20 = *std::find_if(fixtures.begin(), fixtures.end(),
                                              [](const Loaded& l) { return l.fx.name == "blobs_2x20"; });
            SparsifyConfig cfg;
            cfg.epsilon = 0.1;
            const Network v = vnn_epsilon == 0.1 && vnn_margin == 0.0
                                  ? l20.vnn
                                  : sparsify_network(l20.fx.net, l20.fx.validation, cfg).network;
            const std::size_t before = count_nonzeros(l20.fx.net).total;
            const std::size_t after = count_nonzeros(v).total;
            const double reduction = 1.0 - static_cast<double>(after) / static_cast<double>(before);
            const auto golden = golden_lookup(std::filesystem::path(fixture_dir) / "golden.txt",
                                              "blobs_2x20_eps0.1_nnz");
            const bool golden_ok = golden.size() == 1 && static_cast<std::size_t>(golden[0]) == after;
            out.line(2, nnz_increase == 0 && reduction >= 0.2 && golden_ok,
                     "nnz never increased in " + std::to_string(runs) + " runs (" + std::to_string(nnz_increase) +
                         " increases); blobs_2x20 eps=0.1: " + std::to_string(before) + " -> " +
                         std::to_string(after) + fmt(" (%.1f%% reduction, need >= 20%%)", 100.0 * reduction) +
                         (golden_ok ? ", matches golden" : ", golden mismatch or missing"));
        }
    }

    // 3 + 9: directional verified counts.
    if (wanted(3) || wanted(9)) {
        std::size_t worse_than_original = 0;
        std::size_t worse_than_mbp = 0;
        std::size_t comparisons = 0;
        std::string detail3;
        std::string detail9;
        for (const Loaded& l : fixtures) {
            const Network mbp = mbp_prune_to_sparsity(l.fx.net, count_nonzeros(l.vnn).total);
            detail9 += " " + l.fx.name + fmt(" mbp acc %.2f", accuracy(mbp, l.fx.test)) +
                       fmt(" vnn acc %.2f;", accuracy(l.vnn, l.fx.test));
            for (const double delta : grid) {
                for (const auto method : {VerifyMethod::Interval, VerifyMethod::Polyhedral}) {
                    const std::size_t o = verified_count(l.fx.net, l.fx.test, delta, method);
                    const std::size_t v = verified_count(l.vnn, l.fx.test, delta, method);
                    const std::size_t m = verified_count(mbp, l.fx.test, delta, method);
                    ++comparisons;
                    if (v < o) {
                        ++worse_than_original;
                        detail3 += " [" + l.fx.name + " " + verify_method_name(method) + fmt(" d=%g", delta) +
                                   ": vnn " + std::to_string(v) + " < original " + std::to_string(o) + "]";
                    }
                    if (v < m) {
                        ++worse_than_mbp;
                        detail9 += " [" + l.fx.name + " " + verify_method_name(method) + fmt(" d=%g", delta) +
                                   ": vnn " + std::to_string(v) + " < mbp " + std::to_string(m) + "]";
                    }
                }
            }
        }
        if (wanted(3)) {
            out.line(3, worse_than_original == 0,
                     std::to_string(comparisons) + " (fixture, delta, verifier) comparisons, " +
                         std::to_string(worse_than_original) + " where VNN verifies fewer than the original" +
                         detail3);
        }
        if (wanted(9)) {
            out.line(9, worse_than_mbp == 0,
                     std::to_string(comparisons) + " comparisons at matched sparsity, " +
                         std::to_string(worse_than_mbp) + " where VNN verifies fewer than MBP;" + detail9);
        }
    }

    // 4: soundness against the exact oracle on 2x8 fixtures.
    if (wanted(4)) {
        std::size_t violations = 0;
        std::size_t properties = 0;
        std::size_t not_robust = 0;
        std::size_t exceeded = 0;
        for (const Loaded& l : fixtures) {
            if (l.fx.net.hidden_neurons() != 16) continue;
            for (const Network* net : {&l.fx.net, &l.vnn}) {
                std::mt19937_64 rng(4);
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                for (int p = 0; p < 100; ++p) {
                    std::vector<double> c = l.fx.test[static_cast<std::size_t>(p) % l.fx.test.size()].input;
                    for (double& v : c) v += 0.05 * (2.0 * unit(rng) - 1.0);
                    const RobustnessProperty prop{c, 0.005 + 0.095 * unit(rng), predict(*net, c), false};
                    const OracleResult exact = exact_verify(*net, prop);
                    ++properties;
                    if (exact.status == OracleStatus::NotRobust) ++not_robust;
                    if (exact.status == OracleStatus::ResourceExceeded) ++exceeded;
                    for (const auto method : {VerifyMethod::Interval, VerifyMethod::Polyhedral}) {
                        if (verify_robustness(*net, prop, method).verdict == Verdict::Verified &&
                            exact.status == OracleStatus::NotRobust) {
                            ++violations;
                        }
                    }
                }
            }
        }
        out.line(4, violations == 0 && properties > 0,
                 std::to_string(properties) + " properties on 2x8 originals and VNNs (" + std::to_string(not_robust) +
                     " not robust, " + std::to_string(exceeded) + " resource exceeded), " +
                     std::to_string(violations) + " verified-but-not-robust");
    }

    // 5: domination.
    if (wanted(5)) {
        double worst = 0.0;
        std::size_t neurons = 0;
        for (const Loaded& l : fixtures) {
            for (const Network* net : {&l.fx.net, &l.vnn}) {
                for (const LabeledSample& s : l.fx.test) {
                    for (const double delta : {0.0, 0.01, 0.02, 0.05}) {
                        const RobustnessProperty prop{s.input, delta, s.label, false};
                        const NetworkBounds ib = interval_bounds(*net, prop);
                        const NetworkBounds pb = polyhedral_bounds(*net, prop);
                        for (std::size_t k = 0; k < net->num_layers(); ++k) {
                            for (std::size_t j = 0; j < ib.pre[k].lb.size(); ++j) {
                                ++neurons;
                                worst = std::max(worst, ib.pre[k].lb[j] - pb.pre[k].lb[j]);
                                worst = std::max(worst, pb.pre[k].ub[j] - ib.pre[k].ub[j]);
                            }
                        }
                    }
                }
            }
        }
        out.line(5, worst <= 1e-9,
                 std::to_string(neurons) + " neuron bounds compared, largest excess " + fmt("%.3g", worst) +
                     " (limit 1e-9)");
    }

    // 6: LP suite.
    if (wanted(6)) {
        std::size_t bad = 0;
        double worst = 0.0;
        const auto suite = testing::known_lp_suite();
        for (const auto& item : suite) {
            const lp::Solution sol = lp::solve(item.program);
            if (sol.status != item.status) {
                ++bad;
                continue;
            }
            if (sol.status == lp::Status::Optimal) {
                const double err = std::abs(sol.objective - item.objective);
                worst = std::max(worst, err);
                if (err >= 1e-8) ++bad;
            }
        }
        out.line(6, bad == 0 && suite.size() == 10,
                 std::to_string(suite.size()) + " LPs, " + std::to_string(bad) + " wrong, largest objective error " +
                     fmt("%.3g", worst));
    }

    // 7: zero radius equals accuracy.
    if (wanted(7)) {
        std::size_t mismatches = 0;
        std::size_t samples = 0;
        for (const Loaded& l : fixtures) {
            for (const Network* net : {&l.fx.net, &l.vnn}) {
                for (const auto method : {VerifyMethod::Interval, VerifyMethod::Polyhedral}) {
                    std::size_t verified = 0;
                    std::size_t correct = 0;
                    for (const LabeledSample& s : l.fx.test) {
                        const bool ok = predict(*net, s.input) == s.label;
                        const bool ver =
                            verify_robustness(*net, {s.input, 0.0, s.label, false}, method).verdict == Verdict::Verified;
                        ++samples;
                        correct += ok;
                        verified += ver;
                        if (ok != ver) ++mismatches;
                    }
                    if (verified != correct) ++mismatches;
                }
            }
        }
        out.line(7, mismatches == 0,
                 std::to_string(samples) + " zero-radius verifications, " + std::to_string(mismatches) + " mismatches");
    }

    // 8: timing direction.
    if (wanted(8)) {
        std::string detail;
        bool ok = true;
        std::size_t eligible = 0;
        for (const Loaded& l : fixtures) {
            const double before = static_cast<double>(count_nonzeros(l.fx.net).total);
            const double sparsity = 1.0 - count_nonzeros(l.vnn).total / before;
            if (sparsity < 0.3) continue;
            ++eligible;
            // One run repeats full passes over the test set for at least 0.2 s;
            // original and VNN runs alternate so load drift hits both alike.
            auto one_run = [&](const Network& net) {
                const auto t0 = Clock::now();
                std::size_t n = 0;
                do {
                    for (const LabeledSample& s : l.fx.test) {
                        verify_robustness(net, {s.input, 0.02, s.label, false}, VerifyMethod::Polyhedral);
                        ++n;
                    }
                } while (seconds_since(t0) < 0.2);
                return seconds_since(t0) / static_cast<double>(n);
            };
            std::vector<double> orig_runs, vnn_runs;
            for (int r = 0; r < 3; ++r) {
                orig_runs.push_back(one_run(l.fx.net));
                vnn_runs.push_back(one_run(l.vnn));
            }
            std::sort(orig_runs.begin(), orig_runs.end());
            std::sort(vnn_runs.begin(), vnn_runs.end());
            const double t_orig = orig_runs[1];
            const double t_vnn = vnn_runs[1];
            if (t_vnn > 1.1 * t_orig) ok = false;
            detail += " " + l.fx.name + fmt(" (%.0f%% sparse): ", 100.0 * sparsity) + fmt("%.2f us", 1e6 * t_vnn) +
                      " vs " + fmt("%.2f us;", 1e6 * t_orig);
        }
        out.line(8, ok && eligible > 0,
                 std::to_string(eligible) + " fixtures with >= 30% sparsity, " +
                     std::to_string(fixtures.front().fx.test.size()) + " samples, passes repeated for >= 0.2 s per run, median of 3;" + detail);
    }

    // 10: exact-oracle verdict matrix on each 2x8 fixture.
    if (wanted(10)) {
        for (const Loaded& l : fixtures) {
            if (l.fx.net.hidden_neurons() != 16) continue;
            std::size_t bad = 0;
            std::string detail;
            bool sums_ok = true;
            for (const double delta : grid) {
                std::string note;
                const auto m = oracle_matrix(l.fx.net, l.vnn, l.fx.test, delta, false, OracleLimits{}, &note);
                if (!m) {
                    sums_ok = false;
                    detail += " d=" + fmt("%g", delta) + ": " + note + ";";
                    continue;
                }
                bad += m->counts[0][1];
                if (m->total() != m->samples * (m->classes - 1)) sums_ok = false;
                detail += " d=" + fmt("%g", delta) + ":";
                for (const auto& row : m->counts) {
                    detail += " [";
                    for (std::size_t c = 0; c < 3; ++c) detail += (c ? " " : "") + std::to_string(row[c]);
                    detail += "]";
                }
                detail += ";";
            }
            out.line(10, bad == 0 && sums_ok,
                     l.fx.name + ": " + std::to_string(bad) + " (original robust, VNN not robust) cells over delta " +
                         "grid; rows original R/NR/T, cols VNN R/NR/T:" + detail);
        }
    }

    std::printf("%s: %d failing line(s)\n", out.failures == 0 ? "ALL PASS" : "FAILURES", out.failures);
    return out.failures == 0 ? 0 : 1;
}

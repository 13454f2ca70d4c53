#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_helpers.hpp"
#include "vnn/dataset.hpp"
#include "vnn/error.hpp"
#include "vnn/sparsify.hpp"
#include "vnn/trainer.hpp"

using namespace vnn;
using vnn::testing::net_a;

namespace {

SparsifyConfig exact_cfg() {
    SparsifyConfig cfg;
    cfg.zero_threshold = 0.0;
    return cfg;
}

struct Fixture {
    Network net;
    std::vector<LabeledSample> val;
};

Fixture small_trained(std::uint64_t seed, std::vector<std::size_t> hidden) {
    Dataset d = synth_blobs(150, 3, 3, seed);
    TrainConfig tc;
    tc.hidden = std::move(hidden);
    tc.seed = seed;
    tc.epochs = 30;
    return {train_fixture(d.subset(Split::Train), 3, tc), d.subset(Split::Validation)};
}

}  // namespace

TEST_CASE("Net A first layer at epsilon 0") {
    const std::vector<LabeledSample> val{{{1.0, 2.0}, 1}};
    const LayerSolution sol = sparsify_layer(net_a(), 0, val, exact_cfg());

    // Neuron 2 must satisfy w21 + 2 w22 + b2 = 3. The minimum L1 point of a
    // single equality is a vertex with one nonzero: enumerate them.
    const double coeffs[3] = {1.0, 2.0, 1.0};
    double best = INFINITY;
    for (double a : coeffs) best = std::min(best, 3.0 / std::abs(a));
    CHECK(best == doctest::Approx(1.5));

    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(std::abs(sol.weights.weight(0, 0)) < 1e-12);
    CHECK(std::abs(sol.weights.weight(0, 1)) < 1e-12);
    CHECK(std::abs(sol.weights.weight(1, 0)) < 1e-12);
    CHECK(sol.weights.weight(1, 1) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(sol.weights.bias(0)) < 1e-12);
    CHECK(std::abs(sol.weights.bias(1)) < 1e-12);
    CHECK_FALSE(sol.fell_back);
    REQUIRE(sol.values.size() == 1);
    CHECK(sol.values[0][0] == 0.0);
    CHECK(sol.values[0][1] == doctest::Approx(3.0));
}

TEST_CASE("layer program shape") {
    const std::vector<LabeledSample> val{{{1.0, 2.0}, 1}};
    const LayerLp lp = build_layer_lp(net_a(), 0, val, exact_cfg());
    CHECK(lp.weight_vars.size() == 4);
    CHECK(lp.bias_vars.size() == 2);
    CHECK(lp.l1_vars.size() == 6);
    REQUIRE(lp.value_vars.size() == 1);
    REQUIRE(lp.value_vars[0].size() == 2);  // this layer and the logits
    CHECK(lp.value_vars[0][0].size() == 2);
    CHECK(lp.value_vars[0][1].size() == 2);
    CHECK(lp.program.num_vars() == 4 + 2 + 6 + 2 + 2);

    const auto& cost = lp.program.objective();
    for (std::size_t j = 0; j < cost.size(); ++j) {
        const bool is_l1 = std::find(lp.l1_vars.begin(), lp.l1_vars.end(), j) != lp.l1_vars.end();
        CHECK((cost[j] != 0.0) == is_l1);
    }

    // epsilon = 0 pins this layer's values to the reference values (0, 3).
    const std::size_t v0 = lp.value_vars[0][0][0];
    const std::size_t v1 = lp.value_vars[0][0][1];
    CHECK(lp.program.lower()[v0] == 0.0);
    CHECK(lp.program.upper()[v0] == 0.0);
    CHECK(lp.program.lower()[v1] == 3.0);
    CHECK(lp.program.upper()[v1] == 3.0);

    // The reported size matches the program.
    const LayerSolution sol = sparsify_layer(net_a(), 0, val, exact_cfg());
    CHECK(sol.lp_vars == lp.program.num_vars());
    CHECK(sol.lp_constraints == lp.program.num_constraints());
}

TEST_CASE("one class row per competing class") {
    // x = (2, 0) gives logits (2, 0), label 0.
    const std::vector<LabeledSample> val{{{2.0, 0.0}, 0}};
    const LayerLp lp = build_layer_lp(net_a(), 0, val, exact_cfg());
    REQUIRE(lp.class_rows.size() == 1);
    const auto& row = lp.program.constraints()[lp.class_rows[0]];
    CHECK(row.relation == lp::Relation::GreaterEqual);
    CHECK(row.rhs >= 0.0);
    CHECK(row.rhs <= kStrictSlack);
    const auto& logit_vars = lp.value_vars[0].back();
    REQUIRE(row.terms.size() == 2);
    CHECK(row.terms[0].var == logit_vars[0]);
    CHECK(row.terms[0].coeff == 1.0);
    CHECK(row.terms[1].var == logit_vars[1]);
    CHECK(row.terms[1].coeff == -1.0);
}

TEST_CASE("compact solve reaches the optimum of the full program") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Network net = vnn::testing::random_network({3, 5, 4, 3}, seed);
        std::mt19937_64 rng(seed * 77);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<LabeledSample> val;
        for (int s = 0; s < 6; ++s) {
            std::vector<double> x{u(rng), u(rng), u(rng)};
            val.push_back({x, predict(net, x)});
        }
        for (double eps : {0.0, 0.1}) {
            for (EpsilonMode mode : {EpsilonMode::Additive, EpsilonMode::Multiplicative}) {
                for (double margin : {0.0, 0.05}) {
                    SparsifyConfig cfg = exact_cfg();
                    cfg.epsilon = eps;
                    cfg.epsilon_mode = mode;
                    cfg.margin = margin;
                    for (std::size_t l = 0; l < net.num_layers(); ++l) {
                        CAPTURE(seed);
                        CAPTURE(eps);
                        CAPTURE(margin);
                        CAPTURE(l);
                        const LayerLp full = build_layer_lp(net, l, val, cfg);
                        const lp::Solution ref = lp::solve(full.program);
                        REQUIRE(ref.status == lp::Status::Optimal);
                        const LayerSolution sol = sparsify_layer(net, l, val, cfg);
                        REQUIRE_FALSE(sol.fell_back);
                        CHECK(sol.lp_objective ==
                              doctest::Approx(ref.objective).epsilon(1e-7).scale(1.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("sparsify_network keeps the guarantees") {
    for (std::uint64_t seed : {3u, 4u}) {
        const Fixture fx = small_trained(seed, {8, 8});
        for (double eps : {0.0, 0.05, 0.1}) {
            for (double margin : {0.0, 0.1}) {
                CAPTURE(seed);
                CAPTURE(eps);
                CAPTURE(margin);
                SparsifyConfig cfg;
                cfg.epsilon = eps;
                cfg.margin = margin;
                const SparsifyResult res = sparsify_network(fx.net, fx.val, cfg);
                const Retention ret = retain_samples(fx.net, fx.val, cfg);
                CHECK(res.report.excluded == ret.excluded);
                for (std::size_t s : ret.kept) {
                    const auto& x = fx.val[s].input;
                    const auto out = logits(res.network, x);
                    CHECK(argmax(out) == fx.val[s].label);
                    CHECK(logit_margin(out, fx.val[s].label) >= margin - 1e-6);
                    CHECK(activation_pattern(res.network, x) == activation_pattern(fx.net, x));
                }
                CHECK(count_nonzeros(res.network).total <= count_nonzeros(fx.net).total);
                for (std::size_t k = 0; k < fx.net.num_layers(); ++k) {
                    CHECK(l1_mass(res.network.layer(k)) <= l1_mass(fx.net.layer(k)) + 1e-12);
                }
                CHECK(res.report.layers.size() == fx.net.num_layers());
                CHECK(res.report.warnings.size() == (ret.excluded.empty() ? 0u : 1u));
                for (const LayerReport& row : res.report.layers) CHECK_FALSE(row.fell_back);
                CHECK(sparsify_network(fx.net, fx.val, cfg).network == res.network);
            }
        }
    }
}

TEST_CASE("epsilon box holds at every committed layer") {
    const Fixture fx = small_trained(5, {8, 8});
    for (EpsilonMode mode : {EpsilonMode::Additive, EpsilonMode::Multiplicative}) {
        SparsifyConfig cfg;
        cfg.epsilon = 0.1;
        cfg.epsilon_mode = mode;
        const Retention ret = retain_samples(fx.net, fx.val, cfg);
        Network cur = fx.net;
        for (std::size_t l = 0; l < fx.net.num_layers(); ++l) {
            const LayerSolution sol = sparsify_layer(fx.net, cur, l, fx.val, cfg);
            const Network next = cur.with_layer(l, sol.weights);
            const bool logit_layer = l + 1 == fx.net.num_layers();
            for (std::size_t s : ret.kept) {
                const auto before = forward(cur, fx.val[s].input)[l + 1];
                const auto after = forward(next, fx.val[s].input)[l + 1];
                for (std::size_t j = 0; j < after.size(); ++j) {
                    const double r = before[j];
                    double lo = r - 0.1;
                    double hi = r + 0.1;
                    if (mode == EpsilonMode::Multiplicative) {
                        const double w = logit_layer ? std::abs(r) : r;
                        lo = r - 0.1 * w;
                        hi = r + 0.1 * w;
                    }
                    CHECK(after[j] >= lo - 1e-6);
                    CHECK(after[j] <= hi + 1e-6);
                }
            }
            cur = next;
        }
    }
}

TEST_CASE("trivial configurations") {
    const Fixture fx = small_trained(6, {8, 8});
    SUBCASE("no layers selected") {
        SparsifyConfig cfg;
        cfg.layers = std::vector<std::size_t>{};
        CHECK(sparsify_network(fx.net, fx.val, cfg).network == fx.net);
    }
    SUBCASE("all-zero layer is already minimal") {
        const Network net = fx.net.with_layer(1, Layer::zeros(8, 8, Activation::ReLU));
        std::vector<LabeledSample> val;
        for (const auto& s : fx.val) {
            if (predict(net, s.input) == s.label && logit_margin(logits(net, s.input), s.label) > 0) {
                val.push_back(s);
            }
        }
        if (!val.empty()) {
            const LayerSolution sol = sparsify_layer(net, 1, val, SparsifyConfig{});
            CHECK(sol.weights == net.layer(1));
            CHECK(sol.objective == 0.0);
        }
    }
    SUBCASE("zero threshold 0 leaves values as solved") {
        const LayerSolution sol = sparsify_layer(fx.net, 1, fx.val, exact_cfg());
        CHECK(sol.snapped == 0);
        CHECK(sol.objective == doctest::Approx(sol.lp_objective).epsilon(1e-15));
    }
    SUBCASE("only the selected layer changes") {
        SparsifyConfig cfg;
        cfg.layers = std::vector<std::size_t>{1};
        const Network vnn = sparsify_network(fx.net, fx.val, cfg).network;
        CHECK(vnn.layer(0) == fx.net.layer(0));
        CHECK(vnn.layer(2) == fx.net.layer(2));
    }
}

TEST_CASE("report CSV") {
    const Fixture fx = small_trained(7, {8, 8});
    const SparsifyResult res = sparsify_network(fx.net, fx.val, SparsifyConfig{});
    const std::string csv = res.report.to_csv();
    CHECK(csv.rfind("layer,l1_before,l1_after,nnz_before,nnz_after,lp_vars,lp_constraints,seconds\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("\n1,") != std::string::npos);
}

TEST_CASE("errors") {
    const std::vector<LabeledSample> val{{{1.0, 2.0}, 1}};
    CHECK_THROWS_AS(sparsify_layer(net_a(), 0, {}, SparsifyConfig{}), ConfigError);
    CHECK_THROWS_AS(build_layer_lp(net_a(), 0, {{{1.0, 2.0}, 5}}, SparsifyConfig{}), DataError);
    SparsifyConfig bad;
    bad.epsilon = -0.1;
    CHECK_THROWS_AS(sparsify_network(net_a(), val, bad), ValidationError);
    SparsifyConfig out_of_range;
    out_of_range.layers = std::vector<std::size_t>{7};
    CHECK_THROWS_AS(sparsify_network(net_a(), val, out_of_range), ConfigError);

    // A current network that has left the original pattern cannot be optimized.
    const Network moved = net_a().with_layer(
        0, Layer(2, 2, {1.0, 1.0, 0.0, 2.0}, {0.0, -1.0}, Activation::ReLU));
    CHECK_THROWS_AS(sparsify_layer(net_a(), moved, 1, val, SparsifyConfig{}),
                    InternalConsistencyError);
}

TEST_CASE("check_layer reports a broken pattern") {
    const std::vector<LabeledSample> val{{{1.0, 2.0}, 1}};
    const Network net = net_a();
    const Layer flipped(2, 2, {1.0, 1.0, 0.0, 2.0}, {0.0, -1.0}, Activation::ReLU);
    const std::string msg = check_layer(net, net, 0, flipped, val, {0}, SparsifyConfig{});
    CHECK(msg.find("activation") != std::string::npos);
    CHECK(check_layer(net, net, 0, net.layer(0), val, {0}, SparsifyConfig{}).empty());
}

#include <doctest.h>

#include <random>
#include <sstream>

#include "lp_suite.hpp"
#include "vnn/error.hpp"
#include "vnn/lp.hpp"

using namespace vnn;
using lp::kInf;
using lp::Relation;

TEST_CASE("known LP suite") {
    for (const auto rule : {lp::PivotRule::Bland, lp::PivotRule::DantzigBlandFallback}) {
        for (const auto& item : testing::known_lp_suite()) {
            CAPTURE(item.name);
            lp::SolverOptions opts;
            opts.rule = rule;
            const lp::Solution sol = lp::solve(item.program, opts);
            REQUIRE(sol.status == item.status);
            if (sol.status == lp::Status::Optimal) {
                CHECK(std::abs(sol.objective - item.objective) < 1e-8);
                CHECK(item.program.max_violation(sol.values) <= 1e-7);
            }
        }
    }
}

TEST_CASE("iteration cap raises a stalled error") {
    const auto suite = testing::known_lp_suite();
    lp::SolverOptions opts;
    opts.max_iterations = 1;
    CHECK_THROWS_AS(lp::solve(suite[4].program, opts), SolverStalledError);
}

TEST_CASE("malformed programs are rejected") {
    lp::LinearProgram p;
    p.add_variable(1.0, 0.0, 0.0);
    CHECK_THROWS_AS(lp::solve(p), ValidationError);

    lp::LinearProgram q;
    q.add_variable();
    q.add_constraint({{3, 1.0}}, Relation::LessEqual, 1.0);
    CHECK_THROWS_AS(lp::solve(q), ValidationError);
}

TEST_CASE("dump lists objective then one constraint per line") {
    const auto suite = testing::known_lp_suite();
    std::ostringstream out;
    suite[0].program.dump(out);
    const std::string text = out.str();
    CHECK(text.rfind("minimize: 1 x0 +1 x1\n", 0) == 0);
    CHECK(text.find("c0: 1 x0 +1 x1 >= 1\n") != std::string::npos);
}

namespace {

// Random LP with a known feasible point inside a box, so it is never
// infeasible or unbounded.
lp::LinearProgram random_feasible_lp(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    lp::LinearProgram p;
    std::vector<double> point(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = -2.0 + u(rng);
        const double hi = 2.0 + u(rng);
        p.add_variable(j % 5 == 0 ? -kInf : lo, j % 7 == 0 ? kInf : hi, u(rng));
        point[j] = 0.5 * u(rng);
    }
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<lp::Term> terms;
        double lhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (u(rng) > 0.3) continue;
            const double c = u(rng);
            terms.push_back({j, c});
            lhs += c * point[j];
        }
        const int kind = static_cast<int>(i % 3);
        if (kind == 0) p.add_constraint(terms, Relation::LessEqual, lhs + 0.5 * (u(rng) + 1.0));
        if (kind == 1) p.add_constraint(terms, Relation::GreaterEqual, lhs - 0.5 * (u(rng) + 1.0));
        if (kind == 2) p.add_constraint(terms, Relation::Equal, lhs);
    }
    // Box the free directions so the optimum is finite.
    for (std::size_t j = 0; j < n; ++j) {
        p.add_constraint({{j, 1.0}}, Relation::LessEqual, 5.0);
        p.add_constraint({{j, 1.0}}, Relation::GreaterEqual, -5.0);
    }
    return p;
}

}  // namespace

TEST_CASE("random feasible LPs: optimal, feasible, deterministic, rule-independent") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        CAPTURE(trial);
        const auto p = random_feasible_lp(rng, 12, 10);
        const lp::Solution a = lp::solve(p);
        REQUIRE(a.status == lp::Status::Optimal);
        CHECK(p.max_violation(a.values) <= 1e-7);

        const lp::Solution b = lp::solve(p);
        CHECK(a.values == b.values);
        CHECK(a.iterations == b.iterations);

        lp::SolverOptions bland;
        bland.rule = lp::PivotRule::Bland;
        const lp::Solution c = lp::solve(p, bland);
        REQUIRE(c.status == lp::Status::Optimal);
        CHECK(std::abs(a.objective - c.objective) < 1e-7);

        lp::SolverOptions serial;
        serial.parallel = false;
        const lp::Solution d = lp::solve(p, serial);
        CHECK(a.values == d.values);
    }
}

namespace {

struct DualCase {
    std::vector<double> cost;
    std::vector<std::vector<lp::Term>> rows;
    std::vector<double> rhs;
};

DualCase random_dual_case(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DualCase c;
    for (std::size_t j = 0; j < n; ++j) c.cost.push_back(unit(rng) + 0.1);
    // A known point keeps every row satisfiable; rhs may be negative so the
    // origin is usually infeasible and the dual phase has work to do.
    std::vector<double> x0(n);
    for (double& v : x0) v = 2.0 * unit(rng);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<lp::Term> terms;
        double ax = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (unit(rng) < 0.5) continue;
            const double a = coef(rng);
            terms.push_back({j, a});
            ax += a * x0[j];
        }
        c.rows.push_back(std::move(terms));
        c.rhs.push_back(ax + unit(rng));
    }
    return c;
}

double primal_reference(const DualCase& c, std::size_t rows) {
    lp::LinearProgram prog;
    for (double v : c.cost) prog.add_variable(0.0, kInf, v);
    for (std::size_t i = 0; i < rows; ++i) prog.add_constraint(c.rows[i], Relation::LessEqual, c.rhs[i]);
    const lp::Solution sol = lp::solve(prog);
    REQUIRE(sol.status == lp::Status::Optimal);
    return sol.objective;
}

double dual_objective(const DualCase& c, const lp::DualSimplex& dual) {
    const std::vector<double> x = dual.values();
    double obj = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) obj += c.cost[j] * x[j];
    return obj;
}

void check_feasible(const DualCase& c, std::size_t rows, const std::vector<double>& x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double ax = 0.0;
        for (const lp::Term& t : c.rows[i]) ax += t.coeff * x[t.var];
        CHECK(ax <= c.rhs[i] + 1e-7);
    }
    for (double v : x) CHECK(v >= 0.0);
}

}  // namespace

TEST_CASE("dual simplex matches the primal solver on random programs") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        const DualCase c = random_dual_case(rng, 3 + trial % 6, 4 + trial % 9);
        lp::DualSimplex dual(c.cost);
        for (std::size_t i = 0; i < c.rows.size(); ++i) dual.add_row(c.rows[i], c.rhs[i]);
        REQUIRE(dual.solve() == lp::Status::Optimal);
        check_feasible(c, c.rows.size(), dual.values());
        CHECK(dual_objective(c, dual) == doctest::Approx(primal_reference(c, c.rows.size())).epsilon(1e-8));
    }
}

TEST_CASE("dual simplex continues after rows are appended") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const DualCase c = random_dual_case(rng, 6, 12);
        lp::DualSimplex dual(c.cost);
        std::size_t added = 0;
        for (std::size_t batch : {4u, 3u, 5u}) {
            for (std::size_t k = 0; k < batch; ++k, ++added) dual.add_row(c.rows[added], c.rhs[added]);
            REQUIRE(dual.solve(added == c.rows.size()) == lp::Status::Optimal);
            check_feasible(c, added, dual.values());
            CHECK(dual_objective(c, dual) == doctest::Approx(primal_reference(c, added)).epsilon(1e-8));
        }
        CHECK(dual.num_rows() == 12);
    }
}

TEST_CASE("dual simplex reports contradictory rows as infeasible") {
    lp::DualSimplex dual({1.0, 1.0});
    const std::vector<lp::Term> up{{0, 1.0}, {1, 1.0}};
    const std::vector<lp::Term> down{{0, -1.0}, {1, -1.0}};
    dual.add_row(up, 1.0);  // x0 + x1 <= 1
    REQUIRE(dual.solve() == lp::Status::Optimal);
    CHECK(dual.values() == std::vector<double>{0.0, 0.0});
    dual.add_row(down, -2.0);  // x0 + x1 >= 2
    CHECK(dual.solve() == lp::Status::Infeasible);
}

TEST_CASE("dual simplex rejects negative costs and bad rows") {
    CHECK_THROWS_AS(lp::DualSimplex({1.0, -1.0}), ValidationError);
    lp::DualSimplex dual({1.0});
    const std::vector<lp::Term> bad{{3, 1.0}};
    CHECK_THROWS_AS(dual.add_row(bad, 1.0), ValidationError);
    const std::vector<lp::Term> ok{{0, 1.0}};
    CHECK_THROWS_AS(dual.add_row(ok, kInf), ValidationError);
}

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace vnn::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Term {
    std::size_t var;
    double coeff;
};

struct Constraint {
    std::vector<Term> terms;
    Relation relation;
    double rhs;
};

// minimize c.x  subject to rows (<=, =, >=) and per-variable bounds [lo, hi].
class LinearProgram {
public:
    std::size_t add_variable(double lower = 0.0, double upper = kInf, double cost = 0.0);
    std::size_t add_constraint(std::vector<Term> terms, Relation relation, double rhs);

    void set_cost(std::size_t var, double cost) { objective_.at(var) = cost; }
    void set_bounds(std::size_t var, double lower, double upper);

    std::size_t num_vars() const noexcept { return objective_.size(); }
    std::size_t num_constraints() const noexcept { return constraints_.size(); }

    const std::vector<double>& objective() const noexcept { return objective_; }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<Constraint>& constraints() const noexcept { return constraints_; }

    // Throws ValidationError when an index, bound or rhs breaks the invariants.
    void validate() const;

    double objective_value(std::span<const double> values) const;
    // Largest violation of any row or bound at `values` (0 when feasible).
    double max_violation(std::span<const double> values) const;

    // Objective on the first line, then one constraint per line, then bounds.
    void dump(std::ostream& out) const;

private:
    std::vector<double> objective_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Constraint> constraints_;
};

enum class Status { Optimal, Infeasible, Unbounded };

const char* status_name(Status status);

struct Solution {
    Status status = Status::Infeasible;
    std::vector<double> values;  // filled when Optimal
    double objective = 0.0;      // valid when Optimal
    std::size_t iterations = 0;
};

enum class PivotRule {
    // Smallest-index entering and leaving variables throughout.
    Bland,
    // Most negative reduced cost; switches to Bland's rule after a run of
    // degenerate pivots and back once progress resumes.
    DantzigBlandFallback,
};

struct SolverOptions {
    double tol = 1e-7;
    // 0 selects 50 * (num_vars + num_constraints).
    std::size_t max_iterations = 0;
    PivotRule rule = PivotRule::DantzigBlandFallback;
    // Row elimination runs under OpenMP when the tableau is large enough.
    bool parallel = true;
    // Recompute the final basic solution from the original data.
    bool polish = true;
};

// Two-phase primal simplex on a dense tableau built from the standard-form
// conversion. Throws SolverStalledError when the iteration cap is hit.
Solution solve(const LinearProgram& program, const SolverOptions& options = {});

// Dual simplex for  min c.x  subject to  A x <= b,  x >= 0  with c >= 0.
// Starting from the all-slack basis is dual feasible, so no phase 1 is
// needed, and rows can be appended after a solve: the next solve continues
// from the previous optimal basis.
class DualSimplex {
public:
    explicit DualSimplex(std::vector<double> costs, double tol = 1e-9);

    // Appends  terms . x <= rhs  and returns its index.
    std::size_t add_row(std::span<const Term> terms, double rhs);

    // Optimal or Infeasible. Throws SolverStalledError past the iteration cap.
    // With `confirm`, optimality is re-checked on a tableau rebuilt from the
    // original rows; without it the tableau is only rebuilt periodically.
    Status solve(bool confirm = true);

    std::size_t num_vars() const noexcept { return n_; }
    std::size_t num_rows() const noexcept { return rows_.size(); }
    std::size_t iterations() const noexcept { return iterations_; }

    // Current basic solution (meaningful after an Optimal solve).
    std::vector<double> values() const;

private:
    struct Row {
        std::vector<Term> terms;
        double rhs;
    };

    double& at(std::size_t i, std::size_t j) { return t_[i * stride_ + j]; }
    double at(std::size_t i, std::size_t j) const { return t_[i * stride_ + j]; }
    std::size_t width() const noexcept { return n_ + rows_.size(); }
    void grow(std::size_t new_stride);
    void pivot(std::size_t r, std::size_t q);
    bool reinvert();

    std::vector<double> cost_;
    double tol_;
    std::size_t n_;
    std::vector<Row> rows_;
    // Tableau rows over [x | slacks], rhs kept separately.
    std::vector<double> t_;
    std::size_t stride_ = 0;
    std::vector<double> rhs_;
    std::vector<double> reduced_;  // reduced costs over [x | slacks]
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> nz_;
    std::size_t iterations_ = 0;
    std::size_t since_reinvert_ = 0;
};

}  // namespace vnn::lp

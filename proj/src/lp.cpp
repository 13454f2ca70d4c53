#include "vnn/lp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>

#include "vnn/error.hpp"

namespace vnn::lp {

std::size_t LinearProgram::add_variable(double lower, double upper, double cost) {
    objective_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return objective_.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::vector<Term> terms, Relation relation, double rhs) {
    constraints_.push_back({std::move(terms), relation, rhs});
    return constraints_.size() - 1;
}

void LinearProgram::set_bounds(std::size_t var, double lower, double upper) {
    lower_.at(var) = lower;
    upper_.at(var) = upper;
}

void LinearProgram::validate() const {
    for (std::size_t j = 0; j < num_vars(); ++j) {
        if (std::isnan(lower_[j]) || std::isnan(upper_[j]) || lower_[j] > upper_[j] ||
            lower_[j] == kInf || upper_[j] == -kInf) {
            throw ValidationError("variable " + std::to_string(j) + " has invalid bounds");
        }
        if (!std::isfinite(objective_[j])) {
            throw ValidationError("variable " + std::to_string(j) + " has a non-finite cost");
        }
    }
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        const Constraint& c = constraints_[i];
        if (!std::isfinite(c.rhs)) {
            throw ValidationError("constraint " + std::to_string(i) + " has a non-finite rhs");
        }
        for (const Term& t : c.terms) {
            if (t.var >= num_vars()) {
                throw ValidationError("constraint " + std::to_string(i) + " references variable " +
                                      std::to_string(t.var) + " out of range");
            }
            if (!std::isfinite(t.coeff)) {
                throw ValidationError("constraint " + std::to_string(i) +
                                      " has a non-finite coefficient");
            }
        }
    }
}

double LinearProgram::objective_value(std::span<const double> values) const {
    double z = 0.0;
    for (std::size_t j = 0; j < num_vars(); ++j) z += objective_[j] * values[j];
    return z;
}

double LinearProgram::max_violation(std::span<const double> values) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < num_vars(); ++j) {
        worst = std::max(worst, lower_[j] - values[j]);
        worst = std::max(worst, values[j] - upper_[j]);
    }
    for (const Constraint& c : constraints_) {
        double lhs = 0.0;
        for (const Term& t : c.terms) lhs += t.coeff * values[t.var];
        switch (c.relation) {
            case Relation::LessEqual: worst = std::max(worst, lhs - c.rhs); break;
            case Relation::GreaterEqual: worst = std::max(worst, c.rhs - lhs); break;
            case Relation::Equal: worst = std::max(worst, std::abs(lhs - c.rhs)); break;
        }
    }
    return worst;
}

void LinearProgram::dump(std::ostream& out) const {
    const auto old_precision = out.precision(17);
    out << "minimize:";
    bool any = false;
    for (std::size_t j = 0; j < num_vars(); ++j) {
        if (objective_[j] != 0.0) {
            out << ' ' << (any && objective_[j] >= 0 ? "+" : "") << objective_[j] << " x" << j;
            any = true;
        }
    }
    if (!any) out << " 0";
    out << '\n';
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        const Constraint& c = constraints_[i];
        out << 'c' << i << ':';
        for (std::size_t k = 0; k < c.terms.size(); ++k) {
            out << ' ' << (k > 0 && c.terms[k].coeff >= 0 ? "+" : "") << c.terms[k].coeff << " x"
                << c.terms[k].var;
        }
        if (c.terms.empty()) out << " 0";
        const char* rel = c.relation == Relation::LessEqual ? "<=" :
                          c.relation == Relation::Equal     ? "=" :
                                                              ">=";
        out << ' ' << rel << ' ' << c.rhs << '\n';
    }
    for (std::size_t j = 0; j < num_vars(); ++j) {
        out << "bound x" << j << ": " << lower_[j] << " <= x" << j << " <= " << upper_[j] << '\n';
    }
    out.precision(old_precision);
}

const char* status_name(Status status) {
    switch (status) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
    }
    return "?";
}

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-14;
constexpr std::size_t kDegenerateRunLimit = 50;

// x_j = offset + sign1 * y[col1] + sign2 * y[col2]
struct VarMap {
    double offset = 0.0;
    std::size_t col1 = npos;
    double sign1 = 1.0;
    std::size_t col2 = npos;
    double sign2 = -1.0;
};

struct StdRow {
    std::vector<std::pair<std::size_t, double>> coeffs;
    Relation relation;
    double rhs;
};

class Simplex {
public:
    Simplex(const LinearProgram& program, const SolverOptions& options)
        : program_(program), options_(options) {
        standardize();
        build_tableau();
    }

    Solution run() {
        Solution sol;
        cap_ = options_.max_iterations > 0
                   ? options_.max_iterations
                   : 50 * (program_.num_vars() + program_.num_constraints() + 1);
        reinvert_every_ = std::max<std::size_t>(100, m_);

        // Phase 1: minimize the sum of artificials.
        std::vector<double> phase1(n_, 0.0);
        for (std::size_t j = art_begin_; j < n_; ++j) phase1[j] = 1.0;
        load_costs(phase1);
        Status s1 = iterate(/*allow_artificial=*/true);
        (void)s1;  // phase 1 is bounded below by zero
        const double infeas = -obj_[n_];
        double bscale = 1.0;
        for (const StdRow& r : rows_) bscale = std::max(bscale, std::abs(r.rhs));
        if (infeas > options_.tol * bscale) {
            sol.status = Status::Infeasible;
            sol.iterations = iterations_;
            return sol;
        }
        drive_out_artificials();

        // Phase 2 on the true costs.
        std::vector<double> phase2(n_, 0.0);
        for (std::size_t j = 0; j < ny_; ++j) phase2[j] = ycost_[j];
        load_costs(phase2);
        Status s2 = iterate(/*allow_artificial=*/false);
        sol.iterations = iterations_;
        if (s2 == Status::Unbounded) {
            sol.status = Status::Unbounded;
            return sol;
        }

        std::vector<double> y(ny_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < ny_) y[basis_[i]] = std::max(0.0, rhs(i));
        }
        std::vector<double> x = map_back(y);
        if (options_.polish) {
            std::vector<double> polished;
            if (polish(polished)) {
                std::vector<double> xp = map_back(polished);
                if (program_.max_violation(xp) <= program_.max_violation(x)) x = std::move(xp);
            }
        }
        sol.status = Status::Optimal;
        sol.objective = program_.objective_value(x);
        sol.values = std::move(x);
        return sol;
    }

private:
    void standardize() {
        const std::size_t nv = program_.num_vars();
        vars_.resize(nv);
        std::vector<std::pair<std::size_t, double>> ub_rows;
        for (std::size_t j = 0; j < nv; ++j) {
            const double lo = program_.lower()[j];
            const double hi = program_.upper()[j];
            const double c = program_.objective()[j];
            VarMap& vm = vars_[j];
            if (std::isfinite(lo) && lo == hi) {
                vm.offset = lo;
            } else if (std::isfinite(lo)) {
                vm.offset = lo;
                vm.col1 = ny_++;
                vm.sign1 = 1.0;
                ycost_.push_back(c);
                if (std::isfinite(hi)) ub_rows.emplace_back(vm.col1, hi - lo);
            } else if (std::isfinite(hi)) {
                vm.offset = hi;
                vm.col1 = ny_++;
                vm.sign1 = -1.0;
                ycost_.push_back(-c);
            } else {
                vm.col1 = ny_++;
                vm.sign1 = 1.0;
                ycost_.push_back(c);
                vm.col2 = ny_++;
                vm.sign2 = -1.0;
                ycost_.push_back(-c);
            }
        }

        std::vector<double> dense(ny_, 0.0);
        std::vector<char> seen(ny_, 0);
        std::vector<std::size_t> touched;
        for (const Constraint& c : program_.constraints()) {
            double rhs = c.rhs;
            touched.clear();
            auto add = [&](std::size_t col, double v) {
                if (!seen[col]) {
                    seen[col] = 1;
                    touched.push_back(col);
                }
                dense[col] += v;
            };
            for (const Term& t : c.terms) {
                const VarMap& vm = vars_[t.var];
                rhs -= t.coeff * vm.offset;
                if (vm.col1 != npos) add(vm.col1, t.coeff * vm.sign1);
                if (vm.col2 != npos) add(vm.col2, t.coeff * vm.sign2);
            }
            std::sort(touched.begin(), touched.end());
            StdRow row{{}, c.relation, rhs};
            for (std::size_t col : touched) {
                if (dense[col] != 0.0) row.coeffs.emplace_back(col, dense[col]);
                dense[col] = 0.0;
                seen[col] = 0;
            }
            rows_.push_back(std::move(row));
        }
        for (auto [col, bound] : ub_rows) {
            rows_.push_back({{{col, 1.0}}, Relation::LessEqual, bound});
        }

        for (StdRow& r : rows_) {
            if (r.rhs < 0.0) {
                r.rhs = -r.rhs;
                for (auto& [col, v] : r.coeffs) v = -v;
                if (r.relation == Relation::LessEqual) {
                    r.relation = Relation::GreaterEqual;
                } else if (r.relation == Relation::GreaterEqual) {
                    r.relation = Relation::LessEqual;
                }
            }
            // A ">= 0" row is a "<= 0" row after negation, which gets a basic slack.
            if (r.relation == Relation::GreaterEqual && r.rhs == 0.0) {
                for (auto& [col, v] : r.coeffs) v = -v;
                r.relation = Relation::LessEqual;
            }
        }
    }

    void build_tableau() {
        m_ = rows_.size();
        std::size_t n_slack = 0;
        std::size_t n_art = 0;
        for (const StdRow& r : rows_) {
            if (r.relation != Relation::Equal) ++n_slack;
            if (r.relation != Relation::LessEqual) ++n_art;
        }
        art_begin_ = ny_ + n_slack;
        n_ = art_begin_ + n_art;
        stride_ = n_ + 1;
        t_.assign(m_ * stride_, 0.0);
        basis_.assign(m_, npos);
        orig_cols_.assign(n_, {});

        std::size_t slack = ny_;
        std::size_t art = art_begin_;
        for (std::size_t i = 0; i < m_; ++i) {
            const StdRow& r = rows_[i];
            for (auto [col, v] : r.coeffs) {
                at(i, col) = v;
                orig_cols_[col].emplace_back(i, v);
            }
            rhs(i) = r.rhs;
            if (r.relation == Relation::LessEqual) {
                at(i, slack) = 1.0;
                orig_cols_[slack].emplace_back(i, 1.0);
                basis_[i] = slack++;
            } else if (r.relation == Relation::GreaterEqual) {
                at(i, slack) = -1.0;
                orig_cols_[slack].emplace_back(i, -1.0);
                ++slack;
                at(i, art) = 1.0;
                orig_cols_[art].emplace_back(i, 1.0);
                basis_[i] = art++;
            } else {
                at(i, art) = 1.0;
                orig_cols_[art].emplace_back(i, 1.0);
                basis_[i] = art++;
            }
        }
    }

    double& at(std::size_t i, std::size_t j) { return t_[i * stride_ + j]; }
    double& rhs(std::size_t i) { return t_[i * stride_ + n_]; }

    // obj_ = c - c_B^T T over all columns; obj_[n_] = -c_B^T rhs.
    void load_costs(const std::vector<double>& cost) {
        cost_ = cost;
        obj_.assign(stride_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) obj_[j] = cost[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = &t_[i * stride_];
            for (std::size_t j = 0; j <= n_; ++j) obj_[j] -= cb * row[j];
        }
        for (std::size_t i = 0; i < m_; ++i) obj_[basis_[i]] = 0.0;
    }

    std::size_t select_entering(bool allow_artificial, bool bland,
                                const std::vector<char>& rejected) const {
        const double dtol = std::min(options_.tol, 1e-9);
        const std::size_t limit = allow_artificial ? n_ : art_begin_;
        std::size_t best = npos;
        double best_val = -dtol;
        for (std::size_t j = 0; j < limit; ++j) {
            if (obj_[j] < -dtol && !rejected[j]) {
                if (bland) return j;
                if (obj_[j] < best_val) {
                    best_val = obj_[j];
                    best = j;
                }
            }
        }
        return best;
    }

    std::size_t ratio_test(std::size_t q, bool bland) {
        if (bland) {
            // Exact minimum ratio, ties to the smallest basic index.
            std::size_t best = npos;
            double best_ratio = kInf;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, q);
                if (a <= kPivotTol) continue;
                const double ratio = std::max(rhs(i), 0.0) / a;
                if (best == npos || ratio < best_ratio - 1e-12 ||
                    (ratio <= best_ratio + 1e-12 && basis_[i] < basis_[best])) {
                    best_ratio = best == npos ? ratio : std::min(best_ratio, ratio);
                    best = i;
                }
            }
            return best;
        }
        // Harris two-pass test: bound the step with a small feasibility
        // tolerance, then take the largest pivot among rows within it.
        constexpr double kFeasTol = 1e-9;
        double theta = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
            const double a = at(i, q);
            if (a <= kPivotTol) continue;
            theta = std::min(theta, (std::max(rhs(i), 0.0) + kFeasTol) / a);
        }
        if (theta == kInf) return npos;
        std::size_t best = npos;
        double best_piv = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double a = at(i, q);
            if (a <= kPivotTol) continue;
            if (std::max(rhs(i), 0.0) / a > theta) continue;
            if (a > best_piv || (a == best_piv && basis_[i] < basis_[best])) {
                best = i;
                best_piv = a;
            }
        }
        return best;
    }

    void pivot(std::size_t r, std::size_t q) {
        double* prow = &t_[r * stride_];
        const double inv = 1.0 / prow[q];
        nz_.clear();
        for (std::size_t j = 0; j <= n_; ++j) {
            if (prow[j] == 0.0) continue;
            prow[j] *= inv;
            if (std::abs(prow[j]) < kDropTol && j != n_) {
                prow[j] = 0.0;
                continue;
            }
            nz_.push_back(j);
        }
        prow[q] = 1.0;

        const std::size_t* nz = nz_.data();
        const std::size_t nnz = nz_.size();
        const long m = static_cast<long>(m_);
        const bool par = options_.parallel && m_ * nnz > 20000;
        double* base = t_.data();
        const std::size_t stride = stride_;
#pragma omp parallel for schedule(static) if (par)
        for (long i = 0; i < m; ++i) {
            if (static_cast<std::size_t>(i) == r) continue;
            double* row = base + static_cast<std::size_t>(i) * stride;
            const double f = row[q];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < nnz; ++k) row[nz[k]] -= f * prow[nz[k]];
            row[q] = 0.0;
        }
        const double f = obj_[q];
        if (f != 0.0) {
            for (std::size_t k = 0; k < nnz; ++k) obj_[nz[k]] -= f * prow[nz[k]];
            obj_[q] = 0.0;
        }
        basis_[r] = q;
    }

    // Rebuilds the tableau as B^-1 [A | b] from the original columns, which
    // discards the round-off accumulated by the elimination steps.
    bool reinvert() {
        since_reinvert_ = 0;
        if (m_ == 0) return true;
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t i = 0; i < m_; ++i) {
            for (auto [row, v] : orig_cols_[basis_[i]]) {
                trips.emplace_back(static_cast<int>(row), static_cast<int>(i), v);
            }
        }
        Eigen::SparseMatrix<double> basis(static_cast<int>(m_), static_cast<int>(m_));
        basis.setFromTriplets(trips.begin(), trips.end());
        basis.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(basis);
        if (lu.info() != Eigen::Success) return false;

        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<int>(m_), static_cast<int>(stride_));
        for (std::size_t j = 0; j < n_; ++j) {
            for (auto [row, v] : orig_cols_[j]) full(static_cast<int>(row), static_cast<int>(j)) = v;
        }
        for (std::size_t i = 0; i < m_; ++i) full(static_cast<int>(i), static_cast<int>(n_)) = rows_[i].rhs;
        const Eigen::MatrixXd solved = lu.solve(full);
        if (lu.info() != Eigen::Success || !solved.allFinite()) return false;

        for (std::size_t i = 0; i < m_; ++i) {
            double* row = &t_[i * stride_];
            for (std::size_t j = 0; j <= n_; ++j) {
                const double v = solved(static_cast<int>(i), static_cast<int>(j));
                row[j] = std::abs(v) < kDropTol ? 0.0 : v;
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t k = 0; k < m_; ++k) at(k, basis_[i]) = k == i ? 1.0 : 0.0;
        }
        load_costs(cost_);
        return true;
    }

    Status iterate(bool allow_artificial) {
        bool bland = options_.rule == PivotRule::Bland;
        std::size_t degenerate_run = 0;
        // Columns whose reduced cost is round-off and that have no pivot.
        std::vector<char> rejected(n_, 0);
        bool any_rejected = false;
        while (true) {
            if (since_reinvert_ >= reinvert_every_) reinvert();
            const std::size_t q = select_entering(allow_artificial, bland, rejected);
            if (q == npos) {
                // Confirm optimality on a freshly computed tableau.
                if (since_reinvert_ > 0 && reinvert()) {
                    std::fill(rejected.begin(), rejected.end(), 0);
                    any_rejected = false;
                    if (select_entering(allow_artificial, bland, rejected) != npos) continue;
                }
                return Status::Optimal;
            }
            const std::size_t r = ratio_test(q, bland);
            if (r == npos) {
                // Phase 1 is bounded, so a missing pivot there is always noise.
                if (!allow_artificial && obj_[q] < -options_.tol) return Status::Unbounded;
                rejected[q] = 1;
                any_rejected = true;
                continue;
            }
            if (any_rejected) {
                std::fill(rejected.begin(), rejected.end(), 0);
                any_rejected = false;
            }
            if (iterations_ >= cap_) {
                throw SolverStalledError("simplex iteration cap of " + std::to_string(cap_) +
                                         " exceeded");
            }
            const double step = std::max(rhs(r), 0.0) / at(r, q);
            pivot(r, q);
            ++iterations_;
            ++since_reinvert_;
            if (options_.rule == PivotRule::DantzigBlandFallback) {
                if (step <= 1e-12) {
                    if (++degenerate_run >= kDegenerateRunLimit) bland = true;
                } else {
                    degenerate_run = 0;
                    bland = false;
                }
            }
        }
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < art_begin_) continue;
            std::size_t best = npos;
            double best_abs = 1e-9;
            for (std::size_t j = 0; j < art_begin_; ++j) {
                const double a = std::abs(at(i, j));
                if (a > best_abs) {
                    best_abs = a;
                    best = j;
                }
            }
            // No candidate: the row is redundant and its artificial stays basic at zero.
            if (best != npos) {
                pivot(i, best);
                ++iterations_;
            }
        }
    }

    // Solve B y_B = b on the original standard-form columns.
    bool polish(std::vector<double>& y) const {
        if (m_ == 0) {
            y.assign(ny_, 0.0);
            return true;
        }
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t i = 0; i < m_; ++i) {
            for (auto [row, v] : orig_cols_[basis_[i]]) {
                trips.emplace_back(static_cast<int>(row), static_cast<int>(i), v);
            }
        }
        Eigen::SparseMatrix<double> basis(static_cast<int>(m_), static_cast<int>(m_));
        basis.setFromTriplets(trips.begin(), trips.end());
        basis.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(basis);
        if (lu.info() != Eigen::Success) return false;
        Eigen::VectorXd b(static_cast<int>(m_));
        for (std::size_t i = 0; i < m_; ++i) b(static_cast<int>(i)) = rows_[i].rhs;
        Eigen::VectorXd xb = lu.solve(b);
        if (lu.info() != Eigen::Success || !xb.allFinite()) return false;
        y.assign(ny_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < ny_) y[basis_[i]] = std::max(0.0, xb(static_cast<int>(i)));
        }
        return true;
    }

    std::vector<double> map_back(const std::vector<double>& y) const {
        std::vector<double> x(vars_.size());
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            const VarMap& vm = vars_[j];
            double v = vm.offset;
            if (vm.col1 != npos) v += vm.sign1 * y[vm.col1];
            if (vm.col2 != npos) v += vm.sign2 * y[vm.col2];
            x[j] = v;
        }
        return x;
    }

    const LinearProgram& program_;
    SolverOptions options_;

    std::vector<VarMap> vars_;
    std::vector<double> ycost_;
    std::size_t ny_ = 0;
    std::vector<StdRow> rows_;

    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::size_t art_begin_ = 0;
    std::size_t stride_ = 0;
    std::vector<double> t_;
    std::vector<double> obj_;
    std::vector<std::size_t> basis_;
    std::vector<std::vector<std::pair<std::size_t, double>>> orig_cols_;
    std::vector<std::size_t> nz_;

    std::size_t cap_ = 0;
    std::size_t iterations_ = 0;
    std::vector<double> cost_;
    std::size_t since_reinvert_ = 0;
    std::size_t reinvert_every_ = 0;
};

}  // namespace

DualSimplex::DualSimplex(std::vector<double> costs, double tol)
    : cost_(std::move(costs)), tol_(tol), n_(cost_.size()) {
    for (std::size_t j = 0; j < n_; ++j) {
        if (!std::isfinite(cost_[j]) || cost_[j] < 0.0) {
            throw ValidationError("dual simplex needs finite non-negative costs (variable " +
                                  std::to_string(j) + ")");
        }
    }
    stride_ = n_ + 1;
    reduced_ = cost_;
}

void DualSimplex::grow(std::size_t new_stride) {
    std::vector<double> t(basis_.size() * new_stride, 0.0);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        std::copy_n(&t_[i * stride_], stride_, &t[i * new_stride]);
    }
    t_ = std::move(t);
    stride_ = new_stride;
}

std::size_t DualSimplex::add_row(std::span<const Term> terms, double rhs) {
    if (!std::isfinite(rhs)) throw ValidationError("row rhs must be finite");
    for (const Term& t : terms) {
        if (t.var >= n_) throw ValidationError("row references variable out of range");
        if (!std::isfinite(t.coeff)) throw ValidationError("row has a non-finite coefficient");
    }
    const std::size_t m = basis_.size();
    const std::size_t slack = n_ + m;
    if (slack + 1 > stride_) grow(std::max(2 * stride_, slack + 1));

    std::vector<double> row(stride_, 0.0);
    for (const Term& t : terms) row[t.var] += t.coeff;
    row[slack] = 1.0;
    double b = rhs;
    // Express the row in the current basis.
    for (std::size_t i = 0; i < m; ++i) {
        const double v = row[basis_[i]];
        if (v == 0.0) continue;
        const double* ti = &t_[i * stride_];
        for (std::size_t j = 0; j < slack; ++j) {
            if (ti[j] != 0.0) row[j] -= v * ti[j];
        }
        row[basis_[i]] = 0.0;
        b -= v * rhs_[i];
    }
    t_.insert(t_.end(), row.begin(), row.end());
    rhs_.push_back(b);
    reduced_.push_back(0.0);
    basis_.push_back(slack);
    rows_.push_back({std::vector<Term>(terms.begin(), terms.end()), rhs});
    return m;
}

void DualSimplex::pivot(std::size_t r, std::size_t q) {
    const std::size_t w = width();
    double* prow = &t_[r * stride_];
    const double inv = 1.0 / prow[q];
    nz_.clear();
    for (std::size_t j = 0; j < w; ++j) {
        if (prow[j] == 0.0) continue;
        prow[j] *= inv;
        if (std::abs(prow[j]) < kDropTol) {
            prow[j] = 0.0;
            continue;
        }
        nz_.push_back(j);
    }
    prow[q] = 1.0;
    rhs_[r] *= inv;

    const std::size_t* nz = nz_.data();
    const std::size_t nnz = nz_.size();
    const long m = static_cast<long>(basis_.size());
    const bool par = static_cast<std::size_t>(m) * nnz > 20000;
    double* base = t_.data();
    const std::size_t stride = stride_;
    double* rhs = rhs_.data();
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < m; ++i) {
        if (static_cast<std::size_t>(i) == r) continue;
        double* row = base + static_cast<std::size_t>(i) * stride;
        const double f = row[q];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < nnz; ++k) row[nz[k]] -= f * prow[nz[k]];
        row[q] = 0.0;
        rhs[i] -= f * rhs[r];
    }
    const double f = reduced_[q];
    if (f != 0.0) {
        for (std::size_t k = 0; k < nnz; ++k) reduced_[nz[k]] -= f * prow[nz[k]];
        reduced_[q] = 0.0;
    }
    basis_[r] = q;
}

bool DualSimplex::reinvert() {
    since_reinvert_ = 0;
    const std::size_t m = basis_.size();
    if (m == 0) return true;
    const std::size_t w = width();
    // Columns of [A | I].
    std::vector<std::vector<std::pair<std::size_t, double>>> cols(w);
    for (std::size_t i = 0; i < m; ++i) {
        for (const Term& t : rows_[i].terms) cols[t.var].emplace_back(i, t.coeff);
        cols[n_ + i].emplace_back(i, 1.0);
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t k = 0; k < m; ++k) {
        for (auto [i, v] : cols[basis_[k]]) {
            trips.emplace_back(static_cast<int>(i), static_cast<int>(k), v);
        }
    }
    Eigen::SparseMatrix<double> basis(static_cast<int>(m), static_cast<int>(m));
    basis.setFromTriplets(trips.begin(), trips.end());
    basis.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(basis);
    if (lu.info() != Eigen::Success) return false;

    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<int>(m), static_cast<int>(w + 1));
    for (std::size_t j = 0; j < w; ++j) {
        for (auto [i, v] : cols[j]) full(static_cast<int>(i), static_cast<int>(j)) += v;
    }
    for (std::size_t i = 0; i < m; ++i) full(static_cast<int>(i), static_cast<int>(w)) = rows_[i].rhs;
    const Eigen::MatrixXd solved = lu.solve(full);
    if (lu.info() != Eigen::Success || !solved.allFinite()) return false;

    for (std::size_t i = 0; i < m; ++i) {
        double* row = &t_[i * stride_];
        for (std::size_t j = 0; j < w; ++j) {
            const double v = solved(static_cast<int>(i), static_cast<int>(j));
            row[j] = std::abs(v) < kDropTol ? 0.0 : v;
        }
        rhs_[i] = solved(static_cast<int>(i), static_cast<int>(w));
    }
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < m; ++i) at(i, basis_[k]) = i == k ? 1.0 : 0.0;
    }
    for (std::size_t j = 0; j < w; ++j) reduced_[j] = j < n_ ? cost_[j] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t b = basis_[i];
        const double cb = b < n_ ? cost_[b] : 0.0;
        if (cb == 0.0) continue;
        const double* row = &t_[i * stride_];
        for (std::size_t j = 0; j < w; ++j) reduced_[j] -= cb * row[j];
    }
    for (std::size_t b : basis_) reduced_[b] = 0.0;
    return true;
}

Status DualSimplex::solve(bool confirm) {
    const std::size_t m = basis_.size();
    const std::size_t cap = iterations_ + 50 * (n_ + m + 1);
    const std::size_t refresh = std::max<std::size_t>(100, m);
    const double piv_tol = kPivotTol;
    bool bland = false;
    std::size_t degenerate_run = 0;
    bool confirmed = false;
    while (true) {
        if (since_reinvert_ >= refresh) reinvert();
        const std::size_t w = width();

        // Leaving row: a basic variable below zero.
        std::size_t r = npos;
        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double lim = -tol_ * std::max(1.0, std::abs(rows_[i].rhs));
            if (rhs_[i] >= lim) continue;
            if (bland) {
                if (r == npos || basis_[i] < basis_[r]) r = i;
            } else if (rhs_[i] / std::max(1.0, std::abs(rows_[i].rhs)) < worst) {
                worst = rhs_[i] / std::max(1.0, std::abs(rows_[i].rhs));
                r = i;
            }
        }
        if (r == npos) {
            if (confirm && !confirmed && since_reinvert_ > 0 && reinvert()) {
                confirmed = true;
                continue;
            }
            return Status::Optimal;
        }
        confirmed = false;

        // Entering column: dual ratio test on the negative entries of row r.
        const double* row = &t_[r * stride_];
        std::size_t q = npos;
        if (bland) {
            double best = kInf;
            for (std::size_t j = 0; j < w; ++j) {
                const double a = row[j];
                if (a >= -piv_tol) continue;
                const double ratio = std::max(reduced_[j], 0.0) / -a;
                if (ratio < best - 1e-12) {
                    best = ratio;
                    q = j;
                }
            }
        } else {
            constexpr double kDualTol = 1e-9;
            double theta = kInf;
            for (std::size_t j = 0; j < w; ++j) {
                const double a = row[j];
                if (a >= -piv_tol) continue;
                theta = std::min(theta, (std::max(reduced_[j], 0.0) + kDualTol) / -a);
            }
            double best_piv = 0.0;
            for (std::size_t j = 0; j < w; ++j) {
                const double a = row[j];
                if (a >= -piv_tol) continue;
                if (std::max(reduced_[j], 0.0) / -a > theta) continue;
                if (-a > best_piv) {
                    best_piv = -a;
                    q = j;
                }
            }
        }
        if (q == npos) {
            // Every entry of the row is non-negative: the row cannot be met.
            if (since_reinvert_ > 0 && reinvert()) continue;
            return Status::Infeasible;
        }
        if (iterations_ >= cap) {
            throw SolverStalledError("dual simplex iteration cap exceeded");
        }
        const double step = std::max(reduced_[q], 0.0) / -row[q];
        pivot(r, q);
        ++iterations_;
        ++since_reinvert_;
        if (step <= 1e-12) {
            if (++degenerate_run >= kDegenerateRunLimit) bland = true;
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }
}

std::vector<double> DualSimplex::values() const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (basis_[i] < n_) x[basis_[i]] = std::max(0.0, rhs_[i]);
    }
    return x;
}

Solution solve(const LinearProgram& program, const SolverOptions& options) {
    program.validate();
    Simplex simplex(program, options);
    return simplex.run();
}

}  // namespace vnn::lp

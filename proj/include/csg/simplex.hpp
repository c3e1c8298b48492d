#pragma once

// Dense two-phase primal simplex for the small linear programs that arise
// from occupation measures. Bland's rule throughout, so the method cannot
// cycle and results are reproducible.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "csg/game_model.hpp"

namespace csg {

/// minimize objective . x  s.t.  eq_rows x = eq_rhs,  le_rows x <= le_rhs,  x >= 0
struct LinearProgram {
    int num_vars = 0;
    Vec objective;
    std::vector<Vec> eq_rows;
    Vec eq_rhs;
    std::vector<Vec> le_rows;
    Vec le_rhs;

    void add_eq(Vec row, double rhs) {
        eq_rows.push_back(std::move(row));
        eq_rhs.push_back(rhs);
    }
    void add_le(Vec row, double rhs) {
        le_rows.push_back(std::move(row));
        le_rhs.push_back(rhs);
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    Vec x;
    double objective = 0.0;
    /// max violation of equality, inequality and sign constraints at x
    double primal_residual = 0.0;
    /// |primal objective - dual objective| of the final basis
    double duality_gap = 0.0;
    int iterations = 0;
};

struct SimplexOptions {
    double pivot_tol = 1e-10;
    double cost_tol = 1e-11;
    double feasibility_tol = 1e-9;
    int max_iterations = 200000;
};

namespace detail {

class Tableau {
public:
    Tableau(int rows, int cols) : m_(rows), n_(cols), t_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {}

    double& at(int r, int c) { return t_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double at(int r, int c) const { return t_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double& rhs(int r) { return at(r, n_); }
    double& obj(int c) { return at(m_, c); }

    void pivot(int pr, int pc) {
        const double inv = 1.0 / at(pr, pc);
        for (int c = 0; c <= n_; ++c) at(pr, c) *= inv;
        at(pr, pc) = 1.0;
        for (int r = 0; r <= m_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (int c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
    }

    int rows() const { return m_; }
    int cols() const { return n_; }

private:
    int m_, n_;
    std::vector<double> t_;
};

}  // namespace detail

inline LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    const int n = lp.num_vars;
    const int meq = static_cast<int>(lp.eq_rows.size());
    const int mle = static_cast<int>(lp.le_rows.size());
    const int m = meq + mle;
    const int nstruct = n + mle;  // decision variables and slacks
    const int ncols = nstruct + m;  // plus one artificial per row
    if (static_cast<int>(lp.objective.size()) != n) throw std::invalid_argument("solve_lp: objective size mismatch");

    // Equality form A x' = b with b >= 0.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, nstruct);
    Eigen::VectorXd b(m);
    for (int r = 0; r < meq; ++r) {
        if (static_cast<int>(lp.eq_rows[r].size()) != n) throw std::invalid_argument("solve_lp: row size mismatch");
        for (int j = 0; j < n; ++j) A(r, j) = lp.eq_rows[r][j];
        b(r) = lp.eq_rhs[r];
    }
    for (int r = 0; r < mle; ++r) {
        if (static_cast<int>(lp.le_rows[r].size()) != n) throw std::invalid_argument("solve_lp: row size mismatch");
        for (int j = 0; j < n; ++j) A(meq + r, j) = lp.le_rows[r][j];
        A(meq + r, n + r) = 1.0;
        b(meq + r) = lp.le_rhs[r];
    }
    for (int r = 0; r < m; ++r)
        if (b(r) < 0.0) {
            A.row(r) *= -1.0;
            b(r) = -b(r);
        }

    detail::Tableau T(m, ncols);
    std::vector<int> basis(m);
    std::vector<bool> active(m, true);
    for (int r = 0; r < m; ++r) {
        for (int j = 0; j < nstruct; ++j) T.at(r, j) = A(r, j);
        T.at(r, nstruct + r) = 1.0;
        T.rhs(r) = b(r);
        basis[r] = nstruct + r;
    }

    LpSolution sol;
    auto run = [&](int allowed_cols) -> LpStatus {
        while (true) {
            if (++sol.iterations > opt.max_iterations) throw SolverError("simplex: iteration limit reached");
            int pc = -1;
            for (int j = 0; j < allowed_cols; ++j)
                if (T.obj(j) < -opt.cost_tol) {
                    pc = j;
                    break;
                }
            if (pc < 0) return LpStatus::optimal;
            int pr = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m; ++r) {
                if (!active[r]) continue;
                const double a = T.at(r, pc);
                if (a <= opt.pivot_tol) continue;
                const double ratio = T.rhs(r) / a;
                if (pr < 0 || ratio < best - 1e-13) {
                    best = ratio;
                    pr = r;
                } else if (ratio <= best + 1e-13 && basis[r] < basis[pr]) {
                    pr = r;
                }
            }
            if (pr < 0) return LpStatus::unbounded;
            T.pivot(pr, pc);
            basis[pr] = pc;
        }
    };

    // Phase 1: minimize the sum of artificials.
    for (int j = 0; j <= ncols; ++j) T.obj(j) = 0.0;
    for (int j = nstruct; j < ncols; ++j) T.obj(j) = 1.0;
    for (int r = 0; r < m; ++r)
        for (int j = 0; j <= ncols; ++j) T.obj(j) -= T.at(r, j);
    run(ncols);
    const double infeas = -T.obj(ncols);
    const double bscale = std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
    if (infeas > opt.feasibility_tol * bscale) {
        sol.status = LpStatus::infeasible;
        return sol;
    }

    // Drive artificials out of the basis; rows where that fails are redundant.
    for (int r = 0; r < m; ++r) {
        if (basis[r] < nstruct) continue;
        int pc = -1;
        double big = 1e-9;
        for (int j = 0; j < nstruct; ++j)
            if (std::abs(T.at(r, j)) > big) {
                big = std::abs(T.at(r, j));
                pc = j;
            }
        if (pc >= 0) {
            T.pivot(r, pc);
            basis[r] = pc;
        } else {
            active[r] = false;
        }
    }

    // Phase 2.
    for (int j = 0; j <= ncols; ++j) T.obj(j) = 0.0;
    for (int j = 0; j < n; ++j) T.obj(j) = lp.objective[j];
    for (int r = 0; r < m; ++r) {
        if (!active[r]) continue;
        const double cb = basis[r] < n ? lp.objective[basis[r]] : 0.0;
        if (cb == 0.0) continue;
        for (int j = 0; j <= ncols; ++j) T.obj(j) -= cb * T.at(r, j);
    }
    if (run(nstruct) == LpStatus::unbounded) {
        sol.status = LpStatus::unbounded;
        return sol;
    }

    // Read off the basic solution, then re-solve the basis system directly.
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(nstruct);
    std::vector<int> rows, cols;
    for (int r = 0; r < m; ++r) {
        if (!active[r]) continue;
        rows.push_back(r);
        cols.push_back(basis[r]);
        xs(basis[r]) = T.rhs(r);
    }
    auto residual = [&](const Eigen::VectorXd& x) {
        double res = 0.0;
        if (m > 0) res = (A * x - b).cwiseAbs().maxCoeff();
        for (int j = 0; j < nstruct; ++j) res = std::max(res, -x(j));
        return res;
    };
    const int k = static_cast<int>(rows.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    if (k > 0) {
        Eigen::MatrixXd B(k, k);
        Eigen::VectorXd bb(k), cb(k);
        for (int r = 0; r < k; ++r) {
            bb(r) = b(rows[r]);
            cb(r) = cols[r] < n ? lp.objective[cols[r]] : 0.0;
            for (int c = 0; c < k; ++c) B(r, c) = A(rows[r], cols[c]);
        }
        const auto lu = B.fullPivLu();
        if (lu.isInvertible()) {
            Eigen::VectorXd xb = lu.solve(bb);
            Eigen::VectorXd polished = Eigen::VectorXd::Zero(nstruct);
            for (int c = 0; c < k; ++c) polished(cols[c]) = std::max(0.0, xb(c));
            if (residual(polished) <= residual(xs)) xs = polished;
            const Eigen::VectorXd yk = B.transpose().fullPivLu().solve(cb);
            for (int r = 0; r < k; ++r) y(rows[r]) = yk(r);
        }
    }
    for (int j = 0; j < nstruct; ++j) xs(j) = std::max(0.0, xs(j));

    sol.status = LpStatus::optimal;
    sol.x.assign(xs.data(), xs.data() + n);
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += lp.objective[j] * sol.x[j];
    sol.primal_residual = residual(xs);
    sol.duality_gap = std::abs(sol.objective - b.dot(y));
    return sol;
}

}  // namespace csg

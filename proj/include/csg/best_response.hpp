#pragma once

// Constrained best responses through the occupation-measure linear program
// of an induced MDP, plus the feasibility and Slater diagnostics built on
// the same program.

#include <limits>
#include <vector>

#include "csg/evaluation.hpp"
#include "csg/simplex.hpp"

namespace csg {

inline constexpr double kFlowTol = 1e-9;
inline constexpr double kVisitTol = 1e-12;

/// Discounted state-action visitation frequencies theta[s * A + a].
struct OccupationMeasure {
    int num_states = 0;
    int num_actions = 0;
    Vec mass;

    double operator()(int s, int a) const { return mass[static_cast<std::size_t>(s) * num_actions + a]; }
    double state_mass(int s) const {
        double m = 0.0;
        for (int a = 0; a < num_actions; ++a) m += (*this)(s, a);
        return m;
    }
    double total() const {
        double t = 0.0;
        for (double x : mass) t += x;
        return t;
    }
};

enum class ResponseStatus { optimal, infeasible };

inline const char* to_string(ResponseStatus s) { return s == ResponseStatus::optimal ? "optimal" : "infeasible"; }

struct BestResponseResult {
    ResponseStatus status = ResponseStatus::infeasible;
    double value = 0.0;
    OccupationMeasure theta;
    StationaryStrategy strategy;
    /// J^l for l = 1..L under theta
    Vec constraint_values;
    double primal_residual = 0.0;
    double duality_gap = 0.0;
};

/// Integral of layer l's averaged cost against theta.
inline double occupation_cost(const InducedMDP& m, const OccupationMeasure& theta, int layer) {
    double v = 0.0;
    for (std::size_t k = 0; k < theta.mass.size(); ++k) v += m.cost[layer][k] * theta.mass[k];
    return v;
}

/// max over states of |theta(s', A) - (1-alpha) eta(s') - alpha sum theta q(s'|.)|.
inline double flow_balance_residual(const InducedMDP& m, const OccupationMeasure& theta) {
    const int S = m.num_states, A = m.num_actions;
    Vec inflow(S, 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = theta(s, a);
            if (w == 0.0) continue;
            for (int y = 0; y < S; ++y) inflow[y] += w * m.p(s, a, y);
        }
    double res = 0.0;
    for (int y = 0; y < S; ++y)
        res = std::max(res, std::abs(theta.state_mass(y) - (1.0 - m.alpha) * m.eta[y] - m.alpha * inflow[y]));
    return res;
}

inline OccupationMeasure occupation_of(const InducedMDP& m, const StationaryStrategy& sigma) {
    check_strategy(sigma, m.num_states, m.num_actions, "occupation_of");
    const int S = m.num_states, A = m.num_actions;
    const Eigen::MatrixXd P = policy_kernel(m, sigma);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - m.alpha * P.transpose();
    Eigen::VectorXd rhs(S);
    for (int s = 0; s < S; ++s) rhs(s) = (1.0 - m.alpha) * m.eta[s];
    const auto lu = M.partialPivLu();
    Eigen::VectorXd d = lu.solve(rhs);
    d += lu.solve(rhs - M * d);
    OccupationMeasure theta{S, A, Vec(static_cast<std::size_t>(S) * A, 0.0)};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) theta.mass[static_cast<std::size_t>(s) * A + a] = std::max(0.0, d(s)) * sigma[s][a];
    return theta;
}

/// Conditional action law per state; rows of unvisited states are uniform.
inline StationaryStrategy recover_strategy(const OccupationMeasure& theta, double visit_tol = kVisitTol) {
    StationaryStrategy sigma;
    sigma.rows.assign(theta.num_states, Dist(theta.num_actions, 1.0 / theta.num_actions));
    for (int s = 0; s < theta.num_states; ++s) {
        const double mass = theta.state_mass(s);
        if (mass <= visit_tol) continue;
        for (int a = 0; a < theta.num_actions; ++a) sigma[s][a] = theta(s, a) / mass;
    }
    return sigma;
}

namespace detail {

/// Flow-balance equalities over the first S*A variables of an LP with `extra` trailing variables.
inline LinearProgram occupation_polytope(const InducedMDP& m, int extra = 0) {
    const int S = m.num_states, A = m.num_actions, n = S * A + extra;
    LinearProgram lp;
    lp.num_vars = n;
    lp.objective.assign(n, 0.0);
    for (int y = 0; y < S; ++y) {
        Vec row(n, 0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const std::size_t k = static_cast<std::size_t>(s) * A + a;
                row[k] -= m.alpha * m.p(s, a, y);
                if (s == y) row[k] += 1.0;
            }
        lp.add_eq(std::move(row), (1.0 - m.alpha) * m.eta[y]);
    }
    return lp;
}

inline OccupationMeasure theta_from(const InducedMDP& m, const Vec& x) {
    const std::size_t k = static_cast<std::size_t>(m.num_states) * m.num_actions;
    return {m.num_states, m.num_actions, Vec(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k))};
}

inline void check_flow(const InducedMDP& m, const OccupationMeasure& theta, const LpSolution& sol, const char* who) {
    const double res = flow_balance_residual(m, theta);
    if (!(res <= kFlowTol)) {
        std::ostringstream os;
        os << who << ": LP solution violates flow balance (residual " << res << ", primal residual "
           << sol.primal_residual << ", duality gap " << sol.duality_gap << ")";
        throw SolverError(os.str());
    }
}

}  // namespace detail

/**
 * Minimizes the objective-layer cost over occupation measures subject to the
 * constraint layers J^l <= kappa^l. Status is infeasible exactly when no
 * occupation measure meets the bounds.
 */
inline BestResponseResult occupation_lp(const InducedMDP& m, const Vec& kappa) {
    if (static_cast<int>(kappa.size()) != m.num_constraints())
        throw std::invalid_argument("occupation_lp: one bound per constraint layer required");
    LinearProgram lp = detail::occupation_polytope(m);
    lp.objective = m.cost[0];
    for (int l = 1; l < m.num_layers; ++l) lp.add_le(m.cost[l], kappa[l - 1]);
    const LpSolution sol = solve_lp(lp);
    BestResponseResult r;
    if (sol.status == LpStatus::infeasible) return r;
    if (sol.status != LpStatus::optimal) throw SolverError("occupation_lp: unbounded program");
    r.status = ResponseStatus::optimal;
    r.theta = detail::theta_from(m, sol.x);
    detail::check_flow(m, r.theta, sol, "occupation_lp");
    r.value = occupation_cost(m, r.theta, 0);
    for (int l = 1; l < m.num_layers; ++l) r.constraint_values.push_back(occupation_cost(m, r.theta, l));
    r.strategy = recover_strategy(r.theta);
    r.primal_residual = sol.primal_residual;
    r.duality_gap = sol.duality_gap;
    return r;
}

inline BestResponseResult occupation_lp(const InducedMDP& m) { return occupation_lp(m, m.kappa); }

struct FeasibilityResult {
    bool feasible = false;
    StationaryStrategy witness;
};

inline FeasibilityResult feasibility_check(const InducedMDP& m, const Vec& kappa) {
    if (static_cast<int>(kappa.size()) != m.num_constraints())
        throw std::invalid_argument("feasibility_check: one bound per constraint layer required");
    LinearProgram lp = detail::occupation_polytope(m);
    for (int l = 1; l < m.num_layers; ++l) lp.add_le(m.cost[l], kappa[l - 1]);
    const LpSolution sol = solve_lp(lp);
    FeasibilityResult r;
    if (sol.status != LpStatus::optimal) return r;
    r.feasible = true;
    r.witness = recover_strategy(detail::theta_from(m, sol.x));
    return r;
}

inline FeasibilityResult feasibility_check(const InducedMDP& m) { return feasibility_check(m, m.kappa); }

struct SlaterResult {
    /// largest uniform slack max z s.t. J^l <= kappa^l - z; +inf without constraints
    double zeta = 0.0;
    StationaryStrategy witness;
    Vec constraint_values;
};

/// Epigraph program for the strict Slater margin of one induced MDP.
inline SlaterResult slater_margin(const InducedMDP& m, const Vec& kappa) {
    if (static_cast<int>(kappa.size()) != m.num_constraints())
        throw std::invalid_argument("slater_margin: one bound per constraint layer required");
    SlaterResult r;
    if (m.num_constraints() == 0) {
        r.zeta = std::numeric_limits<double>::infinity();
        r.witness = uniform_strategy(m.num_states, m.num_actions);
        return r;
    }
    const int SA = m.num_states * m.num_actions;
    LinearProgram lp = detail::occupation_polytope(m, 2);
    lp.objective[SA] = -1.0;     // z+
    lp.objective[SA + 1] = 1.0;  // z-
    for (int l = 1; l < m.num_layers; ++l) {
        Vec row(SA + 2, 0.0);
        std::copy(m.cost[l].begin(), m.cost[l].end(), row.begin());
        row[SA] = 1.0;
        row[SA + 1] = -1.0;
        lp.add_le(std::move(row), kappa[l - 1]);
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal) throw SolverError("slater_margin: epigraph program not solved");
    const OccupationMeasure theta = detail::theta_from(m, sol.x);
    detail::check_flow(m, theta, sol, "slater_margin");
    r.witness = recover_strategy(theta);
    double worst = -std::numeric_limits<double>::infinity();
    for (int l = 1; l < m.num_layers; ++l) {
        const double v = occupation_cost(m, theta, l);
        r.constraint_values.push_back(v);
        worst = std::max(worst, v - kappa[l - 1]);
    }
    r.zeta = -worst;
    return r;
}

inline SlaterResult slater_margin(const InducedMDP& m) { return slater_margin(m, m.kappa); }

struct SlaterScan {
    double min_zeta = std::numeric_limits<double>::infinity();
    std::size_t worst_sample = 0;
    Vec zetas;
};

/// Minimum Slater margin of player i over a finite sample of opponent profiles.
inline SlaterScan game_slater_scan(const FiniteCSG& g, int player, const std::vector<StationaryProfile>& samples) {
    if (samples.empty()) throw std::invalid_argument("game_slater_scan: sample list is empty");
    SlaterScan scan;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double z = slater_margin(induced_mdp(g, player, samples[k])).zeta;
        scan.zetas.push_back(z);
        if (z < scan.min_zeta || k == 0) {
            scan.min_zeta = z;
            scan.worst_sample = k;
        }
    }
    return scan;
}

}  // namespace csg

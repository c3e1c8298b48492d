#pragma once

// Strategy surgery on finite games: Caratheodory reduction of convex
// combinations, cellwise matching of integrals, Markov replacement of a
// state-dependent strategy by piecewise-constant stages, occupation-measure
// mixing, and the weight-function transformation to bounded costs.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "csg/best_response.hpp"
#include "csg/discretization.hpp"

namespace csg {

/// Raised when input data violates a modelling assumption (as opposed to a shape error).
class AssumptionViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Caratheodory

struct CaratheodoryCertificate {
    std::vector<int> points;
    Vec weights;
    Vec target;
    /// max_k |sum_j w_j v(points_j)_k - target_k|
    double residual = 0.0;
};

/**
 * Reduces the rho0-combination of the vectors v[y] to one supported on at
 * most d + 1 points. Each step moves along a kernel direction of the
 * [v; 1] columns until a weight hits zero (lowest index on ties).
 */
inline CaratheodoryCertificate caratheodory_reduce(const std::vector<Vec>& v, const Vec& rho0) {
    if (v.empty() || v.size() != rho0.size())
        throw std::invalid_argument("caratheodory_reduce: need one weight per point and at least one point");
    if (!is_distribution(rho0)) throw std::invalid_argument("caratheodory_reduce: weights must form a distribution");
    const std::size_t d = v[0].size();
    for (const auto& x : v)
        if (x.size() != d) throw std::invalid_argument("caratheodory_reduce: points of different dimension");

    CaratheodoryCertificate cert;
    cert.target.assign(d, 0.0);
    for (std::size_t y = 0; y < v.size(); ++y)
        for (std::size_t k = 0; k < d; ++k) cert.target[k] += rho0[y] * v[y][k];

    std::vector<int> support;
    std::vector<double> beta;
    for (std::size_t y = 0; y < v.size(); ++y)
        if (rho0[y] > 0.0) {
            support.push_back(static_cast<int>(y));
            beta.push_back(rho0[y]);
        }

    auto columns = [&] {
        Eigen::MatrixXd M(d + 1, support.size());
        for (std::size_t j = 0; j < support.size(); ++j) {
            for (std::size_t k = 0; k < d; ++k) M(k, j) = v[support[j]][k];
            M(d, j) = 1.0;
        }
        return M;
    };

    while (true) {
        const Eigen::MatrixXd M = columns();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-12);
        if (lu.rank() == static_cast<Eigen::Index>(support.size())) break;
        Eigen::VectorXd z = lu.kernel().col(0);
        if (z.maxCoeff() <= 0.0) z = -z;
        int hit = -1;
        double step = 0.0;
        for (std::size_t j = 0; j < support.size(); ++j) {
            if (z(j) <= 1e-14) continue;
            const double t = beta[j] / z(j);
            if (hit < 0 || t < step) {
                step = t;
                hit = static_cast<int>(j);
            }
        }
        if (hit < 0) throw SolverError("caratheodory_reduce: degenerate kernel direction");
        std::vector<int> ns;
        std::vector<double> nb;
        for (std::size_t j = 0; j < support.size(); ++j) {
            const double w = beta[j] - step * z(j);
            if (static_cast<int>(j) == hit || w <= 0.0) continue;
            ns.push_back(support[j]);
            nb.push_back(w);
        }
        support = std::move(ns);
        beta = std::move(nb);
    }

    // Re-solve on the final support: the columns are independent, so the weights are unique.
    const Eigen::MatrixXd M = columns();
    Eigen::VectorXd rhs(d + 1);
    for (std::size_t k = 0; k < d; ++k) rhs(k) = cert.target[k];
    rhs(d) = 1.0;
    const Eigen::VectorXd w = M.colPivHouseholderQr().solve(rhs);
    bool polished = true;
    for (Eigen::Index j = 0; j < w.size(); ++j) polished = polished && w(j) >= 0.0;
    if (polished)
        for (std::size_t j = 0; j < beta.size(); ++j) beta[j] = w(j);

    cert.points = support;
    cert.weights = beta;
    for (std::size_t k = 0; k < d; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < support.size(); ++j) s += beta[j] * v[support[j]][k];
        cert.residual = std::max(cert.residual, std::abs(s - cert.target[k]));
    }
    if (cert.points.size() > d + 1) throw SolverError("caratheodory_reduce: support larger than d + 1");
    return cert;
}

// ---------------------------------------------------------------------------
// Cellwise matching and Markov replacement

struct CellwiseMatch {
    StationaryStrategy strategy;
    /// max over layers of |int int u dphi drho - int int u df drho|
    double residual = 0.0;
};

namespace detail {

inline double integrate(const std::vector<Vec>& u, int layer, const StationaryStrategy& s, const Vec& rho,
                        int num_actions) {
    double v = 0.0;
    for (std::size_t x = 0; x < rho.size(); ++x) {
        if (rho[x] == 0.0) continue;
        double inner = 0.0;
        for (int a = 0; a < num_actions; ++a) inner += u[layer][x * num_actions + a] * s[x][a];
        v += rho[x] * inner;
    }
    return v;
}

}  // namespace detail

/**
 * Piecewise-constant strategy with the same rho-integrals of every u^l as
 * phi_i. u[l][x * A + a] must be constant in x on each cell.
 */
inline CellwiseMatch cellwise_match(const Partition& part, const std::vector<Vec>& u, const Vec& rho,
                                    const StationaryStrategy& phi, int num_actions) {
    const int X = part.num_points(), A = num_actions, L1 = static_cast<int>(u.size());
    if (static_cast<int>(rho.size()) != X) throw std::invalid_argument("cellwise_match: rho has wrong length");
    check_strategy(phi, X, A, "cellwise_match");
    for (const auto& ul : u)
        if (ul.size() != static_cast<std::size_t>(X) * A)
            throw std::invalid_argument("cellwise_match: u has wrong shape");
    for (const auto& cell : part.cells)
        for (int x : cell)
            for (int l = 0; l < L1; ++l)
                for (int a = 0; a < A; ++a)
                    if (std::abs(u[l][static_cast<std::size_t>(x) * A + a] -
                                 u[l][static_cast<std::size_t>(cell.front()) * A + a]) > 1e-9)
                        throw std::invalid_argument("cellwise_match: u is not constant on cell of point " +
                                                    std::to_string(x));

    CellwiseMatch out;
    out.strategy = uniform_strategy(X, A);
    for (const auto& cell : part.cells) {
        double mass = 0.0;
        for (int x : cell) mass += rho[x];
        if (!(mass > 0.0)) continue;
        std::vector<int> ys;
        std::vector<Vec> pts;
        Vec w;
        for (int x : cell) {
            if (!(rho[x] > 0.0)) continue;
            Vec vx(L1, 0.0);
            for (int l = 0; l < L1; ++l)
                for (int a = 0; a < A; ++a) vx[l] += u[l][static_cast<std::size_t>(x) * A + a] * phi[x][a];
            ys.push_back(x);
            pts.push_back(std::move(vx));
            w.push_back(rho[x] / mass);
        }
        const CaratheodoryCertificate cert = caratheodory_reduce(pts, w);
        Dist nu(A, 0.0);
        for (std::size_t j = 0; j < cert.points.size(); ++j)
            for (int a = 0; a < A; ++a) nu[a] += cert.weights[j] * phi[ys[cert.points[j]]][a];
        double total = 0.0;
        for (double x : nu) total += x;
        for (double& x : nu) x /= total;
        for (int x : cell) out.strategy[x] = nu;
    }
    for (int l = 0; l < L1; ++l)
        out.residual = std::max(out.residual, std::abs(detail::integrate(u, l, phi, rho, A) -
                                                       detail::integrate(u, l, out.strategy, rho, A)));
    return out;
}

struct MarkovReplacement {
    MarkovStrategy strategy;
    /// I^l(phi_i) from eta
    Vec target;
    /// I^l of the replacement
    Vec achieved;
    double residual = 0.0;
    /// alpha^T 2b: cost of swapping the tail for any other fixed strategy
    double tail_bound = 0.0;
};

/**
 * Stages f^1..f^T, piecewise constant on the partition, that reproduce every
 * cost layer of phi_i when phi_i is kept as the tail. Opponents must be
 * piecewise constant and the game's data constant on cells.
 */
inline MarkovReplacement markov_replacement(const FiniteCSG& g, const Partition& part, int player,
                                            const StationaryProfile& others, const StationaryStrategy& phi, int T) {
    if (T < 1) throw std::invalid_argument("markov_replacement: horizon must be at least 1");
    if (part.num_points() != g.num_states) throw std::invalid_argument("markov_replacement: partition of another game");
    for (int j = 0; j < g.players(); ++j)
        if (j != player && !is_piecewise_constant(part, others.players.at(j)))
            throw std::invalid_argument("markov_replacement: opponent " + std::to_string(j) +
                                        " is not piecewise constant");
    const InducedMDP m = induced_mdp(g, player, others);
    const int S = m.num_states, A = m.num_actions;
    const std::vector<Vec> I = policy_values(m, phi);

    std::vector<Vec> u(m.num_layers, Vec(static_cast<std::size_t>(S) * A, 0.0));
    for (int l = 0; l < m.num_layers; ++l)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double cont = 0.0;
                for (int y = 0; y < S; ++y) cont += I[l][y] * m.p(s, a, y);
                u[l][static_cast<std::size_t>(s) * A + a] = (1.0 - m.alpha) * m.c(l, s, a) + m.alpha * cont;
            }

    MarkovReplacement out;
    out.strategy.player = player;
    out.strategy.tail = phi;
    Vec rho = m.eta;
    for (int t = 0; t < T; ++t) {
        StationaryStrategy f = cellwise_match(part, u, rho, phi, A).strategy;
        Vec next(S, 0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double w = rho[s] * f[s][a];
                if (w == 0.0) continue;
                for (int y = 0; y < S; ++y) next[y] += w * m.p(s, a, y);
            }
        rho = std::move(next);
        out.strategy.head.push_back(std::move(f));
    }

    out.target.assign(m.num_layers, 0.0);
    for (int l = 0; l < m.num_layers; ++l)
        for (int s = 0; s < S; ++s) out.target[l] += m.eta[s] * I[l][s];
    out.achieved = evaluate_markov(m, out.strategy).J;
    for (int l = 0; l < m.num_layers; ++l)
        out.residual = std::max(out.residual, std::abs(out.target[l] - out.achieved[l]));
    out.tail_bound = std::pow(m.alpha, T) * 2.0 * m.bound;
    return out;
}

// ---------------------------------------------------------------------------
// Occupation mixing

/// xi * a + (1 - xi) * b.
inline OccupationMeasure mix_occupations(const OccupationMeasure& a, const OccupationMeasure& b, double xi) {
    if (a.num_states != b.num_states || a.num_actions != b.num_actions || a.mass.size() != b.mass.size())
        throw std::invalid_argument("mix_occupations: measures belong to different decision processes");
    if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("mix_occupations: xi must lie in [0,1]");
    OccupationMeasure out = a;
    for (std::size_t k = 0; k < out.mass.size(); ++k) out.mass[k] = xi * a.mass[k] + (1.0 - xi) * b.mass[k];
    return out;
}

/// (eps + e) / (zeta + e).
inline double compute_xi(double eps, double excess, double zeta) {
    if (!(eps >= 0.0) || !(excess >= 0.0)) throw std::invalid_argument("compute_xi: eps and excess must be >= 0");
    if (!(zeta > eps)) throw std::invalid_argument("compute_xi: need zeta > eps");
    return (eps + excess) / (zeta + excess);
}

// ---------------------------------------------------------------------------
// Weight-function transformation

struct WesselsGame {
    Vec omega;
    double beta = 0.0;
    /// c0 with |c| <= c0 omega
    double c0 = 0.0;
    double eta_omega = 0.0;
    /// original states followed by the absorbing state at index S
    FiniteCSG transformed;

    int absorbing_state() const { return transformed.num_states - 1; }
};

/**
 * Rescales costs by 1/omega and kernels by omega(s')/(beta omega(s)); the
 * missing mass goes to a zero-cost absorbing state. Discount becomes
 * alpha beta and constraint bounds are mapped so that feasibility of a
 * profile is preserved.
 */
inline WesselsGame wessels_transform(const FiniteCSG& g, const Vec& omega, double beta,
                                     std::optional<double> c0 = std::nullopt) {
    const int S = g.num_states, P = g.num_profiles(), N = g.players();
    if (static_cast<int>(omega.size()) != S) throw std::invalid_argument("wessels_transform: one weight per state");
    if (!(beta > 1.0)) throw AssumptionViolation("wessels_transform: beta must exceed 1");
    if (!(g.alpha * beta < 1.0)) throw AssumptionViolation("wessels_transform: alpha * beta must be below 1");
    for (int s = 0; s < S; ++s)
        if (!(omega[s] >= 1.0) || !std::isfinite(omega[s]))
            throw AssumptionViolation("wessels_transform: omega(" + std::to_string(s) + ") must be >= 1");

    WesselsGame w;
    w.omega = omega;
    w.beta = beta;
    for (int s = 0; s < S; ++s) w.eta_omega += g.eta[s] * omega[s];

    double need = 0.0;
    for (int i = 0; i < N; ++i)
        for (int l = 0; l < g.num_layers; ++l)
            for (int s = 0; s < S; ++s)
                for (int p = 0; p < P; ++p) need = std::max(need, std::abs(g.c(i, l, s, p)) / omega[s]);
    if (c0) {
        for (int i = 0; i < N; ++i)
            for (int l = 0; l < g.num_layers; ++l)
                for (int s = 0; s < S; ++s)
                    for (int p = 0; p < P; ++p)
                        if (std::abs(g.c(i, l, s, p)) > *c0 * omega[s] * (1.0 + 1e-12))
                            throw AssumptionViolation("wessels_transform: cost bound violated at s=" +
                                                      std::to_string(s) +
                                                      " a=" + detail::profile_label(g.profiles, p));
        w.c0 = *c0;
    } else {
        w.c0 = need;
    }

    FiniteCSG& t = w.transformed;
    t = FiniteCSG::zeros(g.profiles.action_counts(), S + 1, g.num_layers, g.alpha * beta,
                         w.c0 > 0.0 ? w.c0 : 1.0);
    for (int s = 0; s < S; ++s) t.eta[s] = g.eta[s] * omega[s] / w.eta_omega;
    t.eta[S] = 0.0;
    const double scale = (1.0 - g.alpha * beta) / ((1.0 - g.alpha) * w.eta_omega);
    for (int i = 0; i < N; ++i)
        for (int l = 1; l < g.num_layers; ++l) t.kappa[i][l - 1] = g.kappa[i][l - 1] * scale;

    for (int s = 0; s < S; ++s)
        for (int p = 0; p < P; ++p) {
            double weighted = 0.0;
            for (int y = 0; y < S; ++y) weighted += omega[y] * g.p(s, p, y);
            if (weighted > beta * omega[s] * (1.0 + 1e-12))
                throw AssumptionViolation("wessels_transform: drift condition violated at s=" + std::to_string(s) +
                                          " a=" + detail::profile_label(g.profiles, p));
            double kept = 0.0;
            for (int y = 0; y < S; ++y) {
                const double q = omega[y] * g.p(s, p, y) / (beta * omega[s]);
                t.p_ref(s, p, y) = q;
                kept += q;
            }
            t.p_ref(s, p, S) = std::max(0.0, 1.0 - kept);
            for (int i = 0; i < N; ++i)
                for (int l = 0; l < g.num_layers; ++l) t.c_ref(i, l, s, p) = g.c(i, l, s, p) / omega[s];
        }
    for (int p = 0; p < P; ++p) t.p_ref(S, p, S) = 1.0;
    return w;
}

/// Profile on the transformed game: every player plays uniformly at the absorbing state.
inline StationaryProfile extend_profile(const FiniteCSG& g, const StationaryProfile& f) {
    StationaryProfile out = f;
    for (int i = 0; i < g.players(); ++i) out[i].rows.push_back(Dist(g.profiles.actions(i), 1.0 / g.profiles.actions(i)));
    return out;
}

struct WesselsCheck {
    /// transformed-game values rescaled to the original normalisation, [i][l]
    std::vector<Vec> transformed;
    /// J / (eta omega), [i][l]
    std::vector<Vec> expected;
    double max_abs_diff = 0.0;
    bool pass = false;
};

/**
 * Compares the transformed game's costs with J / (eta omega). Costs are
 * normalised by (1 - discount) in both games, so the transformed value is
 * multiplied by (1 - alpha) / (1 - alpha beta) before the comparison.
 */
inline WesselsCheck wessels_cost_relation(const FiniteCSG& g, const WesselsGame& w, const StationaryProfile& f,
                                          double tol = 1e-8) {
    const CostVector orig = evaluate_profile(g, f);
    const CostVector tr = evaluate_profile(w.transformed, extend_profile(g, f));
    const double rescale = (1.0 - g.alpha) / (1.0 - g.alpha * w.beta);
    WesselsCheck out;
    out.transformed.assign(g.players(), Vec(g.num_layers, 0.0));
    out.expected.assign(g.players(), Vec(g.num_layers, 0.0));
    for (int i = 0; i < g.players(); ++i)
        for (int l = 0; l < g.num_layers; ++l) {
            out.transformed[i][l] = tr.J[i][l] * rescale;
            out.expected[i][l] = orig.J[i][l] / w.eta_omega;
            out.max_abs_diff = std::max(out.max_abs_diff, std::abs(out.transformed[i][l] - out.expected[i][l]));
        }
    out.pass = out.max_abs_diff <= tol;
    return out;
}

}  // namespace csg

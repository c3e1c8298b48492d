#pragma once

// Discounted cost functionals J_i^l: exact linear-solve evaluation for
// stationary, correlated and head+tail Markov strategies, Monte Carlo
// simulation, and the single-player MDP induced by fixing the opponents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "csg/game_model.hpp"

namespace csg {

inline constexpr double kEvalResidualTol = 1e-10;

/// J[i][l] aggregated under eta, Jx[i][l][s] per initial state.
struct CostVector {
    std::vector<Vec> J;
    std::vector<std::vector<Vec>> Jx;
    double residual = 0.0;
};

/// Costs of a single player: J[l] and Jx[l][s].
struct PlayerCost {
    Vec J;
    std::vector<Vec> Jx;
};

/**
 * Decision process of one player when the others' joint action is drawn from
 * a fixed per-state law: costs and kernel are averaged over A_{-i}.
 */
struct InducedMDP {
    int player = 0;
    int num_states = 0;
    int num_actions = 0;
    int num_layers = 1;
    double alpha = 0.5;
    Vec eta;
    /// cost[l][s * A + a]
    std::vector<Vec> cost;
    /// q[(s * A + a) * S + next]
    Vec q;
    Vec kappa;
    double bound = 1.0;

    int num_constraints() const { return num_layers - 1; }
    double c(int l, int s, int a) const { return cost[l][static_cast<std::size_t>(s) * num_actions + a]; }
    double p(int s, int a, int next) const {
        return q[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
    }
};

namespace detail {

/// Solves (I - alpha P) V = (1 - alpha) C column-wise and checks the residual.
inline Eigen::MatrixXd discounted_solve(const Eigen::MatrixXd& P, const Eigen::MatrixXd& C, double alpha,
                                        double* residual_out = nullptr) {
    const Eigen::Index S = P.rows();
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - alpha * P;
    const Eigen::MatrixXd rhs = (1.0 - alpha) * C;
    Eigen::MatrixXd V = M.partialPivLu().solve(rhs);
    // one step of iterative refinement
    V += M.partialPivLu().solve(rhs - M * V);
    const double res = rhs.size() ? (M * V - rhs).cwiseAbs().maxCoeff() : 0.0;
    if (!(res <= kEvalResidualTol)) throw SolverError("discounted evaluation: residual above tolerance");
    if (residual_out) *residual_out = res;
    return V;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
template <class Rng>
double unit_uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int sample_index(std::span<const double> cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = static_cast<int>(it - cdf.begin());
    return std::min(k, static_cast<int>(cdf.size()) - 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact evaluation

inline CostVector evaluate_correlated(const FiniteCSG& g, const CorrelatedStrategy& psi) {
    check_correlated(g, psi);
    const int N = g.players(), S = g.num_states, P = g.num_profiles(), L1 = g.num_layers;
    Eigen::MatrixXd Pm = Eigen::MatrixXd::Zero(S, S);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(S, N * L1);
    for (int s = 0; s < S; ++s)
        for (int p = 0; p < P; ++p) {
            const double w = psi.rows[s][p];
            if (w == 0.0) continue;
            const auto row = g.row(s, p);
            for (int y = 0; y < S; ++y) Pm(s, y) += w * row[y];
            for (int i = 0; i < N; ++i)
                for (int l = 0; l < L1; ++l) C(s, i * L1 + l) += w * g.c(i, l, s, p);
        }
    CostVector out;
    const Eigen::MatrixXd V = detail::discounted_solve(Pm, C, g.alpha, &out.residual);
    out.J.assign(N, Vec(L1, 0.0));
    out.Jx.assign(N, std::vector<Vec>(L1, Vec(S, 0.0)));
    for (int i = 0; i < N; ++i)
        for (int l = 0; l < L1; ++l) {
            double agg = 0.0;
            for (int s = 0; s < S; ++s) {
                out.Jx[i][l][s] = V(s, i * L1 + l);
                agg += g.eta[s] * V(s, i * L1 + l);
            }
            out.J[i][l] = agg;
        }
    return out;
}

inline CostVector evaluate_profile(const FiniteCSG& g, const StationaryProfile& f) {
    return evaluate_correlated(g, product_strategy(g, f));
}

// ---------------------------------------------------------------------------
// Induced MDP

inline InducedMDP induced_mdp(const FiniteCSG& g, int player, const OthersLaw& others) {
    if (player < 0 || player >= g.players()) throw std::out_of_range("induced_mdp: player index out of range");
    if (others.excluded != player) throw std::invalid_argument("induced_mdp: law excludes a different player");
    const ProfileSpace& ps = g.profiles;
    const int S = g.num_states, A = ps.actions(player), O = ps.others_size(player);
    if (others.rows.size() != static_cast<std::size_t>(S))
        throw std::invalid_argument("induced_mdp: opponents' law has wrong number of states");
    InducedMDP m;
    m.player = player;
    m.num_states = S;
    m.num_actions = A;
    m.num_layers = g.num_layers;
    m.alpha = g.alpha;
    m.eta = g.eta;
    m.kappa = g.kappa[player];
    m.bound = g.bound;
    m.cost.assign(g.num_layers, Vec(static_cast<std::size_t>(S) * A, 0.0));
    m.q.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    for (int s = 0; s < S; ++s) {
        if (others.rows[s].size() != static_cast<std::size_t>(O))
            throw std::invalid_argument("induced_mdp: opponents' law row has wrong size");
        for (int o = 0; o < O; ++o) {
            const double w = others.rows[s][o];
            if (w == 0.0) continue;
            for (int a = 0; a < A; ++a) {
                const int p = ps.with_action(o, player, a);
                const std::size_t sa = static_cast<std::size_t>(s) * A + a;
                for (int l = 0; l < g.num_layers; ++l) m.cost[l][sa] += w * g.c(player, l, s, p);
                const auto row = g.row(s, p);
                for (int y = 0; y < S; ++y) m.q[sa * S + y] += w * row[y];
            }
        }
    }
    return m;
}

/// Opponents play their components of `f` independently; f[player] is ignored.
inline InducedMDP induced_mdp(const FiniteCSG& g, int player, const StationaryProfile& f) {
    if (player < 0 || player >= g.players()) throw std::out_of_range("induced_mdp: player index out of range");
    if (f.size() != static_cast<std::size_t>(g.players()))
        throw std::invalid_argument("induced_mdp: one strategy per player required");
    for (int j = 0; j < g.players(); ++j)
        if (j != player) check_strategy(f[j], g.num_states, g.profiles.actions(j), "induced_mdp");
    return induced_mdp(g, player, others_product(g.profiles, f, player));
}

inline Eigen::MatrixXd policy_kernel(const InducedMDP& m, const StationaryStrategy& sigma) {
    const int S = m.num_states, A = m.num_actions;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = sigma[s][a];
            if (w == 0.0) continue;
            for (int y = 0; y < S; ++y) P(s, y) += w * m.p(s, a, y);
        }
    return P;
}

inline Vec policy_cost(const InducedMDP& m, const StationaryStrategy& sigma, int layer) {
    Vec c(m.num_states, 0.0);
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) c[s] += sigma[s][a] * m.c(layer, s, a);
    return c;
}

/// Per-state values of every layer, values[l][s].
inline std::vector<Vec> policy_values(const InducedMDP& m, const StationaryStrategy& sigma) {
    check_strategy(sigma, m.num_states, m.num_actions, "policy_values");
    const int S = m.num_states;
    Eigen::MatrixXd C(S, m.num_layers);
    for (int l = 0; l < m.num_layers; ++l) {
        const Vec c = policy_cost(m, sigma, l);
        for (int s = 0; s < S; ++s) C(s, l) = c[s];
    }
    const Eigen::MatrixXd V = detail::discounted_solve(policy_kernel(m, sigma), C, m.alpha);
    std::vector<Vec> out(m.num_layers, Vec(S));
    for (int l = 0; l < m.num_layers; ++l)
        for (int s = 0; s < S; ++s) out[l][s] = V(s, l);
    return out;
}

inline PlayerCost evaluate_on_mdp(const InducedMDP& m, const StationaryStrategy& sigma) {
    PlayerCost out;
    out.Jx = policy_values(m, sigma);
    out.J.assign(m.num_layers, 0.0);
    for (int l = 0; l < m.num_layers; ++l)
        for (int s = 0; s < m.num_states; ++s) out.J[l] += m.eta[s] * out.Jx[l][s];
    return out;
}

/// Head strategies by backward recursion from the stationary tail's values.
inline PlayerCost evaluate_markov(const InducedMDP& m, const MarkovStrategy& strat) {
    if (strat.player != m.player) throw std::invalid_argument("evaluate_markov: strategy belongs to another player");
    PlayerCost out;
    out.Jx = policy_values(m, strat.tail);
    const int S = m.num_states, A = m.num_actions;
    for (std::size_t t = strat.head.size(); t-- > 0;) {
        const StationaryStrategy& f = strat.head[t];
        check_strategy(f, S, A, "evaluate_markov");
        for (int l = 0; l < m.num_layers; ++l) {
            Vec next(S, 0.0);
            for (int s = 0; s < S; ++s) {
                double v = 0.0;
                for (int a = 0; a < A; ++a) {
                    const double w = f[s][a];
                    if (w == 0.0) continue;
                    double cont = 0.0;
                    for (int y = 0; y < S; ++y) cont += m.p(s, a, y) * out.Jx[l][y];
                    v += w * ((1.0 - m.alpha) * m.c(l, s, a) + m.alpha * cont);
                }
                next[s] = v;
            }
            out.Jx[l] = std::move(next);
        }
    }
    out.J.assign(m.num_layers, 0.0);
    for (int l = 0; l < m.num_layers; ++l)
        for (int s = 0; s < S; ++s) out.J[l] += m.eta[s] * out.Jx[l][s];
    return out;
}

/// Player i's costs when i follows a Markov strategy and the others play f_{-i}.
inline PlayerCost evaluate_markov(const FiniteCSG& g, int player, const StationaryProfile& others,
                                  const MarkovStrategy& strat) {
    if (strat.player != player) throw std::invalid_argument("evaluate_markov: horizon/player mismatch");
    return evaluate_markov(induced_mdp(g, player, others), strat);
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct SimulationResult {
    int horizon = 0;
    double tolerance = 0.0;
    std::size_t trajectories = 0;
    std::uint64_t seed = 0;
    /// mean[i][l] of (1 - alpha) sum_{t <= T} alpha^{t-1} c
    std::vector<Vec> mean;
    std::vector<Vec> std_error;
    /// half-width of the 95% normal confidence interval, 1.96 standard errors
    std::vector<Vec> radius;
};

/// Smallest T with alpha^T * b <= tol * (1 - alpha).
inline int simulation_horizon(double alpha, double bound, double tol) {
    const double target = tol * (1.0 - alpha) / bound;
    if (target >= 1.0) return 1;
    return std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(alpha))));
}

/**
 * Estimates J under psi from n_traj truncated trajectories. Trajectory k draws
 * from its own generator seeded by (seed, k), so the output does not depend
 * on how trajectories are spread across threads.
 */
inline SimulationResult simulate(const FiniteCSG& g, const CorrelatedStrategy& psi, std::uint64_t seed,
                                 std::size_t n_traj, double tol, unsigned threads = 0) {
    check_correlated(g, psi);
    if (n_traj < 1) throw std::invalid_argument("simulate: at least one trajectory required");
    const int N = g.players(), S = g.num_states, P = g.num_profiles(), L1 = g.num_layers, K = N * L1;

    SimulationResult out;
    out.horizon = simulation_horizon(g.alpha, g.bound, tol);
    out.tolerance = tol;
    out.trajectories = n_traj;
    out.seed = seed;

    Vec eta_cdf(S), psi_cdf(static_cast<std::size_t>(S) * P), p_cdf(static_cast<std::size_t>(S) * P * S);
    std::partial_sum(g.eta.begin(), g.eta.end(), eta_cdf.begin());
    for (int s = 0; s < S; ++s) {
        std::partial_sum(psi.rows[s].begin(), psi.rows[s].end(), psi_cdf.begin() + static_cast<std::ptrdiff_t>(s) * P);
        for (int p = 0; p < P; ++p) {
            const auto row = g.row(s, p);
            std::partial_sum(row.begin(), row.end(),
                             p_cdf.begin() + (static_cast<std::ptrdiff_t>(s) * P + p) * S);
        }
    }

    std::vector<double> samples(n_traj * K, 0.0);
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(k)));
            double* acc = samples.data() + k * K;
            int s = detail::sample_index(eta_cdf, detail::unit_uniform(rng));
            double w = 1.0 - g.alpha;
            for (int t = 0; t < out.horizon; ++t) {
                const int p = detail::sample_index(
                    std::span<const double>(psi_cdf.data() + static_cast<std::size_t>(s) * P, P),
                    detail::unit_uniform(rng));
                for (int i = 0; i < N; ++i)
                    for (int l = 0; l < L1; ++l) acc[i * L1 + l] += w * g.c(i, l, s, p);
                s = detail::sample_index(
                    std::span<const double>(p_cdf.data() + (static_cast<std::size_t>(s) * P + p) * S, S),
                    detail::unit_uniform(rng));
                w *= g.alpha;
            }
        }
    };

    unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, n_traj));
    if (nt <= 1) {
        run(0, n_traj);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_traj + nt - 1) / nt;
        for (unsigned w = 0; w < nt; ++w) {
            const std::size_t b = w * chunk, e = std::min(n_traj, b + chunk);
            if (b < e) pool.emplace_back(run, b, e);
        }
        for (auto& th : pool) th.join();
    }

    out.mean.assign(N, Vec(L1, 0.0));
    out.std_error.assign(N, Vec(L1, 0.0));
    out.radius.assign(N, Vec(L1, 0.0));
    const double n = static_cast<double>(n_traj);
    for (int q = 0; q < K; ++q) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n_traj; ++k) sum += samples[k * K + q];
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t k = 0; k < n_traj; ++k) {
            const double d = samples[k * K + q] - mean;
            ss += d * d;
        }
        const double var = n_traj > 1 ? ss / (n - 1.0) : 0.0;
        out.mean[q / L1][q % L1] = mean;
        out.std_error[q / L1][q % L1] = std::sqrt(var / n);
        out.radius[q / L1][q % L1] = 1.96 * std::sqrt(var / n);
    }
    return out;
}

}  // namespace csg

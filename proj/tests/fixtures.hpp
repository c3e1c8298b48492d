#pragma once

// Small games with hand-derived values, plus random generators.

#include <random>

#include "csg/csg.hpp"

namespace fx {

using namespace csg;

/// One player, two states. s0: action 0 stays at cost 0, action 1 moves to
/// the absorbing s1 at cost 1; s1 costs 1 forever.
inline FiniteCSG g1() {
    FiniteCSG g = FiniteCSG::zeros({2}, 2, 1, 0.5);
    g.c_ref(0, 0, 0, 0) = 0.0;
    g.c_ref(0, 0, 0, 1) = 1.0;
    g.c_ref(0, 0, 1, 0) = 1.0;
    g.c_ref(0, 0, 1, 1) = 1.0;
    g.p_ref(0, 0, 0) = 1.0;
    g.p_ref(0, 1, 1) = 1.0;
    g.p_ref(1, 0, 1) = 1.0;
    g.p_ref(1, 1, 1) = 1.0;
    return g;
}

/// g1 with a constraint cost 1 on (s0, action 0) and bound 0.6.
inline FiniteCSG g2() {
    const FiniteCSG base = g1();
    FiniteCSG g = FiniteCSG::zeros({2}, 2, 2, 0.5);
    g.cost[0][0] = base.cost[0][0];
    g.transition = base.transition;
    g.c_ref(0, 1, 0, 0) = 1.0;
    g.kappa[0][0] = 0.6;
    return g;
}

/// Stationary strategy of g2 playing action 0 at s0 with probability q.
inline StationaryStrategy g2_strategy(double q) { return {{{q, 1.0 - q}, {0.5, 0.5}}}; }

inline double g2_objective(double q) { return (1.0 - q) / (1.0 - 0.5 * q); }
inline double g2_constraint(double q) { return 0.5 * q / (1.0 - 0.5 * q); }

/// Two decoupled copies of g2 on the product space; state = 2 * s_a + s_b.
inline FiniteCSG g3() {
    const FiniteCSG one = g2();
    FiniteCSG g = FiniteCSG::zeros({2, 2}, 4, 2, 0.5);
    for (int s = 0; s < 4; ++s) {
        const int sa = s / 2, sb = s % 2;
        for (int p = 0; p < 4; ++p) {
            const int a = g.profiles.action_of(p, 0), b = g.profiles.action_of(p, 1);
            for (int l = 0; l < 2; ++l) {
                g.c_ref(0, l, s, p) = one.c(0, l, sa, a);
                g.c_ref(1, l, s, p) = one.c(0, l, sb, b);
            }
            for (int y = 0; y < 4; ++y) g.p_ref(s, p, y) = one.p(sa, a, y / 2) * one.p(sb, b, y % 2);
        }
    }
    g.kappa = {{0.6}, {0.6}};
    return g;
}

/// Profile of g3 where the two players use g2_strategy(qa), g2_strategy(qb) on their own component.
inline StationaryProfile g3_profile(double qa, double qb) {
    StationaryProfile f;
    f.players.resize(2);
    for (int s = 0; s < 4; ++s) {
        f[0].rows.push_back(g2_strategy(qa)[s / 2]);
        f[1].rows.push_back(g2_strategy(qb)[s % 2]);
    }
    return f;
}

/// Two players, two actions each, all costs zero, one constraint layer with bound 0.
inline FiniteCSG zero_game() {
    FiniteCSG g = FiniteCSG::zeros({2, 2}, 2, 2, 0.5);
    for (int s = 0; s < 2; ++s)
        for (int p = 0; p < 4; ++p) {
            g.p_ref(s, p, 0) = 0.3 + 0.1 * p;
            g.p_ref(s, p, 1) = 0.7 - 0.1 * p;
        }
    return g;
}

/// Three states, one player; s2 has no initial mass and no incoming transitions.
inline FiniteCSG prop1_game() {
    FiniteCSG g = FiniteCSG::zeros({2}, 3, 1, 0.5);
    g.eta = {0.5, 0.5, 0.0};
    // s0: stay for free or pay 1 to move to s1
    g.c_ref(0, 0, 0, 0) = 0.0;
    g.p_ref(0, 0, 0) = 1.0;
    g.c_ref(0, 0, 0, 1) = 1.0;
    g.p_ref(0, 1, 1) = 1.0;
    // s1: pay 0.2 to return or 1 to stay
    g.c_ref(0, 0, 1, 0) = 0.2;
    g.p_ref(1, 0, 0) = 1.0;
    g.c_ref(0, 0, 1, 1) = 1.0;
    g.p_ref(1, 1, 1) = 1.0;
    // s2: both actions lead to s0; action 1 is the expensive one
    g.c_ref(0, 0, 2, 0) = 0.0;
    g.p_ref(2, 0, 0) = 1.0;
    g.c_ref(0, 0, 2, 1) = 1.0;
    g.p_ref(2, 1, 0) = 1.0;
    return g;
}

/// Optimal on the reachable states, deliberately wrong at s2.
inline StationaryProfile prop1_profile() { return {{{{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}}}}; }

/// 101 points on [0,1], costs x and x/2, x-independent uniform density.
inline ContinuousGameSpec linear_spec() {
    Vec pts;
    for (int k = 0; k <= 100; ++k) pts.push_back(k / 100.0);
    ContinuousGameSpec g = ContinuousGameSpec::zeros({2}, pts, 1, 0.5);
    for (int m = 0; m < g.num_points(); ++m) {
        g.c_ref(0, 0, m, 0) = pts[m];
        g.c_ref(0, 0, m, 1) = 0.5 * pts[m];
        for (int p = 0; p < 2; ++p)
            for (int y = 0; y < g.num_points(); ++y) g.delta_ref(m, p, y) = 1.0;
    }
    return g;
}

/// Data independent of x: a single cell covers the grid.
inline ContinuousGameSpec flat_spec() {
    Vec pts;
    for (int k = 0; k < 11; ++k) pts.push_back(k / 10.0);
    ContinuousGameSpec g = ContinuousGameSpec::zeros({2}, pts, 1, 0.5);
    for (int m = 0; m < g.num_points(); ++m)
        for (int p = 0; p < 2; ++p) {
            g.c_ref(0, 0, m, p) = p == 0 ? 0.25 : 0.75;
            for (int y = 0; y < g.num_points(); ++y) g.delta_ref(m, p, y) = y < 5 ? 1.5 : 0.5;
        }
    // renormalise the density against mu
    for (int m = 0; m < g.num_points(); ++m)
        for (int p = 0; p < 2; ++p) {
            double mass = 0.0;
            for (int y = 0; y < g.num_points(); ++y) mass += g.delta(m, p, y) * g.mu[y];
            for (int y = 0; y < g.num_points(); ++y) g.delta_ref(m, p, y) /= mass;
        }
    return g;
}

/// Two states with weights (1, 3), growth 2 and alpha 0.4; costs grow with the weight.
inline FiniteCSG wessels_game() {
    FiniteCSG g = FiniteCSG::zeros({2}, 2, 2, 0.4, 3.0);
    g.eta = {0.75, 0.25};
    g.c_ref(0, 0, 0, 0) = 1.0;
    g.c_ref(0, 0, 0, 1) = 0.5;
    g.c_ref(0, 0, 1, 0) = 3.0;
    g.c_ref(0, 0, 1, 1) = -2.0;
    g.c_ref(0, 1, 0, 0) = 0.0;
    g.c_ref(0, 1, 0, 1) = 1.0;
    g.c_ref(0, 1, 1, 0) = 2.0;
    g.c_ref(0, 1, 1, 1) = 0.0;
    g.p_ref(0, 0, 0) = 1.0;
    g.p_ref(0, 1, 0) = 0.5;
    g.p_ref(0, 1, 1) = 0.5;
    g.p_ref(1, 0, 0) = 0.3;
    g.p_ref(1, 0, 1) = 0.7;
    g.p_ref(1, 1, 1) = 1.0;
    g.kappa = {{1.0}};
    return g;
}

// ---------------------------------------------------------------------------
// Random instances

template <class Rng>
Dist random_dist(Rng& rng, int n) {
    std::exponential_distribution<double> e(1.0);
    Dist d(n);
    double s = 0.0;
    for (auto& x : d) s += (x = e(rng));
    for (auto& x : d) x /= s;
    return d;
}

/// Costs uniform on [-1, 1], Dirichlet kernel rows and initial law; kappa = 0.
template <class Rng>
FiniteCSG random_game(Rng& rng, std::vector<int> actions, int S, int layers, double alpha) {
    FiniteCSG g = FiniteCSG::zeros(std::move(actions), S, layers, alpha, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    g.eta = random_dist(rng, S);
    for (auto& blocks : g.cost)
        for (auto& tab : blocks)
            for (auto& c : tab) c = u(rng);
    for (int s = 0; s < S; ++s)
        for (int p = 0; p < g.num_profiles(); ++p) {
            const Dist d = random_dist(rng, S);
            for (int y = 0; y < S; ++y) g.p_ref(s, p, y) = d[y];
        }
    return g;
}

/// Sets every kappa to the constraint value of a random profile plus `slack`, so the bounds are attainable.
template <class Rng>
void attainable_kappa(Rng& rng, FiniteCSG& g, double slack) {
    const CostVector v = evaluate_profile(g, random_profile(rng, g));
    for (int i = 0; i < g.players(); ++i)
        for (int l = 1; l < g.num_layers; ++l) g.kappa[i][l - 1] = v.J[i][l] + slack;
}

/// Smooth random grid game on [0,1]: costs and log-densities are low-order trigonometric in x.
template <class Rng>
ContinuousGameSpec random_spec(Rng& rng, int M, std::vector<int> actions, int layers, double alpha) {
    Vec pts;
    for (int k = 0; k < M; ++k) pts.push_back(M == 1 ? 0.0 : static_cast<double>(k) / (M - 1));
    ContinuousGameSpec g = ContinuousGameSpec::zeros(std::move(actions), pts, layers, alpha, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    g.eta = random_dist(rng, M);
    const int P = g.num_profiles();
    for (int i = 0; i < g.players(); ++i)
        for (int l = 0; l < layers; ++l)
            for (int p = 0; p < P; ++p) {
                const double a = u(rng), b = u(rng), f = 1.0 + 3.0 * std::abs(u(rng));
                for (int m = 0; m < M; ++m) g.c_ref(i, l, m, p) = 0.5 * a + 0.5 * b * std::sin(f * pts[m]);
            }
    for (int p = 0; p < P; ++p) {
        const double a = u(rng), b = u(rng), c = u(rng);
        for (int m = 0; m < M; ++m) {
            double mass = 0.0;
            for (int y = 0; y < M; ++y) {
                const double d = std::exp(a * std::cos(3.0 * pts[y] + b * pts[m]) + c * pts[m] * pts[y]);
                g.delta_ref(m, p, y) = d;
                mass += d * g.mu[y];
            }
            for (int y = 0; y < M; ++y) g.delta_ref(m, p, y) /= mass;
        }
    }
    return g;
}

/// Random game with weights in [1, 4] satisfying the drift condition for growth beta.
struct WeightedGame {
    FiniteCSG game;
    Vec omega;
    double beta;
};

template <class Rng>
WeightedGame random_weighted_game(Rng& rng, std::vector<int> actions, int S, int layers) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double alpha = 0.2 + 0.6 * u01(rng);
    const double beta = 1.0 + (0.95 / alpha - 1.0) * (0.05 + 0.95 * u01(rng));
    FiniteCSG g = random_game(rng, std::move(actions), S, layers, alpha);
    Vec omega(S);
    for (auto& w : omega) w = 1.0 + 3.0 * u01(rng);
    double b = 0.0;
    for (int i = 0; i < g.players(); ++i)
        for (int l = 0; l < layers; ++l)
            for (int s = 0; s < S; ++s)
                for (int p = 0; p < g.num_profiles(); ++p) {
                    g.c_ref(i, l, s, p) *= omega[s];
                    b = std::max(b, std::abs(g.c(i, l, s, p)));
                }
    g.bound = b;
    // pull rows towards a self-loop until the weighted drift is at most beta * omega(s)
    for (int s = 0; s < S; ++s)
        for (int p = 0; p < g.num_profiles(); ++p) {
            double e = 0.0;
            for (int y = 0; y < S; ++y) e += omega[y] * g.p(s, p, y);
            if (e <= omega[s]) continue;
            const double lam = std::min(1.0, (beta - 1.0) * omega[s] / (e - omega[s]));
            for (int y = 0; y < S; ++y) g.p_ref(s, p, y) = lam * g.p(s, p, y) + (y == s ? 1.0 - lam : 0.0);
        }
    for (int i = 0; i < g.players(); ++i)
        for (int l = 1; l < layers; ++l) g.kappa[i][l - 1] = u01(rng);
    return {std::move(g), std::move(omega), beta};
}

}  // namespace fx

#pragma once

// Partitioning a grid state space into cells whose costs and transition
// densities stay within gamma of a representative, the piecewise-constant
// surrogate game built on those cells, and the certified error bound
// eps(gamma) = gamma (1 - alpha + b alpha) / (1 - alpha).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "csg/evaluation.hpp"

namespace csg {

struct Partition {
    /// gamma used for construction; 0 for partitions supplied by hand
    double gamma = 0.0;
    std::vector<std::vector<int>> cells;
    std::vector<int> representative;
    std::vector<int> cell_of;

    int num_cells() const { return static_cast<int>(cells.size()); }
    int num_points() const { return static_cast<int>(cell_of.size()); }
};

/// Partition from explicit cells; the first member of each cell is its representative.
inline Partition partition_from_cells(std::vector<std::vector<int>> cells, int num_points) {
    Partition part;
    part.cell_of.assign(num_points, -1);
    for (std::size_t n = 0; n < cells.size(); ++n) {
        if (cells[n].empty()) throw std::invalid_argument("partition_from_cells: empty cell");
        for (int x : cells[n]) {
            if (x < 0 || x >= num_points || part.cell_of[x] != -1)
                throw std::invalid_argument("partition_from_cells: cells must be disjoint and in range");
            part.cell_of[x] = static_cast<int>(n);
        }
        part.representative.push_back(cells[n].front());
    }
    for (int c : part.cell_of)
        if (c < 0) throw std::invalid_argument("partition_from_cells: cells must cover every point");
    part.cells = std::move(cells);
    return part;
}

struct DiscretizedGame {
    FiniteCSG surrogate;
    Partition partition;
    double eps_bound = 0.0;
};

inline double epsilon_of_gamma(double gamma, double alpha, double bound) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(gamma >= 0.0) || !(bound > 0.0))
        throw std::invalid_argument("epsilon_of_gamma: need 0 < alpha < 1, gamma >= 0, b > 0");
    return gamma * (1.0 - alpha + bound * alpha) / (1.0 - alpha);
}

inline double gamma_of_epsilon(double eps, double alpha, double bound) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(eps >= 0.0) || !(bound > 0.0))
        throw std::invalid_argument("gamma_of_epsilon: need 0 < alpha < 1, eps >= 0, b > 0");
    return eps * (1.0 - alpha) / (1.0 - alpha + bound * alpha);
}

/// max over profiles of the mu-weighted L1 distance between the density rows of x and y.
inline double density_distance(const ContinuousGameSpec& g, int x, int y) {
    double worst = 0.0;
    for (int p = 0; p < g.num_profiles(); ++p) {
        double d = 0.0;
        for (int z = 0; z < g.num_points(); ++z) d += std::abs(g.delta(x, p, z) - g.delta(y, p, z)) * g.mu[z];
        worst = std::max(worst, d);
    }
    return worst;
}

/// Sum over layers of the sup-norm distance between player i's cost rows at x and y.
inline double cost_distance(const ContinuousGameSpec& g, int player, int x, int y) {
    double total = 0.0;
    for (int l = 0; l < g.num_layers; ++l) {
        double worst = 0.0;
        for (int p = 0; p < g.num_profiles(); ++p)
            worst = std::max(worst, std::abs(g.c(player, l, x, p) - g.c(player, l, y, p)));
        total += worst;
    }
    return total;
}

inline bool within_gamma(const ContinuousGameSpec& g, int x, int rep, double gamma) {
    if (!(density_distance(g, x, rep) < gamma)) return false;
    for (int i = 0; i < g.players(); ++i)
        if (!(cost_distance(g, i, x, rep) < gamma)) return false;
    return true;
}

/**
 * Greedy first-fit covering in grid order: each point joins the first cell
 * whose representative is strictly within gamma in both the density and the
 * cost sense, otherwise it opens a new cell and becomes its representative.
 */
inline Partition build_partition(const ContinuousGameSpec& g, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("build_partition: gamma must be positive");
    Partition part;
    part.gamma = gamma;
    part.cell_of.assign(g.num_points(), -1);
    for (int x = 0; x < g.num_points(); ++x) {
        for (int n = 0; n < part.num_cells(); ++n)
            if (within_gamma(g, x, part.representative[n], gamma)) {
                part.cells[n].push_back(x);
                part.cell_of[x] = n;
                break;
            }
        if (part.cell_of[x] < 0) {
            part.cell_of[x] = part.num_cells();
            part.cells.push_back({x});
            part.representative.push_back(x);
        }
    }
    return part;
}

/// Re-checks disjointness, coverage and the strict gamma conditions of every cell.
inline ValidationReport check_partition(const ContinuousGameSpec& g, const Partition& part) {
    ValidationReport r;
    std::vector<int> seen(g.num_points(), 0);
    if (part.num_points() != g.num_points()) r.add("partition", "cell_of", "wrong number of points");
    for (int n = 0; n < part.num_cells(); ++n) {
        for (int x : part.cells[n]) {
            if (x < 0 || x >= g.num_points()) {
                r.add("partition", "cell " + std::to_string(n), "point out of range");
                continue;
            }
            ++seen[x];
            if (part.cell_of[x] != n) r.add("partition", "x=" + std::to_string(x), "cell_of disagrees with cells");
            if (part.gamma > 0.0 && !within_gamma(g, x, part.representative[n], part.gamma))
                r.add("gamma", "x=" + std::to_string(x), "point not within gamma of its representative");
        }
    }
    for (int x = 0; x < g.num_points(); ++x)
        if (seen[x] != 1) r.add("partition", "x=" + std::to_string(x), "point not covered exactly once");
    return r;
}

/// The grid game itself: p(y | x, a) = density(x, y, a) mu(y).
inline FiniteCSG grid_game(const ContinuousGameSpec& g) {
    FiniteCSG out = FiniteCSG::zeros(g.profiles.action_counts(), g.num_points(), g.num_layers, g.alpha, g.bound);
    out.eta = g.eta;
    out.cost = g.cost;
    out.kappa = g.kappa;
    for (int x = 0; x < g.num_points(); ++x)
        for (int p = 0; p < g.num_profiles(); ++p)
            for (int y = 0; y < g.num_points(); ++y) out.p_ref(x, p, y) = g.delta(x, p, y) * g.mu[y];
    return out;
}

/// Grid game whose data at every point is copied from its cell representative.
inline FiniteCSG representative_grid_game(const ContinuousGameSpec& g, const Partition& part) {
    FiniteCSG out = FiniteCSG::zeros(g.profiles.action_counts(), g.num_points(), g.num_layers, g.alpha, g.bound);
    out.eta = g.eta;
    out.kappa = g.kappa;
    for (int x = 0; x < g.num_points(); ++x) {
        const int rep = part.representative[part.cell_of[x]];
        for (int p = 0; p < g.num_profiles(); ++p) {
            for (int i = 0; i < g.players(); ++i)
                for (int l = 0; l < g.num_layers; ++l) out.c_ref(i, l, x, p) = g.c(i, l, rep, p);
            for (int y = 0; y < g.num_points(); ++y) out.p_ref(x, p, y) = g.delta(rep, p, y) * g.mu[y];
        }
    }
    return out;
}

/// Surrogate game on cell indices: representative costs, cellwise-aggregated transition mass.
inline DiscretizedGame surrogate_game(const ContinuousGameSpec& g, const Partition& part) {
    if (part.num_points() != g.num_points()) throw std::invalid_argument("surrogate_game: partition of another grid");
    const int C = part.num_cells(), P = g.num_profiles();
    DiscretizedGame d;
    d.partition = part;
    d.surrogate = FiniteCSG::zeros(g.profiles.action_counts(), C, g.num_layers, g.alpha, g.bound);
    FiniteCSG& s = d.surrogate;
    s.kappa = g.kappa;
    for (int n = 0; n < C; ++n) {
        double mass = 0.0;
        for (int x : part.cells[n]) mass += g.eta[x];
        s.eta[n] = mass;
        const int rep = part.representative[n];
        for (int p = 0; p < P; ++p) {
            for (int i = 0; i < g.players(); ++i)
                for (int l = 0; l < g.num_layers; ++l) s.c_ref(i, l, n, p) = g.c(i, l, rep, p);
            double row = 0.0;
            for (int tau = 0; tau < C; ++tau) {
                double m = 0.0;
                for (int y : part.cells[tau]) m += g.delta(rep, p, y) * g.mu[y];
                s.p_ref(n, p, tau) = m;
                row += m;
            }
            if (std::abs(row - 1.0) > 1e-9)
                throw std::invalid_argument("surrogate_game: density of representative " + std::to_string(rep) +
                                            " does not integrate to 1");
        }
    }
    d.eps_bound = epsilon_of_gamma(part.gamma, g.alpha, g.bound);
    return d;
}

/// Piecewise-constant extension of a cell strategy to the grid.
inline StationaryProfile lift_strategy(const Partition& part, const StationaryProfile& f) {
    StationaryProfile out;
    for (const auto& fi : f.players) {
        if (fi.num_states() != static_cast<std::size_t>(part.num_cells()))
            throw std::invalid_argument("lift_strategy: strategy not defined on the cells");
        StationaryStrategy lifted;
        for (int x = 0; x < part.num_points(); ++x) lifted.rows.push_back(fi[part.cell_of[x]]);
        out.players.push_back(std::move(lifted));
    }
    return out;
}

inline bool is_piecewise_constant(const Partition& part, const StationaryStrategy& s, double tol = 1e-12) {
    for (const auto& cell : part.cells)
        for (int x : cell)
            for (std::size_t a = 0; a < s[x].size(); ++a)
                if (std::abs(s[x][a] - s[cell.front()][a]) > tol) return false;
    return true;
}

/// Cell strategy read off a piecewise-constant grid strategy.
inline StationaryProfile restrict_to_cells(const Partition& part, const StationaryProfile& f) {
    StationaryProfile out;
    for (const auto& fi : f.players) {
        StationaryStrategy r;
        for (int n = 0; n < part.num_cells(); ++n) r.rows.push_back(fi[part.representative[n]]);
        out.players.push_back(std::move(r));
    }
    return out;
}

struct ApproximationReport {
    double bound = 0.0;
    double max_deviation = 0.0;
    /// largest |J^gamma(phi)(x) - surrogate J(f)(cell(x))| over piecewise-constant samples
    double max_lift_residual = 0.0;
    std::size_t strategies = 0;
    std::size_t piecewise_constant = 0;
    bool flagged = false;
};

/**
 * Evaluates every sampled grid profile in the original grid game and in the
 * representative grid game and records the largest per-point difference over
 * players and layers; flags the report if it exceeds eps(gamma) + 1e-8.
 * Piecewise-constant samples are additionally compared with the surrogate
 * game on cells.
 */
inline ApproximationReport verify_approximation_bound(const ContinuousGameSpec& g, const Partition& part,
                                                      const std::vector<StationaryProfile>& sample) {
    if (sample.empty()) throw std::invalid_argument("verify_approximation_bound: sample is empty");
    ApproximationReport rep;
    rep.bound = epsilon_of_gamma(part.gamma, g.alpha, g.bound);
    const FiniteCSG original = grid_game(g);
    const FiniteCSG approx = representative_grid_game(g, part);
    const DiscretizedGame disc = surrogate_game(g, part);
    for (const auto& f : sample) {
        const CostVector a = evaluate_profile(original, f);
        const CostVector b = evaluate_profile(approx, f);
        for (int i = 0; i < g.players(); ++i)
            for (int l = 0; l < g.num_layers; ++l)
                for (int x = 0; x < g.num_points(); ++x)
                    rep.max_deviation = std::max(rep.max_deviation, std::abs(a.Jx[i][l][x] - b.Jx[i][l][x]));
        ++rep.strategies;
        bool pc = true;
        for (const auto& fi : f.players) pc = pc && is_piecewise_constant(part, fi);
        if (pc) {
            ++rep.piecewise_constant;
            const CostVector hat = evaluate_profile(disc.surrogate, restrict_to_cells(part, f));
            for (int i = 0; i < g.players(); ++i)
                for (int l = 0; l < g.num_layers; ++l)
                    for (int x = 0; x < g.num_points(); ++x)
                        rep.max_lift_residual = std::max(
                            rep.max_lift_residual, std::abs(b.Jx[i][l][x] - hat.Jx[i][l][part.cell_of[x]]));
        }
    }
    rep.flagged = rep.max_deviation > rep.bound + 1e-8;
    return rep;
}

}  // namespace csg

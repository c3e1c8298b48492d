#pragma once

// Finite constrained stochastic games, the strategy classes used across the
// library, and the grid representation of continuous-state games.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csg {

using Vec = std::vector<double>;
/// Probability vector over a finite set.
using Dist = std::vector<double>;

/// Thrown when a numerical routine cannot deliver a result within its
/// residual contract.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kStochasticTol = 1e-12;

/**
 * Enumeration of joint action profiles A = A_1 x ... x A_N.
 *
 * Profiles are numbered row-major over (a_1, ..., a_N): player 0 is the most
 * significant digit. Every module indexes profiles through this class.
 * The others-index of a profile (its projection onto A_{-i}) uses the same
 * row-major order over the remaining players.
 */
class ProfileSpace {
public:
    ProfileSpace() = default;

    explicit ProfileSpace(std::vector<int> action_counts) : counts_(std::move(action_counts)) {
        if (counts_.empty())
            throw std::invalid_argument("ProfileSpace: at least one player required");
        stride_.assign(counts_.size(), 1);
        size_ = 1;
        for (std::size_t k = counts_.size(); k-- > 0;) {
            if (counts_[k] < 1)
                throw std::invalid_argument("ProfileSpace: every player needs at least one action");
            stride_[k] = size_;
            size_ *= counts_[k];
        }
    }

    int players() const { return static_cast<int>(counts_.size()); }
    int actions(int player) const { return counts_.at(player); }
    const std::vector<int>& action_counts() const { return counts_; }
    int size() const { return size_; }

    int index(std::span<const int> actions) const {
        if (actions.size() != counts_.size())
            throw std::invalid_argument("ProfileSpace::index: wrong number of actions");
        int p = 0;
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            if (actions[k] < 0 || actions[k] >= counts_[k])
                throw std::out_of_range("ProfileSpace::index: action out of range");
            p += actions[k] * stride_[k];
        }
        return p;
    }

    std::vector<int> decode(int profile) const {
        std::vector<int> out(counts_.size());
        for (std::size_t k = 0; k < counts_.size(); ++k)
            out[k] = (profile / stride_[k]) % counts_[k];
        return out;
    }

    int action_of(int profile, int player) const {
        return (profile / stride_[player]) % counts_[player];
    }

    int others_size(int player) const { return size_ / counts_.at(player); }

    int others_index(int profile, int player) const {
        const int s = stride_[player];
        const int high = profile / (s * counts_[player]);
        return high * s + profile % s;
    }

    /// Profile made of the others-index `others` with player's action `a` inserted.
    int with_action(int others, int player, int a) const {
        const int s = stride_[player];
        return ((others / s) * counts_[player] + a) * s + others % s;
    }

    bool operator==(const ProfileSpace& o) const { return counts_ == o.counts_; }

private:
    std::vector<int> counts_;
    std::vector<int> stride_;
    int size_ = 0;
};

/**
 * Complete finite constrained discounted stochastic game.
 *
 * Layer 0 of the cost tables is the objective; layers 1..L are constraint
 * costs bounded by kappa[i][l-1]. Unconstrained games have num_layers == 1.
 */
struct FiniteCSG {
    ProfileSpace profiles;
    int num_states = 0;
    int num_layers = 1;
    double alpha = 0.5;
    Vec eta;
    /// cost[i][l][s * P + profile]
    std::vector<std::vector<Vec>> cost;
    /// transition[(s * P + profile) * S + next]
    Vec transition;
    /// kappa[i][l - 1] for constraint layers l = 1..L
    std::vector<Vec> kappa;
    double bound = 1.0;

    int players() const { return profiles.players(); }
    int num_profiles() const { return profiles.size(); }
    int num_constraints() const { return num_layers - 1; }

    double c(int i, int l, int s, int profile) const {
        return cost[i][l][static_cast<std::size_t>(s) * num_profiles() + profile];
    }
    double p(int s, int profile, int next) const {
        return transition[(static_cast<std::size_t>(s) * num_profiles() + profile) * num_states + next];
    }
    std::span<const double> row(int s, int profile) const {
        return {transition.data() + (static_cast<std::size_t>(s) * num_profiles() + profile) * num_states,
                static_cast<std::size_t>(num_states)};
    }

    /// Zero-initialized game of the given shape.
    static FiniteCSG zeros(std::vector<int> action_counts, int num_states, int num_layers, double alpha,
                           double bound = 1.0) {
        FiniteCSG g;
        g.profiles = ProfileSpace(std::move(action_counts));
        g.num_states = num_states;
        g.num_layers = num_layers;
        g.alpha = alpha;
        g.bound = bound;
        g.eta.assign(num_states, 0.0);
        if (num_states > 0) g.eta[0] = 1.0;
        const std::size_t sp = static_cast<std::size_t>(num_states) * g.num_profiles();
        g.cost.assign(g.players(), std::vector<Vec>(num_layers, Vec(sp, 0.0)));
        g.transition.assign(sp * num_states, 0.0);
        g.kappa.assign(g.players(), Vec(num_layers - 1, 0.0));
        return g;
    }

    double& c_ref(int i, int l, int s, int profile) {
        return cost[i][l][static_cast<std::size_t>(s) * num_profiles() + profile];
    }
    double& p_ref(int s, int profile, int next) {
        return transition[(static_cast<std::size_t>(s) * num_profiles() + profile) * num_states + next];
    }
};

/// Per-state action distributions of one player.
struct StationaryStrategy {
    std::vector<Dist> rows;

    std::size_t num_states() const { return rows.size(); }
    const Dist& operator[](std::size_t s) const { return rows[s]; }
    Dist& operator[](std::size_t s) { return rows[s]; }
    bool operator==(const StationaryStrategy&) const = default;
};

/// One stationary strategy per player.
struct StationaryProfile {
    std::vector<StationaryStrategy> players;

    std::size_t size() const { return players.size(); }
    const StationaryStrategy& operator[](std::size_t i) const { return players[i]; }
    StationaryStrategy& operator[](std::size_t i) { return players[i]; }
    bool operator==(const StationaryProfile&) const = default;
};

/// Nonstationary strategy: head[t] is used at stage t + 1, the tail forever after.
struct MarkovStrategy {
    int player = 0;
    std::vector<StationaryStrategy> head;
    StationaryStrategy tail;

    std::size_t horizon() const { return head.size(); }
};

/// Per-state distribution over joint action profiles.
struct CorrelatedStrategy {
    std::vector<Dist> rows;
    bool operator==(const CorrelatedStrategy&) const = default;
};

/// Per-state distribution over A_{-i} for a fixed excluded player.
struct OthersLaw {
    int excluded = 0;
    std::vector<Dist> rows;
};

/**
 * Grid representation of a continuous-state game: the reference measure mu is
 * replaced by weights on grid points and the transition law is a density
 * table against those weights, p(m' | m, a) = density(m, m', a) * mu[m'].
 */
struct ContinuousGameSpec {
    ProfileSpace profiles;
    Vec points;
    Vec mu;
    int num_layers = 1;
    double alpha = 0.5;
    Vec eta;
    /// density[(m * P + profile) * M + m']
    Vec density;
    /// cost[i][l][m * P + profile]
    std::vector<std::vector<Vec>> cost;
    std::vector<Vec> kappa;
    double bound = 1.0;

    int players() const { return profiles.players(); }
    int num_points() const { return static_cast<int>(points.size()); }
    int num_profiles() const { return profiles.size(); }

    double delta(int m, int profile, int next) const {
        return density[(static_cast<std::size_t>(m) * num_profiles() + profile) * num_points() + next];
    }
    double& delta_ref(int m, int profile, int next) {
        return density[(static_cast<std::size_t>(m) * num_profiles() + profile) * num_points() + next];
    }
    double c(int i, int l, int m, int profile) const {
        return cost[i][l][static_cast<std::size_t>(m) * num_profiles() + profile];
    }
    double& c_ref(int i, int l, int m, int profile) {
        return cost[i][l][static_cast<std::size_t>(m) * num_profiles() + profile];
    }

    static ContinuousGameSpec zeros(std::vector<int> action_counts, Vec points, int num_layers, double alpha,
                                    double bound = 1.0) {
        ContinuousGameSpec g;
        g.profiles = ProfileSpace(std::move(action_counts));
        g.points = std::move(points);
        const int m = g.num_points();
        g.mu.assign(m, m > 0 ? 1.0 / m : 0.0);
        g.num_layers = num_layers;
        g.alpha = alpha;
        g.bound = bound;
        g.eta.assign(m, 0.0);
        if (m > 0) g.eta[0] = 1.0;
        const std::size_t mp = static_cast<std::size_t>(m) * g.num_profiles();
        g.density.assign(mp * m, 0.0);
        g.cost.assign(g.players(), std::vector<Vec>(num_layers, Vec(mp, 0.0)));
        g.kappa.assign(g.players(), Vec(num_layers - 1, 0.0));
        return g;
    }
};

// ---------------------------------------------------------------------------
// Validation

struct Finding {
    std::string code;
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
    void add(std::string code, std::string location, std::string message) {
        findings.push_back({std::move(code), std::move(location), std::move(message)});
    }
    std::string summary() const {
        std::ostringstream os;
        for (const auto& f : findings) os << f.code << " at " << f.location << ": " << f.message << "\n";
        return os.str();
    }
};

namespace detail {

inline std::string profile_label(const ProfileSpace& ps, int profile) {
    std::ostringstream os;
    os << "(";
    const auto a = ps.decode(profile);
    for (std::size_t k = 0; k < a.size(); ++k) os << (k ? "," : "") << a[k];
    os << ")";
    return os.str();
}

inline void check_distribution(ValidationReport& r, std::span<const double> d, const std::string& code,
                               const std::string& where, double tol) {
    double sum = 0.0;
    for (double x : d) {
        if (!(x >= -tol) || !std::isfinite(x)) {
            r.add(code, where, "negative or non-finite entry");
            return;
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol) {
        std::ostringstream os;
        os.precision(17);
        os << "entries sum to " << sum;
        r.add(code, where, os.str());
    }
}

}  // namespace detail

/// Lists every violated model invariant; an empty report means the game is well formed.
inline ValidationReport validate_game(const FiniteCSG& g, double tol = kStochasticTol) {
    ValidationReport r;
    const int N = g.players(), S = g.num_states, P = g.num_profiles();
    if (S < 1) r.add("shape", "states", "at least one state required");
    if (g.num_layers < 1) r.add("shape", "layers", "at least the objective layer required");
    if (!(g.alpha > 0.0 && g.alpha < 1.0)) r.add("discount", "alpha", "discount must lie in (0,1)");
    if (!(g.bound > 0.0)) r.add("bound", "b", "cost bound must be positive");
    if (!r.ok()) return r;

    const std::size_t sp = static_cast<std::size_t>(S) * P;
    if (g.eta.size() != static_cast<std::size_t>(S))
        r.add("shape", "eta", "initial distribution has wrong length");
    else
        detail::check_distribution(r, g.eta, "initial", "eta", tol);

    if (g.transition.size() != sp * S) {
        r.add("shape", "transition", "transition table has wrong size");
    } else {
        for (int s = 0; s < S; ++s)
            for (int p = 0; p < P; ++p)
                detail::check_distribution(r, g.row(s, p), "stochastic",
                                           "s=" + std::to_string(s) + " a=" + detail::profile_label(g.profiles, p),
                                           tol);
    }

    if (g.cost.size() != static_cast<std::size_t>(N)) {
        r.add("shape", "cost", "one cost block per player required");
    } else {
        for (int i = 0; i < N; ++i) {
            if (g.cost[i].size() != static_cast<std::size_t>(g.num_layers)) {
                r.add("shape", "cost[" + std::to_string(i) + "]", "wrong number of layers");
                continue;
            }
            for (int l = 0; l < g.num_layers; ++l) {
                if (g.cost[i][l].size() != sp) {
                    r.add("shape", "cost[" + std::to_string(i) + "][" + std::to_string(l) + "]", "wrong size");
                    continue;
                }
                for (int s = 0; s < S; ++s)
                    for (int p = 0; p < P; ++p) {
                        const double v = g.c(i, l, s, p);
                        if (!std::isfinite(v) || std::abs(v) > g.bound * (1.0 + tol)) {
                            std::ostringstream os;
                            os.precision(17);
                            os << "|c| = " << std::abs(v) << " exceeds b = " << g.bound;
                            r.add("cost_bound",
                                  "i=" + std::to_string(i) + " l=" + std::to_string(l) + " s=" + std::to_string(s) +
                                      " a=" + detail::profile_label(g.profiles, p),
                                  os.str());
                        }
                    }
            }
        }
    }

    if (g.kappa.size() != static_cast<std::size_t>(N)) {
        r.add("shape", "kappa", "one bound vector per player required");
    } else {
        for (int i = 0; i < N; ++i)
            if (g.kappa[i].size() != static_cast<std::size_t>(g.num_layers - 1))
                r.add("shape", "kappa[" + std::to_string(i) + "]", "one bound per constraint layer required");
    }
    return r;
}

inline ValidationReport validate_spec(const ContinuousGameSpec& g, double tol = 1e-9) {
    ValidationReport r;
    const int N = g.players(), M = g.num_points(), P = g.num_profiles();
    if (M < 1) r.add("shape", "grid", "at least one grid point required");
    if (!(g.alpha > 0.0 && g.alpha < 1.0)) r.add("discount", "alpha", "discount must lie in (0,1)");
    if (!(g.bound > 0.0)) r.add("bound", "b", "cost bound must be positive");
    if (g.num_layers < 1) r.add("shape", "layers", "at least the objective layer required");
    if (!r.ok()) return r;
    const std::size_t mp = static_cast<std::size_t>(M) * P;
    if (g.mu.size() != static_cast<std::size_t>(M))
        r.add("shape", "mu", "weights have wrong length");
    else
        detail::check_distribution(r, g.mu, "weights", "mu", tol);
    if (g.eta.size() != static_cast<std::size_t>(M))
        r.add("shape", "eta", "initial distribution has wrong length");
    else
        detail::check_distribution(r, g.eta, "initial", "eta", tol);
    if (g.density.size() != mp * M) {
        r.add("shape", "density", "density table has wrong size");
    } else if (r.ok()) {
        for (int m = 0; m < M; ++m)
            for (int p = 0; p < P; ++p) {
                double mass = 0.0;
                bool neg = false;
                for (int y = 0; y < M; ++y) {
                    const double d = g.delta(m, p, y);
                    neg = neg || !(d >= 0.0) || !std::isfinite(d);
                    mass += d * g.mu[y];
                }
                const std::string where = "x=" + std::to_string(m) + " a=" + detail::profile_label(g.profiles, p);
                if (neg) r.add("density", where, "negative or non-finite density");
                if (std::abs(mass - 1.0) > tol) r.add("density", where, "density does not integrate to 1");
            }
    }
    if (g.cost.size() != static_cast<std::size_t>(N)) {
        r.add("shape", "cost", "one cost block per player required");
    } else {
        for (int i = 0; i < N; ++i) {
            if (g.cost[i].size() != static_cast<std::size_t>(g.num_layers)) {
                r.add("shape", "cost[" + std::to_string(i) + "]", "wrong number of layers");
                continue;
            }
            for (int l = 0; l < g.num_layers; ++l) {
                if (g.cost[i][l].size() != mp) {
                    r.add("shape", "cost", "wrong size");
                    continue;
                }
                for (double v : g.cost[i][l])
                    if (!std::isfinite(v) || std::abs(v) > g.bound * (1.0 + kStochasticTol)) {
                        r.add("cost_bound", "i=" + std::to_string(i) + " l=" + std::to_string(l),
                              "cost exceeds declared bound");
                        break;
                    }
            }
        }
    }
    if (g.kappa.size() != static_cast<std::size_t>(N))
        r.add("shape", "kappa", "one bound vector per player required");
    else
        for (int i = 0; i < N; ++i)
            if (g.kappa[i].size() != static_cast<std::size_t>(g.num_layers - 1))
                r.add("shape", "kappa[" + std::to_string(i) + "]", "one bound per constraint layer required");
    return r;
}

/// Largest absolute cost entry.
inline double cost_bound(const FiniteCSG& g) {
    double b = 0.0;
    for (const auto& layers : g.cost)
        for (const auto& tab : layers)
            for (double v : tab) b = std::max(b, std::abs(v));
    return b;
}

// ---------------------------------------------------------------------------
// Strategy helpers

inline bool is_distribution(std::span<const double> d, double tol = 1e-9) {
    double sum = 0.0;
    for (double x : d) {
        if (!(x >= -tol)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

inline StationaryStrategy uniform_strategy(int num_states, int num_actions) {
    return {std::vector<Dist>(num_states, Dist(num_actions, 1.0 / num_actions))};
}

inline StationaryStrategy deterministic_strategy(std::span<const int> choice, int num_actions) {
    StationaryStrategy s;
    for (int a : choice) {
        Dist d(num_actions, 0.0);
        d.at(a) = 1.0;
        s.rows.push_back(std::move(d));
    }
    return s;
}

inline StationaryStrategy constant_strategy(int num_states, Dist d) {
    return {std::vector<Dist>(num_states, std::move(d))};
}

/// Uniformly random point of the simplex (flat Dirichlet) per state.
template <class Rng>
StationaryStrategy random_strategy(Rng& rng, int num_states, int num_actions) {
    std::exponential_distribution<double> expo(1.0);
    StationaryStrategy s;
    s.rows.resize(num_states);
    for (auto& row : s.rows) {
        row.resize(num_actions);
        double sum = 0.0;
        for (auto& x : row) sum += (x = expo(rng));
        for (auto& x : row) x /= sum;
    }
    return s;
}

inline StationaryProfile uniform_profile(const FiniteCSG& g) {
    StationaryProfile f;
    for (int i = 0; i < g.players(); ++i)
        f.players.push_back(uniform_strategy(g.num_states, g.profiles.actions(i)));
    return f;
}

template <class Rng>
StationaryProfile random_profile(Rng& rng, const FiniteCSG& g) {
    StationaryProfile f;
    for (int i = 0; i < g.players(); ++i)
        f.players.push_back(random_strategy(rng, g.num_states, g.profiles.actions(i)));
    return f;
}

/// Convex combination (1 - w) * a + w * b, rowwise.
inline StationaryStrategy blend(const StationaryStrategy& a, const StationaryStrategy& b, double w) {
    StationaryStrategy out = a;
    for (std::size_t s = 0; s < out.rows.size(); ++s)
        for (std::size_t k = 0; k < out.rows[s].size(); ++k)
            out.rows[s][k] = (1.0 - w) * a.rows[s][k] + w * b.rows.at(s).at(k);
    return out;
}

inline void check_strategy(const StationaryStrategy& s, int num_states, int num_actions, const char* what) {
    if (s.rows.size() != static_cast<std::size_t>(num_states))
        throw std::invalid_argument(std::string(what) + ": strategy has wrong number of states");
    for (const auto& row : s.rows) {
        if (row.size() != static_cast<std::size_t>(num_actions))
            throw std::invalid_argument(std::string(what) + ": strategy row has wrong number of actions");
        if (!is_distribution(row))
            throw std::invalid_argument(std::string(what) + ": strategy row is not a probability vector");
    }
}

inline void check_profile(const FiniteCSG& g, const StationaryProfile& f) {
    if (f.size() != static_cast<std::size_t>(g.players()))
        throw std::invalid_argument("profile: one strategy per player required");
    for (int i = 0; i < g.players(); ++i) check_strategy(f[i], g.num_states, g.profiles.actions(i), "profile");
}

inline void check_correlated(const FiniteCSG& g, const CorrelatedStrategy& psi) {
    if (psi.rows.size() != static_cast<std::size_t>(g.num_states))
        throw std::invalid_argument("correlated strategy: wrong number of states");
    for (const auto& row : psi.rows)
        if (row.size() != static_cast<std::size_t>(g.num_profiles()) || !is_distribution(row))
            throw std::invalid_argument("correlated strategy: rows must be distributions over joint profiles");
}

/// psi[s][a] = prod_i phi[i][s][a_i].
inline CorrelatedStrategy product_strategy(const ProfileSpace& ps, const StationaryProfile& f) {
    if (f.size() != static_cast<std::size_t>(ps.players()))
        throw std::invalid_argument("product_strategy: one strategy per player required");
    const std::size_t S = f[0].num_states();
    for (int i = 0; i < ps.players(); ++i) {
        if (f[i].num_states() != S)
            throw std::invalid_argument("product_strategy: strategies disagree on the number of states");
        for (const auto& row : f[i].rows)
            if (row.size() != static_cast<std::size_t>(ps.actions(i)))
                throw std::invalid_argument("product_strategy: strategy row has wrong number of actions");
    }
    CorrelatedStrategy psi;
    psi.rows.assign(S, Dist(ps.size(), 0.0));
    for (std::size_t s = 0; s < S; ++s)
        for (int p = 0; p < ps.size(); ++p) {
            double w = 1.0;
            for (int i = 0; i < ps.players(); ++i) w *= f[i][s][ps.action_of(p, i)];
            psi.rows[s][p] = w;
        }
    return psi;
}

inline CorrelatedStrategy product_strategy(const FiniteCSG& g, const StationaryProfile& f) {
    check_profile(g, f);
    return product_strategy(g.profiles, f);
}

/// Projection of psi onto A_{-i}: sums out player i's action.
inline OthersLaw marginal_excluding(const ProfileSpace& ps, const CorrelatedStrategy& psi, int player) {
    if (player < 0 || player >= ps.players())
        throw std::out_of_range("marginal_excluding: invalid player index");
    OthersLaw out;
    out.excluded = player;
    out.rows.assign(psi.rows.size(), Dist(ps.others_size(player), 0.0));
    for (std::size_t s = 0; s < psi.rows.size(); ++s) {
        if (psi.rows[s].size() != static_cast<std::size_t>(ps.size()))
            throw std::invalid_argument("marginal_excluding: row size does not match the profile space");
        for (int p = 0; p < ps.size(); ++p) out.rows[s][ps.others_index(p, player)] += psi.rows[s][p];
    }
    return out;
}

/// The law of A_{-i} induced by independent play of the other players.
inline OthersLaw others_product(const ProfileSpace& ps, const StationaryProfile& f, int player) {
    if (player < 0 || player >= ps.players()) throw std::out_of_range("others_product: invalid player index");
    const std::size_t S = f[0].num_states();
    OthersLaw out;
    out.excluded = player;
    out.rows.assign(S, Dist(ps.others_size(player), 0.0));
    for (std::size_t s = 0; s < S; ++s)
        for (int o = 0; o < ps.others_size(player); ++o) {
            const int p = ps.with_action(o, player, 0);
            double w = 1.0;
            for (int j = 0; j < ps.players(); ++j)
                if (j != player) w *= f[j][s][ps.action_of(p, j)];
            out.rows[s][o] = w;
        }
    return out;
}

/// Replaces player i's strategy in a profile.
inline StationaryProfile with_strategy(StationaryProfile f, int player, StationaryStrategy s) {
    f.players.at(player) = std::move(s);
    return f;
}

}  // namespace csg

#pragma once

// Certificates for approximate, per-state and weak correlated equilibria,
// a damped best-response search that only ever reports certified numbers,
// the shrinking-epsilon sequence with its occupation-mixing checks, and the
// one-shot games used for per-state consistency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "csg/best_response.hpp"
#include "csg/discretization.hpp"
#include "csg/strategy_transform.hpp"

namespace csg {

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kGapTol = 1e-8;
inline constexpr double kRegretTol = 1e-9;

enum class Concept { approximate, per_state, weak_correlated };

inline const char* to_string(Concept c) {
    switch (c) {
        case Concept::approximate: return "approx";
        case Concept::per_state: return "eps";
        case Concept::weak_correlated: return "weak-correlated";
    }
    return "?";
}

struct PlayerCertificate {
    int player = 0;
    /// J^l of the certified strategy, l = 0..L
    Vec costs;
    /// max_l (J^l - kappa^l); 0 for unconstrained players
    double feasibility_excess = 0.0;
    /// J^0 minus the constrained best-response value; 0 when vacuous
    double gap = 0.0;
    /// no feasible deviation exists, so the best-response condition holds trivially
    bool vacuous = false;
    double best_response_value = 0.0;
    double lp_primal_residual = 0.0;
    double lp_duality_gap = 0.0;
};

struct EquilibriumCertificate {
    Concept kind = Concept::approximate;
    double epsilon = 0.0;
    /// max over players of max(feasibility excess, gap)
    double certified_eps = 0.0;
    bool pass = false;
    std::vector<PlayerCertificate> players;
};

namespace detail {

/// Runs body(k) for k in [0, n), on threads when more than one core is available.
template <class F>
void parallel_for(int n, F&& body, unsigned threads = 0) {
    unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    nt = std::min<unsigned>(nt, static_cast<unsigned>(std::max(n, 0)));
    if (nt <= 1) {
        for (int k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n);
    for (unsigned w = 0; w < nt; ++w)
        pool.emplace_back([&, w] {
            for (int k = static_cast<int>(w); k < n; k += static_cast<int>(nt)) {
                try {
                    body(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline PlayerCertificate certify_player(const InducedMDP& m, const Vec& costs, BestResponseResult* br_out) {
    PlayerCertificate pc;
    pc.player = m.player;
    pc.costs = costs;
    for (int l = 1; l < m.num_layers; ++l) {
        const double e = costs[l] - m.kappa[l - 1];
        pc.feasibility_excess = l == 1 ? e : std::max(pc.feasibility_excess, e);
    }
    BestResponseResult br;
    try {
        br = occupation_lp(m);
    } catch (const SolverError& e) {
        throw SolverError("best response of player " + std::to_string(m.player) + ": " + e.what());
    }
    if (br.status == ResponseStatus::infeasible) {
        pc.vacuous = true;
    } else {
        pc.best_response_value = br.value;
        pc.gap = costs[0] - br.value;
        pc.lp_primal_residual = br.primal_residual;
        pc.lp_duality_gap = br.duality_gap;
    }
    if (br_out) *br_out = std::move(br);
    return pc;
}

inline void finish(EquilibriumCertificate& cert, double feas_tol = kFeasibilityTol, double gap_tol = kGapTol) {
    cert.certified_eps = -std::numeric_limits<double>::infinity();
    cert.pass = true;
    for (const auto& pc : cert.players) {
        double e = pc.feasibility_excess;
        if (!pc.vacuous) e = std::max(e, pc.gap);
        cert.certified_eps = std::max(cert.certified_eps, e);
        if (pc.feasibility_excess > cert.epsilon + feas_tol) cert.pass = false;
        if (!pc.vacuous && pc.gap > cert.epsilon + gap_tol) cert.pass = false;
    }
}

/// Certificate of a stationary profile plus every player's best response.
inline EquilibriumCertificate certify_profile(const FiniteCSG& g, const StationaryProfile& f, double eps,
                                              std::vector<BestResponseResult>* responses = nullptr) {
    check_profile(g, f);
    const CostVector J = evaluate_profile(g, f);
    EquilibriumCertificate cert;
    cert.kind = Concept::approximate;
    cert.epsilon = eps;
    cert.players.resize(g.players());
    std::vector<BestResponseResult> br(g.players());
    parallel_for(g.players(), [&](int i) {
        cert.players[i] = certify_player(induced_mdp(g, i, f), J.J[i], &br[i]);
    });
    finish(cert);
    if (responses) *responses = std::move(br);
    return cert;
}

}  // namespace detail

/// J^l <= kappa^l + eps and J^0 - eps <= constrained best response, for every player.
inline EquilibriumCertificate verify_approx_equilibrium(const FiniteCSG& g, const StationaryProfile& f, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("verify_approx_equilibrium: eps must be >= 0");
    return detail::certify_profile(g, f, eps);
}

/// Weak correlated check: each player against the marginal of the others under psi.
inline EquilibriumCertificate verify_weak_correlated(const FiniteCSG& g, const CorrelatedStrategy& psi,
                                                     double tol = kGapTol) {
    check_correlated(g, psi);
    const CostVector J = evaluate_correlated(g, psi);
    EquilibriumCertificate cert;
    cert.kind = Concept::weak_correlated;
    cert.epsilon = tol;
    cert.players.resize(g.players());
    detail::parallel_for(g.players(), [&](int i) {
        cert.players[i] =
            detail::certify_player(induced_mdp(g, i, marginal_excluding(g.profiles, psi, i)), J.J[i], nullptr);
    });
    detail::finish(cert, 0.0, 0.0);
    return cert;
}

// ---------------------------------------------------------------------------
// Per-state (unconstrained) equilibria

struct StateCertificate {
    double epsilon = 0.0;
    /// gaps[i][s] = J^0_i(f)(s) - optimal value of i's induced MDP at s
    std::vector<Vec> gaps;
    std::vector<Vec> optimal_values;
    std::vector<StationaryStrategy> optimal_policies;
    double max_gap = 0.0;
    bool pass = false;
};

struct OptimalPolicy {
    StationaryStrategy policy;
    Vec values;
    int iterations = 0;
};

/// Howard policy iteration on the objective layer, started from the greedy improvement of `start`.
inline OptimalPolicy optimal_policy(const InducedMDP& m, const StationaryStrategy& start, int max_iter = 1000) {
    const int S = m.num_states, A = m.num_actions;
    OptimalPolicy out;
    out.policy = start;
    out.values = policy_values(m, start)[0];
    for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
        bool changed = false;
        StationaryStrategy next = out.policy;
        for (int s = 0; s < S; ++s) {
            Vec q(A, 0.0);
            for (int a = 0; a < A; ++a) {
                double cont = 0.0;
                for (int y = 0; y < S; ++y) cont += m.p(s, a, y) * out.values[y];
                q[a] = (1.0 - m.alpha) * m.c(0, s, a) + m.alpha * cont;
            }
            const int best = static_cast<int>(std::min_element(q.begin(), q.end()) - q.begin());
            double current = 0.0;
            for (int a = 0; a < A; ++a) current += out.policy[s][a] * q[a];
            if (q[best] < current - 1e-13) {
                next[s].assign(A, 0.0);
                next[s][best] = 1.0;
                changed = true;
            }
        }
        if (!changed) return out;
        out.policy = std::move(next);
        out.values = policy_values(m, out.policy)[0];
    }
    throw SolverError("optimal_policy: policy iteration did not terminate");
}

/// J^0_i(f)(x) - eps <= inf_sigma J^0_i(f_-i, sigma)(x) at every state; constraints are ignored.
inline StateCertificate verify_eps_equilibrium_unconstrained(const FiniteCSG& g, const StationaryProfile& f,
                                                              double eps) {
    check_profile(g, f);
    StateCertificate cert;
    cert.epsilon = eps;
    cert.gaps.resize(g.players());
    cert.optimal_values.resize(g.players());
    cert.optimal_policies.resize(g.players());
    for (int i = 0; i < g.players(); ++i) {
        const InducedMDP m = induced_mdp(g, i, f);
        const Vec own = policy_values(m, f[i])[0];
        OptimalPolicy opt = optimal_policy(m, f[i]);
        cert.gaps[i].resize(g.num_states);
        for (int s = 0; s < g.num_states; ++s) {
            cert.gaps[i][s] = own[s] - opt.values[s];
            cert.max_gap = std::max(cert.max_gap, cert.gaps[i][s]);
        }
        cert.optimal_values[i] = std::move(opt.values);
        cert.optimal_policies[i] = std::move(opt.policy);
    }
    cert.pass = cert.max_gap <= eps + kGapTol;
    return cert;
}

// ---------------------------------------------------------------------------
// Search

struct SearchConfig {
    int restarts = 4;
    double damping = 0.5;
    int max_iter = 200;
    double target_eps = 1e-8;
    std::uint64_t seed = 0;
    /// starting point of restart 0; uniform when absent
    std::optional<StationaryProfile> initial;
    unsigned threads = 0;
};

struct SearchResult {
    StationaryProfile profile;
    EquilibriumCertificate certificate;
    int restart = 0;
    int iterations = 0;
    std::vector<std::string> log;
};

namespace detail {

inline SearchResult search_once(const FiniteCSG& g, const SearchConfig& cfg, int r) {
    SearchResult best;
    best.restart = r;
    StationaryProfile f;
    if (r == 0) {
        f = cfg.initial ? *cfg.initial : uniform_profile(g);
    } else {
        std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(r))));
        f = random_profile(rng, g);
    }
    bool have = false;
    auto consider = [&](const StationaryProfile& cand, const EquilibriumCertificate& cert, int it) {
        if (!have || cert.certified_eps < best.certificate.certified_eps) {
            best.profile = cand;
            best.certificate = cert;
            best.iterations = it;
            have = true;
        }
    };
    for (int it = 0; it < cfg.max_iter; ++it) {
        std::vector<BestResponseResult> br;
        consider(f, certify_profile(g, f, cfg.target_eps, &br), it);
        if (best.certificate.certified_eps <= cfg.target_eps) break;
        StationaryProfile jump = f;
        for (int i = 0; i < g.players(); ++i) {
            if (br[i].status == ResponseStatus::infeasible) {
                best.log.push_back("restart " + std::to_string(r) + " iteration " + std::to_string(it) +
                                   ": no feasible response for player " + std::to_string(i) + ", kept");
                continue;
            }
            jump[i] = br[i].strategy;
        }
        consider(jump, certify_profile(g, jump, cfg.target_eps), it);
        if (best.certificate.certified_eps <= cfg.target_eps) break;
        for (int i = 0; i < g.players(); ++i) f[i] = blend(f[i], jump[i], cfg.damping);
    }
    return best;
}

}  // namespace detail

/**
 * Damped best-response iteration f <- (1 - damping) f + damping BR(f) from
 * several starting points. The returned certificate is always the exact one
 * of the returned profile; the search itself carries no guarantee.
 */
inline SearchResult search_equilibrium(const FiniteCSG& g, const SearchConfig& cfg = {}) {
    if (cfg.restarts < 1 || cfg.max_iter < 1) throw std::invalid_argument("search_equilibrium: need restarts, iterations >= 1");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw std::invalid_argument("search_equilibrium: damping in (0,1]");
    if (cfg.initial) check_profile(g, *cfg.initial);
    std::vector<SearchResult> runs(cfg.restarts);
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    if (nt <= 1) {
        // sequential: stop at the first restart reaching the target, same answer as the parallel merge
        for (int r = 0; r < cfg.restarts; ++r) {
            runs[r] = detail::search_once(g, cfg, r);
            if (runs[r].certificate.certified_eps <= cfg.target_eps) {
                runs.resize(r + 1);
                break;
            }
        }
    } else {
        detail::parallel_for(cfg.restarts, [&](int r) { runs[r] = detail::search_once(g, cfg, r); }, nt);
    }
    std::size_t pick = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].certificate.certified_eps <= cfg.target_eps) {
            pick = r;
            break;
        }
        if (runs[r].certificate.certified_eps < runs[pick].certificate.certified_eps) pick = r;
    }
    SearchResult out = runs[pick];
    out.log.clear();
    for (const auto& run : runs) out.log.insert(out.log.end(), run.log.begin(), run.log.end());
    out.certificate.epsilon = cfg.target_eps;
    out.certificate.pass = out.certificate.certified_eps <= cfg.target_eps;
    return out;
}

// ---------------------------------------------------------------------------
// Shrinking-epsilon sequence

struct MixingCheck {
    int player = 0;
    double zeta = 0.0;
    /// positive part of the profile's feasibility excess
    double excess = 0.0;
    /// false when zeta <= eps_n, so xi is undefined
    bool applicable = false;
    double xi = 0.0;
    /// |J^l(recovered mix) - (xi J^l(slater witness) + (1 - xi) J^l(own))|
    double linearity_residual = 0.0;
    /// |J^l(recovered mix) - integral of c^l against the mixed measure|
    double recovery_residual = 0.0;
    double flow_residual = 0.0;
    /// max_l (J^l(mix) - kappa^l)
    double mixed_excess = 0.0;
};

struct SequenceLevel {
    int n = 0;
    double eps = 0.0;
    double gamma = 0.0;
    StationaryProfile profile;
    CorrelatedStrategy psi;
    EquilibriumCertificate certificate;
    std::vector<MixingCheck> mixing;
};

struct SequenceResult {
    std::vector<SequenceLevel> levels;
    bool complete = false;
    std::string message;
    /// weak correlated certificate of the last level's product strategy
    EquilibriumCertificate final_certificate;
};

inline std::vector<MixingCheck> mixing_checks(const FiniteCSG& g, const StationaryProfile& f, double eps) {
    std::vector<MixingCheck> out;
    for (int i = 0; i < g.players(); ++i) {
        const InducedMDP m = induced_mdp(g, i, f);
        MixingCheck mc;
        mc.player = i;
        if (m.num_constraints() == 0) {
            mc.zeta = std::numeric_limits<double>::infinity();
            out.push_back(mc);
            continue;
        }
        const SlaterResult sl = slater_margin(m);
        mc.zeta = sl.zeta;
        const PlayerCost own = evaluate_on_mdp(m, f[i]);
        for (int l = 1; l < m.num_layers; ++l) mc.excess = std::max(mc.excess, own.J[l] - m.kappa[l - 1]);
        if (!(sl.zeta > eps)) {
            out.push_back(mc);
            continue;
        }
        mc.applicable = true;
        mc.xi = compute_xi(eps, mc.excess, sl.zeta);
        const OccupationMeasure ts = occupation_of(m, sl.witness);
        const OccupationMeasure tf = occupation_of(m, f[i]);
        const OccupationMeasure mix = mix_occupations(ts, tf, mc.xi);
        mc.flow_residual = flow_balance_residual(m, mix);
        const PlayerCost witness = evaluate_on_mdp(m, sl.witness);
        const PlayerCost mixed = evaluate_on_mdp(m, recover_strategy(mix));
        mc.mixed_excess = -std::numeric_limits<double>::infinity();
        for (int l = 0; l < m.num_layers; ++l) {
            const double comb = mc.xi * witness.J[l] + (1.0 - mc.xi) * own.J[l];
            mc.linearity_residual = std::max(mc.linearity_residual, std::abs(mixed.J[l] - comb));
            mc.recovery_residual = std::max(mc.recovery_residual, std::abs(mixed.J[l] - occupation_cost(m, mix, l)));
            if (l > 0) mc.mixed_excess = std::max(mc.mixed_excess, mixed.J[l] - m.kappa[l - 1]);
        }
        out.push_back(mc);
    }
    return out;
}

/**
 * eps_n = eps0 / 2^n for n = 0..n_max with gamma_n = gamma(eps_n); each level
 * is searched from the previous level's profile and certified at eps_n. The
 * last product strategy is re-verified as a weak correlated equilibrium.
 */
inline SequenceResult correlated_limit_sequence(const FiniteCSG& g, double eps0, int n_max, SearchConfig cfg = {}) {
    if (!(eps0 > 0.0)) throw std::invalid_argument("correlated_limit_sequence: eps0 must be positive");
    if (n_max < 0) throw std::invalid_argument("correlated_limit_sequence: n must be >= 0");
    SequenceResult out;
    for (int n = 0; n <= n_max; ++n) {
        SequenceLevel lv;
        lv.n = n;
        lv.eps = std::ldexp(eps0, -n);
        lv.gamma = gamma_of_epsilon(lv.eps, g.alpha, g.bound);
        cfg.target_eps = std::min(cfg.target_eps, lv.eps);
        const SearchResult sr = search_equilibrium(g, cfg);
        lv.profile = sr.profile;
        lv.certificate = verify_approx_equilibrium(g, sr.profile, lv.eps);
        lv.psi = product_strategy(g, sr.profile);
        lv.mixing = mixing_checks(g, sr.profile, lv.eps);
        const bool ok = lv.certificate.pass;
        out.levels.push_back(std::move(lv));
        if (!ok) {
            out.message = "level " + std::to_string(n) + ": search did not certify eps_n";
            break;
        }
        cfg.initial = sr.profile;
    }
    if (!out.levels.empty()) out.final_certificate = verify_weak_correlated(g, out.levels.back().psi, 1e-6);
    out.complete = static_cast<int>(out.levels.size()) == n_max + 1 && out.levels.back().certificate.pass;
    return out;
}

// ---------------------------------------------------------------------------
// One-shot games

struct OneShotGame {
    int state = 0;
    ProfileSpace profiles;
    /// u[i][profile]
    std::vector<Vec> u;
};

/// u_i(a) = (1 - alpha) c^0_i(x, a) + alpha sum_y v_i(y) p(y | x, a).
inline OneShotGame one_shot_game(const FiniteCSG& g, int x, const std::vector<Vec>& v) {
    if (x < 0 || x >= g.num_states) throw std::out_of_range("one_shot_game: state out of range");
    if (v.size() != static_cast<std::size_t>(g.players()))
        throw std::invalid_argument("one_shot_game: one value vector per player required");
    OneShotGame G;
    G.state = x;
    G.profiles = g.profiles;
    G.u.assign(g.players(), Vec(g.num_profiles(), 0.0));
    for (int i = 0; i < g.players(); ++i) {
        if (v[i].size() != static_cast<std::size_t>(g.num_states))
            throw std::invalid_argument("one_shot_game: value vector has wrong length");
        for (int p = 0; p < g.num_profiles(); ++p) {
            double cont = 0.0;
            for (int y = 0; y < g.num_states; ++y) cont += v[i][y] * g.p(x, p, y);
            G.u[i][p] = (1.0 - g.alpha) * g.c(i, 0, x, p) + g.alpha * cont;
        }
    }
    return G;
}

struct OneShotResult {
    Vec regret;
    /// pure minimiser of each player's expected payoff against the others
    std::vector<int> best_action;
    double max_regret = 0.0;
    bool pass = false;
};

/// Player i's expected payoff of each own action against the others' mixed actions.
inline Vec action_payoffs(const OneShotGame& G, const std::vector<Dist>& mixed, int i) {
    const ProfileSpace& ps = G.profiles;
    Vec out(ps.actions(i), 0.0);
    for (int o = 0; o < ps.others_size(i); ++o) {
        double w = 1.0;
        const int p0 = ps.with_action(o, i, 0);
        for (int j = 0; j < ps.players(); ++j)
            if (j != i) w *= mixed[j][ps.action_of(p0, j)];
        if (w == 0.0) continue;
        for (int a = 0; a < ps.actions(i); ++a) out[a] += w * G.u[i][ps.with_action(o, i, a)];
    }
    return out;
}

inline OneShotResult verify_one_shot_nash(const OneShotGame& G, const std::vector<Dist>& mixed,
                                          double tol = kRegretTol) {
    const ProfileSpace& ps = G.profiles;
    if (mixed.size() != static_cast<std::size_t>(ps.players()))
        throw std::invalid_argument("verify_one_shot_nash: one mixed action per player required");
    for (int i = 0; i < ps.players(); ++i)
        if (mixed[i].size() != static_cast<std::size_t>(ps.actions(i)) || !is_distribution(mixed[i]))
            throw std::invalid_argument("verify_one_shot_nash: invalid mixed action");
    OneShotResult r;
    for (int i = 0; i < ps.players(); ++i) {
        const Vec pay = action_payoffs(G, mixed, i);
        double own = 0.0;
        for (int a = 0; a < ps.actions(i); ++a) own += mixed[i][a] * pay[a];
        const auto best = std::min_element(pay.begin(), pay.end());
        r.regret.push_back(own - *best);
        r.best_action.push_back(static_cast<int>(best - pay.begin()));
        r.max_regret = std::max(r.max_regret, r.regret.back());
    }
    r.pass = r.max_regret <= tol;
    return r;
}

struct Prop1Report {
    /// regret[s][i] in the one-shot game at s with the profile's own values
    std::vector<Vec> regret;
    std::vector<int> conforming;
    std::vector<int> nonconforming;
    std::vector<bool> eta_null;
    /// every nonconforming state carries zero initial mass
    bool exceptions_eta_null = true;
};

inline std::vector<Dist> mixed_at(const StationaryProfile& f, int s) {
    std::vector<Dist> out;
    for (const auto& fi : f.players) out.push_back(fi[s]);
    return out;
}

/// Per-state one-shot regrets of f against the continuation values J^0_i(f)(.).
inline Prop1Report check_prop1_consistency(const FiniteCSG& g, const StationaryProfile& f, double tol = kRegretTol) {
    const CostVector J = evaluate_profile(g, f);
    std::vector<Vec> v;
    for (int i = 0; i < g.players(); ++i) v.push_back(J.Jx[i][0]);
    Prop1Report r;
    for (int s = 0; s < g.num_states; ++s) {
        const OneShotResult os = verify_one_shot_nash(one_shot_game(g, s, v), mixed_at(f, s), tol);
        r.regret.push_back(os.regret);
        r.eta_null.push_back(g.eta[s] == 0.0);
        if (os.pass) {
            r.conforming.push_back(s);
        } else {
            r.nonconforming.push_back(s);
            if (g.eta[s] != 0.0) r.exceptions_eta_null = false;
        }
    }
    return r;
}

/**
 * Replaces f at every nonconforming state by one-shot best responses and
 * repeats until all states conform; returns the repaired profile.
 */
inline StationaryProfile repair_one_shot(const FiniteCSG& g, StationaryProfile f, int max_rounds = 100,
                                         double tol = kRegretTol) {
    for (int round = 0; round < max_rounds; ++round) {
        const Prop1Report rep = check_prop1_consistency(g, f, tol);
        if (rep.nonconforming.empty()) return f;
        const CostVector J = evaluate_profile(g, f);
        std::vector<Vec> v;
        for (int i = 0; i < g.players(); ++i) v.push_back(J.Jx[i][0]);
        for (int s : rep.nonconforming) {
            const OneShotGame G = one_shot_game(g, s, v);
            const std::vector<Dist> mixed = mixed_at(f, s);
            for (int i = 0; i < g.players(); ++i) {
                if (rep.regret[s][i] <= tol) continue;
                const Vec pay = action_payoffs(G, mixed, i);
                Dist d(pay.size(), 0.0);
                d[std::min_element(pay.begin(), pay.end()) - pay.begin()] = 1.0;
                f[i][s] = d;
            }
        }
    }
    throw SolverError("repair_one_shot: no consistent profile within the round limit");
}

}  // namespace csg

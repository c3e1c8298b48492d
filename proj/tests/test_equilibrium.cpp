#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace csg;

TEST(ApproxEquilibrium, ZeroCostGamePassesAtZero) {
    const FiniteCSG g = fx::zero_game();
    std::mt19937_64 rng(1);
    const EquilibriumCertificate c = verify_approx_equilibrium(g, random_profile(rng, g), 0.0);
    EXPECT_TRUE(c.pass);
    EXPECT_NEAR(c.certified_eps, 0.0, 1e-12);
}

TEST(ApproxEquilibrium, G3AtOptimum) {
    const EquilibriumCertificate c = verify_approx_equilibrium(fx::g3(), fx::g3_profile(0.75, 0.75), 0.0);
    EXPECT_TRUE(c.pass);
    EXPECT_LE(std::abs(c.certified_eps), 1e-8);
    for (const auto& p : c.players) {
        EXPECT_NEAR(p.costs[0], 0.4, 1e-12);
        EXPECT_NEAR(p.best_response_value, 0.4, 1e-9);
    }
}

TEST(ApproxEquilibrium, G2FullyOnActionZeroViolatesConstraint) {
    const FiniteCSG g = fx::g2();
    const StationaryProfile f{{fx::g2_strategy(1.0)}};
    const EquilibriumCertificate c = verify_approx_equilibrium(g, f, 0.39);
    EXPECT_FALSE(c.pass);
    EXPECT_NEAR(c.players[0].feasibility_excess, 0.4, 1e-12);
    EXPECT_TRUE(verify_approx_equilibrium(g, f, 0.41).pass);
}

TEST(ApproxEquilibrium, CertificateValuesMatchIndependentEvaluation) {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 5; ++k) {
        FiniteCSG g = fx::random_game(rng, {2, 2}, 3, 2, 0.5);
        fx::attainable_kappa(rng, g, 0.1);
        const StationaryProfile f = random_profile(rng, g);
        const EquilibriumCertificate c = verify_approx_equilibrium(g, f, 2.0);
        const auto ref = oracle::truncated_sum(g, product_strategy(g, f), 200);
        for (int i = 0; i < 2; ++i)
            for (int l = 0; l < 2; ++l) EXPECT_NEAR(c.players[i].costs[l], ref[i][l], 1e-8);
    }
}

TEST(ApproxEquilibrium, EmptyDeviationSetIsVacuous) {
    FiniteCSG g = fx::g2();
    g.kappa[0][0] = -0.1;
    const EquilibriumCertificate c = verify_approx_equilibrium(g, {{fx::g2_strategy(0.0)}}, 0.2);
    EXPECT_TRUE(c.players[0].vacuous);
    EXPECT_NEAR(c.players[0].feasibility_excess, 0.1, 1e-12);
    EXPECT_TRUE(c.pass);
}

TEST(ApproxEquilibrium, LooserBoundsNeverIncreaseCertifiedEps) {
    FiniteCSG g = fx::g3();
    const StationaryProfile f = fx::g3_profile(0.9, 0.6);
    double prev = std::numeric_limits<double>::infinity();
    for (double kappa : {0.6, 0.7, 0.8, 0.9}) {
        g.kappa = {{kappa}, {kappa}};
        const EquilibriumCertificate c = verify_approx_equilibrium(g, f, 0.0);
        for (const auto& p : c.players) EXPECT_LE(p.feasibility_excess, prev + 1e-12);
        prev = c.players[0].feasibility_excess;
    }
}

TEST(EpsEquilibrium, OptimalPolicyHasZeroGaps) {
    const FiniteCSG g = fx::g1();
    const StateCertificate c = verify_eps_equilibrium_unconstrained(g, {{{{{1.0, 0.0}, {1.0, 0.0}}}}}, 0.0);
    EXPECT_TRUE(c.pass);
    for (double x : c.gaps[0]) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(EpsEquilibrium, G1SuboptimalChoiceHasGapOne) {
    const FiniteCSG g = fx::g1();
    const StateCertificate c = verify_eps_equilibrium_unconstrained(g, {{{{{0.0, 1.0}, {1.0, 0.0}}}}}, 0.5);
    EXPECT_NEAR(c.gaps[0][0], 1.0, 1e-12);
    EXPECT_NEAR(c.gaps[0][1], 0.0, 1e-12);
    EXPECT_FALSE(c.pass);
}

TEST(EpsEquilibrium, OptimalValuesMatchValueIteration) {
    std::mt19937_64 rng(3);
    const FiniteCSG g = fx::random_game(rng, {3, 2}, 4, 1, 0.75);
    const StationaryProfile f = random_profile(rng, g);
    const StateCertificate c = verify_eps_equilibrium_unconstrained(g, f, 1.0);
    for (int i = 0; i < 2; ++i) {
        const Vec ref = oracle::optimal_values(induced_mdp(g, i, f));
        for (int s = 0; s < 4; ++s) EXPECT_NEAR(c.optimal_values[i][s], ref[s], 1e-10);
    }
}

TEST(EpsEquilibrium, ZeroCostGamePasses) {
    const FiniteCSG g = fx::zero_game();
    EXPECT_TRUE(verify_eps_equilibrium_unconstrained(g, uniform_profile(g), 0.0).pass);
}

TEST(WeakCorrelated, SinglePlayerConstrainedOptimum) {
    const FiniteCSG g = fx::g2();
    const EquilibriumCertificate c = verify_weak_correlated(g, product_strategy(g, {{fx::g2_strategy(0.75)}}), 1e-8);
    EXPECT_TRUE(c.pass);
}

TEST(WeakCorrelated, RejectsConstraintViolation) {
    const FiniteCSG g = fx::g2();
    const EquilibriumCertificate c = verify_weak_correlated(g, product_strategy(g, {{fx::g2_strategy(1.0)}}), 1e-8);
    EXPECT_FALSE(c.pass);
    EXPECT_NEAR(c.players[0].feasibility_excess, 0.4, 1e-12);
}

TEST(WeakCorrelated, ProductOfDecoupledNashAgreesWithApprox) {
    const FiniteCSG g = fx::g3();
    const StationaryProfile f = fx::g3_profile(0.75, 0.75);
    const EquilibriumCertificate w = verify_weak_correlated(g, product_strategy(g, f), 1e-8);
    ASSERT_TRUE(w.pass);
    EXPECT_TRUE(verify_approx_equilibrium(g, f, 0.0).pass);
}

TEST(WeakCorrelated, CorrelatedLotteryOnDecoupledGame) {
    // perfectly correlated play of the two optimal mixtures at the start state
    const FiniteCSG g = fx::g3();
    CorrelatedStrategy psi = product_strategy(g, fx::g3_profile(0.75, 0.75));
    psi.rows[0] = {0.75, 0.0, 0.0, 0.25};
    const EquilibriumCertificate w = verify_weak_correlated(g, psi, 1e-8);
    for (const auto& p : w.players) EXPECT_NEAR(p.costs[0], 0.4, 1e-12);
    EXPECT_TRUE(w.pass);
}

TEST(Search, SinglePlayerConvergesImmediately) {
    const SearchResult r = search_equilibrium(fx::g2());
    EXPECT_LE(r.certificate.certified_eps, 1e-8);
    EXPECT_EQ(r.restart, 0);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_NEAR(r.profile[0][0][0], 0.75, 1e-9);
}

TEST(Search, DecoupledG3) {
    const SearchResult r = search_equilibrium(fx::g3());
    EXPECT_LE(r.certificate.certified_eps, 1e-8);
    EXPECT_TRUE(verify_approx_equilibrium(fx::g3(), r.profile, 1e-8).pass);
}

TEST(Search, ZeroCostGame) {
    const SearchResult r = search_equilibrium(fx::zero_game());
    EXPECT_LE(r.certificate.certified_eps, 1e-12);
}

TEST(Search, ReturnedCertificateIsExact) {
    std::mt19937_64 rng(4);
    FiniteCSG g = fx::random_game(rng, {2, 2}, 3, 2, 0.5);
    fx::attainable_kappa(rng, g, 0.05);
    SearchConfig cfg;
    cfg.max_iter = 20;
    cfg.restarts = 2;
    cfg.target_eps = 1e-12;
    const SearchResult r = search_equilibrium(g, cfg);
    const EquilibriumCertificate again = verify_approx_equilibrium(g, r.profile, 1e-12);
    EXPECT_DOUBLE_EQ(again.certified_eps, r.certificate.certified_eps);
}

TEST(Search, SequentialAndThreadedAgree) {
    std::mt19937_64 rng(5);
    FiniteCSG g = fx::random_game(rng, {2, 3}, 3, 1, 0.5);
    SearchConfig cfg;
    cfg.max_iter = 10;
    cfg.restarts = 3;
    cfg.target_eps = 1e-14;
    cfg.seed = 9;
    cfg.threads = 1;
    const SearchResult a = search_equilibrium(g, cfg);
    cfg.threads = 3;
    const SearchResult b = search_equilibrium(g, cfg);
    EXPECT_EQ(a.profile, b.profile);
    EXPECT_EQ(a.restart, b.restart);
}

TEST(Sequence, ScheduleArithmetic) {
    const SequenceResult s = correlated_limit_sequence(fx::g3(), 0.2, 3);
    ASSERT_EQ(s.levels.size(), 4u);
    const double eps[] = {0.2, 0.1, 0.05, 0.025};
    for (int n = 0; n < 4; ++n) {
        EXPECT_DOUBLE_EQ(s.levels[n].eps, eps[n]);
        EXPECT_DOUBLE_EQ(s.levels[n].gamma, eps[n] / 2);
        EXPECT_TRUE(s.levels[n].certificate.pass);
    }
    EXPECT_TRUE(s.complete);
    EXPECT_TRUE(s.final_certificate.pass);
    EXPECT_LE(s.final_certificate.certified_eps, 1e-6);
}

TEST(Sequence, SingleLevel) {
    const SequenceResult s = correlated_limit_sequence(fx::g3(), 0.2, 0);
    EXPECT_EQ(s.levels.size(), 1u);
    EXPECT_THROW(correlated_limit_sequence(fx::g3(), 0.0, 1), std::invalid_argument);
}

TEST(Sequence, MixingChecksOnG3) {
    const SequenceResult s = correlated_limit_sequence(fx::g3(), 0.2, 2);
    for (const auto& lv : s.levels)
        for (const auto& m : lv.mixing) {
            ASSERT_TRUE(m.applicable);
            EXPECT_NEAR(m.zeta, 0.6, 1e-9);
            EXPECT_NEAR(m.xi, compute_xi(lv.eps, m.excess, m.zeta), 1e-15);
            EXPECT_LE(m.linearity_residual, 1e-9);
            EXPECT_LE(m.recovery_residual, 1e-9);
            EXPECT_LE(m.flow_residual, 1e-9);
            EXPECT_LE(m.mixed_excess, 1e-9);
        }
}

TEST(OneShot, ZeroValuesGiveScaledStageCosts) {
    const FiniteCSG g = fx::g3();
    const OneShotGame G = one_shot_game(g, 0, {Vec(4, 0.0), Vec(4, 0.0)});
    for (int i = 0; i < 2; ++i)
        for (int p = 0; p < 4; ++p) EXPECT_EQ(G.u[i][p], 0.5 * g.c(i, 0, 0, p));
}

TEST(OneShot, ConstantValuesShiftPayoffs) {
    const FiniteCSG g = fx::g3();
    const OneShotGame G0 = one_shot_game(g, 1, {Vec(4, 0.0), Vec(4, 0.0)});
    const OneShotGame G1 = one_shot_game(g, 1, {Vec(4, 1.0), Vec(4, 1.0)});
    for (int i = 0; i < 2; ++i)
        for (int p = 0; p < 4; ++p) EXPECT_NEAR(G1.u[i][p] - G0.u[i][p], 0.5, 1e-15);
}

TEST(OneShot, BellmanArgminAtG1) {
    const FiniteCSG g = fx::g1();
    const Vec v = oracle::optimal_values(induced_mdp(g, 0, uniform_profile(g)));
    const OneShotGame G = one_shot_game(g, 0, {v});
    EXPECT_LT(G.u[0][0], G.u[0][1]);
}

TEST(OneShot, MatchingPenniesUniformHasNoRegret) {
    OneShotGame G;
    G.profiles = ProfileSpace({2, 2});
    G.u = {{1.0, -1.0, -1.0, 1.0}, {-1.0, 1.0, 1.0, -1.0}};
    const OneShotResult r = verify_one_shot_nash(G, {{0.5, 0.5}, {0.5, 0.5}});
    EXPECT_TRUE(r.pass);
    const double A[2][2] = {{1, -1}, {-1, 1}}, B[2][2] = {{-1, 1}, {1, -1}};
    const auto [ra, rb] = oracle::bimatrix_regrets(A, B, 0.5, 0.5);
    EXPECT_NEAR(r.regret[0], ra, 1e-15);
    EXPECT_NEAR(r.regret[1], rb, 1e-15);
}

TEST(OneShot, DominatedActionRegretEqualsDominanceGap) {
    OneShotGame G;
    G.profiles = ProfileSpace({2, 2});
    // player 0: action 1 costs 0.3 more than action 0 whatever player 1 does
    G.u = {{0.1, 0.2, 0.4, 0.5}, {0.0, 0.0, 0.0, 0.0}};
    const OneShotResult r = verify_one_shot_nash(G, {{0.0, 1.0}, {0.5, 0.5}});
    EXPECT_NEAR(r.regret[0], 0.3, 1e-15);
    EXPECT_FALSE(r.pass);
    const double A[2][2] = {{0.1, 0.2}, {0.4, 0.5}}, B[2][2] = {{0, 0}, {0, 0}};
    EXPECT_NEAR(oracle::bimatrix_regrets(A, B, 0.0, 0.5).first, 0.3, 1e-15);
}

TEST(OneShot, SingleActionPassesTrivially) {
    OneShotGame G;
    G.profiles = ProfileSpace({1, 1});
    G.u = {{0.7}, {-0.2}};
    EXPECT_TRUE(verify_one_shot_nash(G, {{1.0}, {1.0}}).pass);
}

TEST(OneShot, ReproducesPerStateVerification) {
    std::mt19937_64 rng(6);
    const FiniteCSG g = fx::random_game(rng, {3}, 4, 1, 0.6);
    const StateCertificate c = verify_eps_equilibrium_unconstrained(g, uniform_profile(g), 1.0);
    const StationaryProfile opt{{c.optimal_policies[0]}};
    for (int s = 0; s < 4; ++s) {
        const OneShotGame G = one_shot_game(g, s, {c.optimal_values[0]});
        EXPECT_LE(verify_one_shot_nash(G, mixed_at(opt, s), 1e-8).max_regret, 1e-8);
    }
    EXPECT_TRUE(verify_eps_equilibrium_unconstrained(g, opt, 0.0).pass);
}

TEST(NullStateConsistency, OptimalPolicyConformsEverywhere) {
    const FiniteCSG g = fx::g1();
    const Prop1Report r = check_prop1_consistency(g, {{{{{1.0, 0.0}, {1.0, 0.0}}}}});
    EXPECT_TRUE(r.nonconforming.empty());
}

TEST(NullStateConsistency, FlagsExactlyTheNullState) {
    const FiniteCSG g = fx::prop1_game();
    const StationaryProfile f = fx::prop1_profile();
    ASSERT_TRUE(verify_approx_equilibrium(g, f, 1e-9).pass);
    const Prop1Report r = check_prop1_consistency(g, f);
    EXPECT_EQ(r.nonconforming, std::vector<int>{2});
    EXPECT_TRUE(r.exceptions_eta_null);
    EXPECT_NEAR(r.regret[2][0], 0.5, 1e-12);
    const StationaryProfile fixed = repair_one_shot(g, f);
    EXPECT_TRUE(check_prop1_consistency(g, fixed).nonconforming.empty());
    const StateCertificate c = verify_eps_equilibrium_unconstrained(g, fixed, 0.0);
    EXPECT_TRUE(c.pass);
    EXPECT_LE(c.max_gap, 1e-8);
}

TEST(NullStateConsistency, ZeroCostGameConforms) {
    const FiniteCSG g = fx::zero_game();
    EXPECT_TRUE(check_prop1_consistency(g, uniform_profile(g)).nonconforming.empty());
}

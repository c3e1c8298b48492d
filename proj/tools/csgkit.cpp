// csgkit command-line front end. Every command prints a JSON report on
// stdout (and to <out-dir>/report.json when --out-dir is given).
//
// exit codes: 0 ok, 1 certified failure, 2 parse error, 3 validation or
// assumption violation, 4 solver error

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "csg/io.hpp"

namespace fs = std::filesystem;
using namespace csg;
using io::json;

namespace {

enum Exit { kOk = 0, kCertifiedFail = 1, kParse = 2, kValidation = 3, kSolver = 4 };

struct Common {
    std::string out_dir;
    std::uint64_t seed = 0;
    double tol = 1e-8;
};

struct Context {
    io::Report report;
    std::vector<std::string> inputs;
    std::string options;
    const Common* common = nullptr;

    std::string load(const std::string& path) {
        inputs.push_back(io::read_file(path));
        return inputs.back();
    }

    void write(const std::string& name, const std::string& text) const {
        if (common->out_dir.empty()) return;
        fs::create_directories(common->out_dir);
        io::write_file((fs::path(common->out_dir) / name).string(), text);
    }
};

FiniteCSG need_finite(const io::GameDocument& doc) {
    if (!doc.is_finite()) throw io::ValidationError("command needs a finite game, got a continuous spec");
    return doc.finite();
}

template <class T>
const T& need_class(const io::StrategyDocument& s, const char* want) {
    const T* p = std::get_if<T>(&s);
    if (!p)
        throw io::ValidationError(std::string("strategy class mismatch: expected ") + want + ", file declares " +
                                  io::class_tag(s));
    return *p;
}

int cmd_evaluate(Context& ctx, const std::string& game_file, const std::string& strat_file) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    const io::StrategyDocument s = io::parse_strategy(ctx.load(strat_file), &g);
    CostVector v;
    if (const auto* f = std::get_if<StationaryProfile>(&s))
        v = evaluate_profile(g, *f);
    else
        v = evaluate_correlated(g, need_class<CorrelatedStrategy>(s, "stationary or correlated"));
    ctx.report.results = io::to_json(v);
    return kOk;
}

int cmd_best_respond(Context& ctx, const std::string& game_file, const std::string& strat_file, int player) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    const io::StrategyDocument s = io::parse_strategy(ctx.load(strat_file), &g);
    if (player < 0 || player >= g.players()) throw io::ValidationError("--player out of range");
    InducedMDP m;
    if (const auto* f = std::get_if<StationaryProfile>(&s))
        m = induced_mdp(g, player, *f);
    else
        m = induced_mdp(g, player,
                        marginal_excluding(g.profiles, need_class<CorrelatedStrategy>(s, "stationary or correlated"),
                                           player));
    const BestResponseResult br = occupation_lp(m);
    json r;
    r["player"] = player;
    r["status"] = to_string(br.status);
    if (br.status == ResponseStatus::optimal) {
        r["value"] = br.value;
        r["constraint_values"] = br.constraint_values;
        r["strategy"] = io::detail::strategy_rows(br.strategy);
        r["occupation"] = br.theta.mass;
        r["flow_residual"] = flow_balance_residual(m, br.theta);
        r["lp_primal_residual"] = br.primal_residual;
        r["lp_duality_gap"] = br.duality_gap;
    }
    ctx.report.results = r;
    return kOk;
}

int cmd_verify(Context& ctx, const std::string& game_file, const std::string& strat_file, const std::string& concept_,
               double eps) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    const io::StrategyDocument s = io::parse_strategy(ctx.load(strat_file), &g);
    bool pass = false;
    if (concept_ == "approx") {
        const EquilibriumCertificate c = verify_approx_equilibrium(g, need_class<StationaryProfile>(s, "stationary"), eps);
        ctx.report.results = io::to_json(c);
        pass = c.pass;
    } else if (concept_ == "eps") {
        const StateCertificate c =
            verify_eps_equilibrium_unconstrained(g, need_class<StationaryProfile>(s, "stationary"), eps);
        ctx.report.results = io::to_json(c);
        pass = c.pass;
    } else {
        const CorrelatedStrategy psi = std::holds_alternative<StationaryProfile>(s)
                                           ? product_strategy(g, std::get<StationaryProfile>(s))
                                           : need_class<CorrelatedStrategy>(s, "correlated");
        const EquilibriumCertificate c = verify_weak_correlated(g, psi, eps);
        ctx.report.results = io::to_json(c);
        pass = c.pass;
    }
    return pass ? kOk : kCertifiedFail;
}

int cmd_solve(Context& ctx, const std::string& game_file, int restarts, double target) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    SearchConfig cfg;
    cfg.restarts = restarts;
    cfg.seed = ctx.common->seed;
    cfg.target_eps = target;
    cfg.threads = 1;
    const SearchResult r = search_equilibrium(g, cfg);
    json res;
    res["target_eps"] = target;
    res["certified_eps"] = r.certificate.certified_eps;
    res["restart"] = r.restart;
    res["iterations"] = r.iterations;
    res["certificate"] = io::to_json(r.certificate);
    res["log"] = r.log;
    json prof = json::array();
    for (const auto& fi : r.profile.players) prof.push_back(io::detail::strategy_rows(fi));
    res["profile"] = prof;
    ctx.report.results = res;
    ctx.write("profile.json", io::write_strategy(r.profile));
    ctx.write("certificate.json", io::dump(io::to_json(r.certificate)));
    return r.certificate.certified_eps <= target ? kOk : kCertifiedFail;
}

int cmd_discretize(Context& ctx, const std::string& spec_file, std::optional<double> gamma,
                   std::optional<double> epsilon) {
    const io::GameDocument doc = io::parse_game(ctx.load(spec_file));
    if (doc.is_finite()) throw io::ValidationError("discretize needs a continuous spec");
    const ContinuousGameSpec& g = doc.continuous();
    const double gm = gamma ? *gamma : gamma_of_epsilon(*epsilon, g.alpha, g.bound);
    const Partition part = build_partition(g, gm);
    const DiscretizedGame d = surrogate_game(g, part);
    const ValidationReport rep = validate_game(d.surrogate);
    if (!rep.ok()) throw SolverError("surrogate game failed validation:\n" + rep.summary());
    json res;
    res["gamma"] = gm;
    res["eps_bound"] = d.eps_bound;
    res["cells"] = part.num_cells();
    res["points"] = g.num_points();
    res["partition"] = io::to_json(part);
    ctx.report.results = res;
    io::GameDocument out;
    out.name = doc.name.empty() ? "surrogate" : doc.name + "-surrogate";
    out.description = "piecewise-constant surrogate on " + std::to_string(part.num_cells()) + " cells";
    out.payload = d.surrogate;
    ctx.write("surrogate.json", io::write_game(out));
    ctx.write("partition.json", io::dump(io::to_json(part)));
    return kOk;
}

int cmd_transform(Context& ctx, const std::string& game_file, int profiles) {
    const io::GameDocument doc = io::parse_game(ctx.load(game_file));
    const FiniteCSG g = need_finite(doc);
    if (!doc.wessels) throw io::ValidationError("transform needs a 'wessels' block with omega and beta");
    const WesselsGame w = wessels_transform(g, doc.wessels->omega, doc.wessels->beta);
    const ValidationReport rep = validate_game(w.transformed);
    if (!rep.ok()) throw SolverError("transformed game failed validation:\n" + rep.summary());
    std::mt19937_64 rng(ctx.common->seed);
    double worst = 0.0;
    json checks = json::array();
    for (int k = 0; k < profiles; ++k) {
        const StationaryProfile f = k == 0 ? uniform_profile(g) : random_profile(rng, g);
        const WesselsCheck c = wessels_cost_relation(g, w, f, ctx.common->tol);
        worst = std::max(worst, c.max_abs_diff);
        checks.push_back({{"max_abs_diff", c.max_abs_diff}, {"pass", c.pass}});
    }
    json res;
    res["beta"] = w.beta;
    res["discount"] = w.transformed.alpha;
    res["c0"] = w.c0;
    res["eta_omega"] = w.eta_omega;
    res["absorbing_state"] = w.absorbing_state();
    res["relation_max_abs_diff"] = worst;
    res["relation_pass"] = worst <= ctx.common->tol;
    res["checks"] = checks;
    ctx.report.results = res;
    io::GameDocument out;
    out.name = doc.name.empty() ? "transformed" : doc.name + "-transformed";
    out.description = "bounded-cost transform with absorbing state " + std::to_string(w.absorbing_state());
    out.payload = w.transformed;
    ctx.write("transformed.json", io::write_game(out));
    return worst <= ctx.common->tol ? kOk : kCertifiedFail;
}

int cmd_sequence(Context& ctx, const std::string& game_file, double eps0, int n) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    SearchConfig cfg;
    cfg.seed = ctx.common->seed;
    cfg.threads = 1;
    const SequenceResult seq = correlated_limit_sequence(g, eps0, n, cfg);
    json levels = json::array();
    for (const auto& lv : seq.levels) {
        json jl;
        jl["n"] = lv.n;
        jl["eps"] = lv.eps;
        jl["gamma"] = lv.gamma;
        jl["certified_eps"] = lv.certificate.certified_eps;
        jl["pass"] = lv.certificate.pass;
        json mix = json::array();
        for (const auto& m : lv.mixing) mix.push_back(io::to_json(m));
        jl["mixing"] = mix;
        levels.push_back(jl);
    }
    json res;
    res["eps0"] = eps0;
    res["n"] = n;
    res["complete"] = seq.complete;
    res["message"] = seq.message;
    res["levels"] = levels;
    res["final_weak_correlated"] = io::to_json(seq.final_certificate);
    ctx.report.results = res;
    if (!seq.levels.empty()) ctx.write("psi.json", io::write_strategy(seq.levels.back().psi));
    return seq.complete && seq.final_certificate.pass ? kOk : kCertifiedFail;
}

int cmd_simulate(Context& ctx, const std::string& game_file, const std::string& strat_file, std::size_t n_traj) {
    const FiniteCSG g = need_finite(io::parse_game(ctx.load(game_file)));
    const io::StrategyDocument s = io::parse_strategy(ctx.load(strat_file), &g);
    const CorrelatedStrategy psi = std::holds_alternative<StationaryProfile>(s)
                                       ? product_strategy(g, std::get<StationaryProfile>(s))
                                       : need_class<CorrelatedStrategy>(s, "stationary or correlated");
    const SimulationResult r = simulate(g, psi, ctx.common->seed, n_traj, ctx.common->tol, 1);
    const CostVector exact = evaluate_correlated(g, psi);
    json res;
    res["horizon"] = r.horizon;
    res["trajectories"] = r.trajectories;
    res["mean"] = io::detail::to_json(r.mean);
    res["std_error"] = io::detail::to_json(r.std_error);
    res["radius"] = io::detail::to_json(r.radius);
    res["exact"] = io::detail::to_json(exact.J);
    ctx.report.results = res;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"csgkit: constrained stochastic game toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--out-dir", common.out_dir, "directory for output files");
    app.add_option("--seed", common.seed, "seed for every random choice");
    app.add_option("--tol", common.tol, "numerical tolerance for checks");

    std::string game, strat, concept_ = "approx";
    double eps = 0.0, target = 1e-8, eps0 = 0.2;
    int player = 0, restarts = 4, n = 3, profiles = 10;
    std::size_t trajectories = 10000;
    std::optional<double> gamma, epsilon;

    auto* ev = app.add_subcommand("evaluate", "exact costs of a strategy");
    ev->add_option("game", game)->required();
    ev->add_option("strategy", strat)->required();

    auto* br = app.add_subcommand("best-respond", "constrained best response of one player");
    br->add_option("game", game)->required();
    br->add_option("strategy", strat)->required();
    br->add_option("--player", player);

    auto* ver = app.add_subcommand("verify", "certify an equilibrium");
    ver->add_option("game", game)->required();
    ver->add_option("strategy", strat)->required();
    ver->add_option("--concept", concept_)->check(CLI::IsMember({"approx", "eps", "weak-correlated"}));
    ver->add_option("--epsilon", eps);

    auto* sol = app.add_subcommand("solve", "search for an approximate equilibrium");
    sol->add_option("game", game)->required();
    sol->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    sol->add_option("--target-eps", target);

    auto* dis = app.add_subcommand("discretize", "partition a grid spec and build its surrogate");
    dis->add_option("spec", game)->required();
    auto* og = dis->add_option("--gamma", gamma);
    auto* oe = dis->add_option("--epsilon", epsilon);
    og->excludes(oe);
    oe->excludes(og);

    auto* tr = app.add_subcommand("transform", "bounded-cost transformation of a weighted game");
    tr->add_option("game", game)->required();
    tr->add_option("--profiles", profiles)->check(CLI::PositiveNumber);

    auto* sq = app.add_subcommand("sequence", "shrinking-epsilon equilibrium sequence");
    sq->add_option("game", game)->required();
    sq->add_option("--eps0", eps0);
    sq->add_option("--n", n);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of the costs");
    sim->add_option("game", game)->required();
    sim->add_option("strategy", strat)->required();
    sim->add_option("--trajectories", trajectories)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kParse;
    }
    if (dis->parsed() && !gamma && !epsilon) {
        std::cerr << "discretize: one of --gamma or --epsilon is required\n";
        return kParse;
    }

    Context ctx;
    ctx.common = &common;
    CLI::App* sub = app.get_subcommands().front();
    ctx.report.command = sub->get_name();
    ctx.report.seed = common.seed;
    std::ostringstream opts;
    for (const auto* opt : sub->get_options())
        if (opt->count()) opts << opt->get_name() << '=' << opt->as<std::string>() << ';';
    opts << "seed=" << common.seed << ";tol=" << common.tol;

    const auto t0 = std::chrono::steady_clock::now();
    int rc = kOk;
    try {
        if (sub == ev) rc = cmd_evaluate(ctx, game, strat);
        else if (sub == br) rc = cmd_best_respond(ctx, game, strat, player);
        else if (sub == ver) rc = cmd_verify(ctx, game, strat, concept_, eps);
        else if (sub == sol) rc = cmd_solve(ctx, game, restarts, target);
        else if (sub == dis) rc = cmd_discretize(ctx, game, gamma, epsilon);
        else if (sub == tr) rc = cmd_transform(ctx, game, profiles);
        else if (sub == sq) rc = cmd_sequence(ctx, game, eps0, n);
        else rc = cmd_simulate(ctx, game, strat, trajectories);
    } catch (const io::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const io::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const AssumptionViolation& e) {
        std::cerr << "assumption violated: " << e.what() << "\n";
        return kValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolver;
    }
    ctx.report.timing_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ctx.report.inputs_digest = io::inputs_digest(ctx.inputs, opts.str());
    const std::string text = io::dump(ctx.report.to_json());
    std::cout << text;
    ctx.write("report.json", text);
    return rc;
}

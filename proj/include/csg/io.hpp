#pragma once

// JSON documents for games, grid specs, strategies and run reports.
// Arrays are nested with explicit shapes; structural problems raise
// ParseError, semantic ones (stochasticity, bounds) ValidationError.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "csg/csg.hpp"

namespace csg::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kGameSchema = "csgkit/game@1";
inline constexpr const char* kStrategySchema = "csgkit/strategy@1";
inline constexpr const char* kPartitionSchema = "csgkit/partition@1";

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WesselsBlock {
    Vec omega;
    double beta = 0.0;
};

struct GameDocument {
    std::string name;
    std::string description;
    std::variant<FiniteCSG, ContinuousGameSpec> payload;
    std::optional<WesselsBlock> wessels;

    bool is_finite() const { return std::holds_alternative<FiniteCSG>(payload); }
    const FiniteCSG& finite() const { return std::get<FiniteCSG>(payload); }
    const ContinuousGameSpec& continuous() const { return std::get<ContinuousGameSpec>(payload); }
};

using StrategyDocument = std::variant<StationaryProfile, MarkovStrategy, CorrelatedStrategy>;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

namespace detail {

inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ParseError(where + ": expected an integer");
    return j.get<int>();
}

inline const json& array(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array");
    if (n != static_cast<std::size_t>(-1) && j.size() != n)
        throw ParseError(where + ": expected " + std::to_string(n) + " entries, found " + std::to_string(j.size()));
    return j;
}

inline Vec vec(const json& j, std::size_t n, const std::string& where) {
    array(j, n, where);
    Vec out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

inline std::vector<Vec> matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& where) {
    array(j, rows, where);
    std::vector<Vec> out;
    for (std::size_t r = 0; r < j.size(); ++r) out.push_back(vec(j[r], cols, where + "[" + std::to_string(r) + "]"));
    return out;
}

inline json to_json(const std::vector<Vec>& m) {
    json j = json::array();
    for (const auto& row : m) j.push_back(row);
    return j;
}

inline std::vector<int> action_counts(const json& j) {
    array(j, static_cast<std::size_t>(-1), "actions");
    std::vector<int> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(integer(j[k], "actions"));
        if (out.back() < 1) throw ParseError("actions: every player needs at least one action");
    }
    if (out.empty()) throw ParseError("actions: at least one player required");
    return out;
}

/// cost[i][l][s][p] from the flat [i][l][s * P + p] layout and back.
inline json cost_to_json(const std::vector<std::vector<Vec>>& cost, int S, int P) {
    json j = json::array();
    for (const auto& layers : cost) {
        json jl = json::array();
        for (const auto& tab : layers) {
            json js = json::array();
            for (int s = 0; s < S; ++s)
                js.push_back(Vec(tab.begin() + static_cast<std::ptrdiff_t>(s) * P,
                                 tab.begin() + static_cast<std::ptrdiff_t>(s + 1) * P));
            jl.push_back(js);
        }
        j.push_back(jl);
    }
    return j;
}

inline std::vector<std::vector<Vec>> cost_from_json(const json& j, int N, int L1, int S, int P) {
    array(j, N, "cost");
    std::vector<std::vector<Vec>> out(N, std::vector<Vec>(L1));
    for (int i = 0; i < N; ++i) {
        array(j[i], L1, "cost[" + std::to_string(i) + "]");
        for (int l = 0; l < L1; ++l) {
            const std::string where = "cost[" + std::to_string(i) + "][" + std::to_string(l) + "]";
            for (const auto& row : matrix(j[i][l], S, P, where)) out[i][l].insert(out[i][l].end(), row.begin(), row.end());
        }
    }
    return out;
}

/// kernel[s][p][y] with S rows of P rows of Y entries.
inline json kernel_to_json(const Vec& t, int S, int P, int Y) {
    json j = json::array();
    for (int s = 0; s < S; ++s) {
        json jp = json::array();
        for (int p = 0; p < P; ++p) {
            const auto b = t.begin() + (static_cast<std::ptrdiff_t>(s) * P + p) * Y;
            jp.push_back(Vec(b, b + Y));
        }
        j.push_back(jp);
    }
    return j;
}

inline Vec kernel_from_json(const json& j, int S, int P, int Y, const char* name) {
    array(j, S, name);
    Vec out;
    for (int s = 0; s < S; ++s)
        for (const auto& row : matrix(j[s], P, Y, std::string(name) + "[" + std::to_string(s) + "]"))
            out.insert(out.end(), row.begin(), row.end());
    return out;
}

inline json strategy_rows(const StationaryStrategy& s) { return to_json(s.rows); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Games

inline json game_to_json(const GameDocument& doc) {
    json j;
    j["schema"] = kGameSchema;
    j["name"] = doc.name;
    j["description"] = doc.description;
    if (doc.is_finite()) {
        const FiniteCSG& g = doc.finite();
        j["kind"] = "finite";
        j["actions"] = g.profiles.action_counts();
        j["states"] = g.num_states;
        j["layers"] = g.num_layers;
        j["alpha"] = g.alpha;
        j["bound"] = g.bound;
        j["eta"] = g.eta;
        j["cost"] = detail::cost_to_json(g.cost, g.num_states, g.num_profiles());
        j["transition"] = detail::kernel_to_json(g.transition, g.num_states, g.num_profiles(), g.num_states);
        j["kappa"] = detail::to_json(g.kappa);
    } else {
        const ContinuousGameSpec& g = doc.continuous();
        j["kind"] = "continuous";
        j["actions"] = g.profiles.action_counts();
        j["points"] = g.points;
        j["mu"] = g.mu;
        j["layers"] = g.num_layers;
        j["alpha"] = g.alpha;
        j["bound"] = g.bound;
        j["eta"] = g.eta;
        j["cost"] = detail::cost_to_json(g.cost, g.num_points(), g.num_profiles());
        j["density"] = detail::kernel_to_json(g.density, g.num_points(), g.num_profiles(), g.num_points());
        j["kappa"] = detail::to_json(g.kappa);
    }
    if (doc.wessels) j["wessels"] = {{"omega", doc.wessels->omega}, {"beta", doc.wessels->beta}};
    return j;
}

/// Parses and validates; unbounded costs are accepted when a weight block is present.
inline GameDocument game_from_json(const json& j) {
    using namespace detail;
    if (!j.is_object()) throw ParseError("game document must be an object");
    if (!field(j, "schema").is_string() || j["schema"] != kGameSchema) throw ParseError("unsupported game schema");
    GameDocument doc;
    for (const char* key : {"name", "description"})
        if (j.contains(key) && !j[key].is_string()) throw ParseError(std::string(key) + ": expected a string");
    doc.name = j.value("name", "");
    doc.description = j.value("description", "");
    const json& kind = field(j, "kind");
    const std::vector<int> counts = action_counts(field(j, "actions"));
    const int N = static_cast<int>(counts.size());
    int P = 1;
    for (int c : counts) P *= c;
    const int L1 = integer(field(j, "layers"), "layers");
    if (L1 < 1) throw ParseError("layers: at least the objective layer required");
    const double alpha = number(field(j, "alpha"), "alpha");
    const double bound = number(field(j, "bound"), "bound");

    if (kind == "finite") {
        const int S = integer(field(j, "states"), "states");
        if (S < 1) throw ParseError("states: at least one state required");
        FiniteCSG g = FiniteCSG::zeros(counts, S, L1, alpha, bound);
        g.eta = vec(field(j, "eta"), S, "eta");
        g.cost = cost_from_json(field(j, "cost"), N, L1, S, P);
        g.transition = kernel_from_json(field(j, "transition"), S, P, S, "transition");
        g.kappa = matrix(field(j, "kappa"), N, L1 - 1, "kappa");
        doc.payload = std::move(g);
    } else if (kind == "continuous") {
        const Vec points = vec(field(j, "points"), static_cast<std::size_t>(-1), "points");
        const int M = static_cast<int>(points.size());
        if (M < 1) throw ParseError("points: at least one grid point required");
        ContinuousGameSpec g = ContinuousGameSpec::zeros(counts, points, L1, alpha, bound);
        g.mu = vec(field(j, "mu"), M, "mu");
        g.eta = vec(field(j, "eta"), M, "eta");
        g.cost = cost_from_json(field(j, "cost"), N, L1, M, P);
        g.density = kernel_from_json(field(j, "density"), M, P, M, "density");
        g.kappa = matrix(field(j, "kappa"), N, L1 - 1, "kappa");
        doc.payload = std::move(g);
    } else {
        throw ParseError("kind must be 'finite' or 'continuous'");
    }

    if (j.contains("wessels")) {
        const json& w = j["wessels"];
        WesselsBlock b;
        b.beta = number(field(w, "beta"), "wessels.beta");
        b.omega = vec(field(w, "omega"), doc.is_finite() ? doc.finite().num_states : 0, "wessels.omega");
        if (!doc.is_finite()) throw ParseError("wessels block requires a finite game");
        doc.wessels = std::move(b);
    }

    ValidationReport rep = doc.is_finite() ? validate_game(doc.finite()) : validate_spec(doc.continuous());
    if (doc.wessels) {
        // costs are only bounded after the transformation
        std::erase_if(rep.findings, [](const Finding& f) { return f.code == "cost_bound"; });
    }
    if (!rep.ok()) throw ValidationError("invalid game:\n" + rep.summary());
    return doc;
}

inline GameDocument parse_game(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    try {
        return game_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
}

inline std::string write_game(const GameDocument& doc) { return dump(game_to_json(doc)); }

inline GameDocument load_game(const std::string& path) { return parse_game(read_file(path)); }

// ---------------------------------------------------------------------------
// Strategies

inline const char* class_tag(const StrategyDocument& s) {
    if (std::holds_alternative<StationaryProfile>(s)) return "stationary";
    if (std::holds_alternative<MarkovStrategy>(s)) return "markov";
    return "correlated";
}

inline json strategy_to_json(const StrategyDocument& s) {
    json j;
    j["schema"] = kStrategySchema;
    j["class"] = class_tag(s);
    if (const auto* f = std::get_if<StationaryProfile>(&s)) {
        json players = json::array();
        for (const auto& fi : f->players) players.push_back(detail::strategy_rows(fi));
        j["players"] = players;
    } else if (const auto* m = std::get_if<MarkovStrategy>(&s)) {
        j["player"] = m->player;
        json head = json::array();
        for (const auto& h : m->head) head.push_back(detail::strategy_rows(h));
        j["head"] = head;
        j["tail"] = detail::strategy_rows(m->tail);
    } else {
        j["rows"] = detail::to_json(std::get<CorrelatedStrategy>(s).rows);
    }
    return j;
}

inline StationaryStrategy strategy_from_rows(const json& j, const std::string& where) {
    detail::array(j, static_cast<std::size_t>(-1), where);
    StationaryStrategy s;
    for (std::size_t k = 0; k < j.size(); ++k)
        s.rows.push_back(detail::vec(j[k], static_cast<std::size_t>(-1), where + "[" + std::to_string(k) + "]"));
    return s;
}

/// Shapes are checked against the game when one is given.
inline StrategyDocument strategy_from_json(const json& j, const FiniteCSG* g = nullptr) {
    using namespace detail;
    if (!j.is_object()) throw ParseError("strategy document must be an object");
    if (!field(j, "schema").is_string() || j["schema"] != kStrategySchema) throw ParseError("unsupported strategy schema");
    const json& cls = field(j, "class");
    StrategyDocument out;
    if (cls == "stationary") {
        StationaryProfile f;
        const json& players = array(field(j, "players"), static_cast<std::size_t>(-1), "players");
        for (std::size_t i = 0; i < players.size(); ++i)
            f.players.push_back(strategy_from_rows(players[i], "players[" + std::to_string(i) + "]"));
        if (g) {
            try {
                check_profile(*g, f);
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
        }
        out = std::move(f);
    } else if (cls == "markov") {
        MarkovStrategy m;
        m.player = integer(field(j, "player"), "player");
        const json& head = array(field(j, "head"), static_cast<std::size_t>(-1), "head");
        for (std::size_t t = 0; t < head.size(); ++t)
            m.head.push_back(strategy_from_rows(head[t], "head[" + std::to_string(t) + "]"));
        m.tail = strategy_from_rows(field(j, "tail"), "tail");
        if (g) {
            if (m.player < 0 || m.player >= g->players()) throw ValidationError("markov strategy: invalid player");
            try {
                for (const auto& h : m.head) check_strategy(h, g->num_states, g->profiles.actions(m.player), "head");
                check_strategy(m.tail, g->num_states, g->profiles.actions(m.player), "tail");
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
        }
        out = std::move(m);
    } else if (cls == "correlated") {
        CorrelatedStrategy psi;
        psi.rows = matrix(field(j, "rows"), static_cast<std::size_t>(-1), static_cast<std::size_t>(-1), "rows");
        if (g) {
            try {
                check_correlated(*g, psi);
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
        }
        out = std::move(psi);
    } else {
        throw ParseError("class must be stationary, markov or correlated");
    }
    return out;
}

inline StrategyDocument parse_strategy(const std::string& text, const FiniteCSG* g = nullptr) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    try {
        return strategy_from_json(j, g);
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
}

inline std::string write_strategy(const StrategyDocument& s) { return dump(strategy_to_json(s)); }

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const EquilibriumCertificate& c) {
    json j;
    j["concept"] = to_string(c.kind);
    j["epsilon"] = c.epsilon;
    j["certified_eps"] = c.certified_eps;
    j["pass"] = c.pass;
    json players = json::array();
    for (const auto& p : c.players) {
        json jp;
        jp["player"] = p.player;
        jp["costs"] = p.costs;
        jp["feasibility_excess"] = p.feasibility_excess;
        jp["vacuous"] = p.vacuous;
        if (p.vacuous) {
            jp["gap"] = nullptr;
            jp["best_response_value"] = nullptr;
        } else {
            jp["gap"] = p.gap;
            jp["best_response_value"] = p.best_response_value;
        }
        jp["lp_primal_residual"] = p.lp_primal_residual;
        jp["lp_duality_gap"] = p.lp_duality_gap;
        players.push_back(jp);
    }
    j["players"] = players;
    return j;
}

inline json to_json(const StateCertificate& c) {
    json j;
    j["concept"] = "eps";
    j["epsilon"] = c.epsilon;
    j["max_gap"] = c.max_gap;
    j["pass"] = c.pass;
    j["gaps"] = detail::to_json(c.gaps);
    j["optimal_values"] = detail::to_json(c.optimal_values);
    return j;
}

inline json to_json(const CostVector& v) {
    json j;
    j["J"] = detail::to_json(v.J);
    json per = json::array();
    for (const auto& layers : v.Jx) per.push_back(detail::to_json(layers));
    j["Jx"] = per;
    j["residual"] = v.residual;
    return j;
}

inline json to_json(const Partition& p) {
    json j;
    j["schema"] = kPartitionSchema;
    j["gamma"] = p.gamma;
    j["representative"] = p.representative;
    json cells = json::array();
    for (const auto& c : p.cells) cells.push_back(c);
    j["cells"] = cells;
    return j;
}

inline json to_json(const MixingCheck& m) {
    json j;
    j["player"] = m.player;
    j["zeta"] = std::isfinite(m.zeta) ? json(m.zeta) : json(nullptr);
    j["excess"] = m.excess;
    j["applicable"] = m.applicable;
    if (m.applicable) {
        j["xi"] = m.xi;
        j["linearity_residual"] = m.linearity_residual;
        j["recovery_residual"] = m.recovery_residual;
        j["flow_residual"] = m.flow_residual;
        j["mixed_excess"] = m.mixed_excess;
    }
    return j;
}

struct Report {
    std::string command;
    std::string inputs_digest;
    std::uint64_t seed = 0;
    json results = json::object();
    double timing_ms = 0.0;

    json to_json() const {
        json j;
        j["command"] = command;
        j["inputs_digest"] = inputs_digest;
        j["seed"] = seed;
        j["results"] = results;
        j["timing_ms"] = timing_ms;
        return j;
    }
};

/// Digest over the raw bytes of every input file and the option string, in order.
inline std::string inputs_digest(const std::vector<std::string>& contents, const std::string& options) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& c : contents) {
        h = fnv1a(c, h);
        h = fnv1a(std::string_view("\0", 1), h);
    }
    return hex64(fnv1a(options, h));
}

}  // namespace csg::io

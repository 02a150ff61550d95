#pragma once

// JSON run configuration: a strict, versioned schema with defaults for every
// field (except the mandatory "version"), recursive rejection of unknown
// keys, and builders that turn a parsed configuration into the grid and
// problem objects used by the commands.
//
// Data fields ("u_T", "p_0") are either expression strings in the spatial
// variables x, y (see expr.hpp) or {"file": "<path>"} references to slice
// files in the binary field format (see field_io.hpp).

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfglab/carleman.hpp"
#include "mfglab/expr.hpp"
#include "mfglab/field_io.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

/// Malformed configuration or command usage; the CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const char* where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw ConfigError(std::string(where) + ": unknown key \"" + it.key() + "\"");
    }
}

inline double get_num(const json& j, const char* key, double dflt, const char* where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number())
        throw ConfigError(std::string(where) + "." + key + ": expected a number");
    return j[key].get<double>();
}

inline bool is_nonneg_integer(const json& v) {
    return v.is_number_unsigned() ||
           (v.is_number_integer() && v.get<long long>() >= 0);
}

inline std::size_t get_size(const json& j, const char* key, std::size_t dflt,
                            const char* where) {
    if (!j.contains(key)) return dflt;
    if (!is_nonneg_integer(j[key]))
        throw ConfigError(std::string(where) + "." + key +
                          ": expected a nonnegative integer");
    return j[key].get<std::size_t>();
}

inline bool get_bool(const json& j, const char* key, bool dflt, const char* where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_boolean())
        throw ConfigError(std::string(where) + "." + key + ": expected a boolean");
    return j[key].get<bool>();
}

inline std::string get_str(const json& j, const char* key, const std::string& dflt,
                           const char* where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_string())
        throw ConfigError(std::string(where) + "." + key + ": expected a string");
    return j[key].get<std::string>();
}

template <typename T>
inline std::vector<T> get_vec(const json& j, const char* key, std::vector<T> dflt,
                              const char* where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_array())
        throw ConfigError(std::string(where) + "." + key + ": expected an array");
    std::vector<T> out;
    for (const json& e : j[key]) {
        if (!e.is_number())
            throw ConfigError(std::string(where) + "." + key +
                              ": expected an array of numbers");
        out.push_back(e.get<T>());
    }
    return out;
}

}  // namespace detail

struct GridConfig {
    std::size_t n_dim = 1;
    std::vector<std::size_t> nx = {201};
    std::size_t nt = 401;
    std::vector<double> lengths = {1.0};
    double T = 0.3;
};

/// Expression string or binary slice file; exactly one is set.
struct DataEntry {
    std::string expression;
    std::string file;

    static DataEntry expr(std::string e) { return {std::move(e), {}}; }
    static DataEntry from_json(const nlohmann::json& j, const char* where) {
        if (j.is_string()) return {j.get<std::string>(), {}};
        if (j.is_object()) {
            detail::check_keys(j, where, {"file"});
            if (!j.contains("file") || !j["file"].is_string())
                throw ConfigError(std::string(where) + ": expected {\"file\": \"<path>\"}");
            return {{}, j["file"].get<std::string>()};
        }
        throw ConfigError(std::string(where) +
                          ": expected an expression string or a file reference");
    }
    nlohmann::json to_json() const {
        if (!file.empty()) return nlohmann::json{{"file", file}};
        return expression;
    }
};

struct ElasticityConfig {
    std::string variant = "constant";  // constant | smooth
    double value = 1.0;                // constant
    double c0 = 1.0, c1 = 0.25;        // smooth
};

struct KernelConfig {
    std::string variant = "gaussian";  // zero | constant | gaussian
    double amplitude = 0.5;
    double width = 0.2;
};

struct InteractionConfig {
    std::string variant = "linear";  // zero | linear | saturating
    double gamma1 = 0.5, gamma2 = 0.5;
};

struct ProblemConfig {
    double beta = 0.1;
    ElasticityConfig elasticity;
    KernelConfig kernel;
    InteractionConfig interaction;
    DataEntry u_T = DataEntry::expr("cos(pi*x)");
    DataEntry p_0 = DataEntry::expr("1 + 0.5*cos(2*pi*x)");
    double N3 = 10.0;
    double N4 = 10.0;
};

struct CarlemanConfig {
    std::vector<double> lambda_grid = {2.5, 3.0, 4.0, 6.0, 8.0};
    bool include_lambda0 = true;
    std::string mode = "corrected";    // corrected | literal-paper
    std::optional<double> shift;       // empty = default_shift(T)
};

struct SolverSection {
    double damping = 0.5;
    double picard_tol = 1e-8;
    std::size_t max_picard = 200;
    double noise_level = 0.0;  ///< synthetic measurement noise for solve output
};

struct CorpusConfig {
    std::size_t count = 20;
    std::size_t kmax = 7;
    std::size_t mmax = 7;
    double decay = 3.0;
    double amplitude = 1.0;
};

struct StabilityConfig {
    std::vector<double> deltas = {1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    bool perturb_u_T = true;
    bool perturb_p_0 = true;
    std::size_t kmax = 8;
    double slope_min = 0.85;
    double slope_max = 1.15;
    double ratio_bound = 10.0;  ///< ratio_max / ratio_min must stay below this
};

struct RunConfig {
    int version = 1;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string output_dir = "out";
    GridConfig grid;
    ProblemConfig problem;
    CarlemanConfig carleman;
    SolverSection solver;
    CorpusConfig corpus;
    StabilityConfig stability;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
};

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    using namespace detail;
    check_keys(j, "config",
               {"version", "seed", "jobs", "output_dir", "grid", "problem", "carleman",
                "solver", "corpus", "stability"});
    if (!j.contains("version"))
        throw ConfigError("config: missing required key \"version\"");
    if (!j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw ConfigError("config.version: expected the integer 1");

    RunConfig c;
    c.seed = get_size(j, "seed", 1, "config");
    c.jobs = static_cast<unsigned>(get_size(j, "jobs", 1, "config"));
    if (c.jobs == 0) throw ConfigError("config.jobs: must be at least 1");
    c.output_dir = get_str(j, "output_dir", "out", "config");

    if (j.contains("grid")) {
        const json& g = j["grid"];
        check_keys(g, "grid", {"n_dim", "nx", "nt", "lengths", "T"});
        c.grid.n_dim = get_size(g, "n_dim", 1, "grid");
        if (c.grid.n_dim != 1 && c.grid.n_dim != 2)
            throw ConfigError("grid.n_dim: must be 1 or 2");
        c.grid.nx = c.grid.n_dim == 1 ? std::vector<std::size_t>{201}
                                      : std::vector<std::size_t>{41, 41};
        c.grid.lengths = std::vector<double>(c.grid.n_dim, 1.0);
        c.grid.nt = c.grid.n_dim == 1 ? 401 : 101;
        if (g.contains("nx")) {
            if (!g["nx"].is_array())
                throw ConfigError("grid.nx: expected an array of node counts");
            c.grid.nx.clear();
            for (const json& e : g["nx"]) {
                if (!detail::is_nonneg_integer(e))
                    throw ConfigError("grid.nx: expected positive integers");
                c.grid.nx.push_back(e.get<std::size_t>());
            }
        }
        c.grid.lengths = get_vec<double>(g, "lengths", c.grid.lengths, "grid");
        c.grid.nt = get_size(g, "nt", c.grid.nt, "grid");
        c.grid.T = get_num(g, "T", 0.3, "grid");
        if (c.grid.nx.size() != c.grid.n_dim)
            throw ConfigError("grid.nx: expected one entry per dimension");
        if (c.grid.lengths.size() != c.grid.n_dim)
            throw ConfigError("grid.lengths: expected one entry per dimension");
    }

    if (j.contains("problem")) {
        const json& p = j["problem"];
        check_keys(p, "problem",
                   {"beta", "elasticity", "kernel", "interaction", "data", "bounds"});
        c.problem.beta = get_num(p, "beta", 0.1, "problem");
        if (p.contains("elasticity")) {
            const json& e = p["elasticity"];
            check_keys(e, "problem.elasticity", {"variant", "value", "c0", "c1"});
            c.problem.elasticity.variant =
                get_str(e, "variant", "constant", "problem.elasticity");
            const std::string& v = c.problem.elasticity.variant;
            if (v == "constant") {
                check_keys(e, "problem.elasticity", {"variant", "value"});
                c.problem.elasticity.value =
                    get_num(e, "value", 1.0, "problem.elasticity");
            } else if (v == "smooth") {
                check_keys(e, "problem.elasticity", {"variant", "c0", "c1"});
                c.problem.elasticity.c0 = get_num(e, "c0", 1.0, "problem.elasticity");
                c.problem.elasticity.c1 = get_num(e, "c1", 0.25, "problem.elasticity");
            } else {
                throw ConfigError(
                    "problem.elasticity.variant: expected \"constant\" or \"smooth\"");
            }
        }
        if (p.contains("kernel")) {
            const json& k = p["kernel"];
            check_keys(k, "problem.kernel", {"variant", "amplitude", "width"});
            c.problem.kernel.variant = get_str(k, "variant", "gaussian", "problem.kernel");
            const std::string& v = c.problem.kernel.variant;
            if (v == "zero") {
                check_keys(k, "problem.kernel", {"variant"});
            } else if (v == "constant") {
                check_keys(k, "problem.kernel", {"variant", "amplitude"});
                c.problem.kernel.amplitude =
                    get_num(k, "amplitude", 0.5, "problem.kernel");
            } else if (v == "gaussian") {
                c.problem.kernel.amplitude =
                    get_num(k, "amplitude", 0.5, "problem.kernel");
                c.problem.kernel.width = get_num(k, "width", 0.2, "problem.kernel");
            } else {
                throw ConfigError(
                    "problem.kernel.variant: expected \"zero\", \"constant\" or "
                    "\"gaussian\"");
            }
        }
        if (p.contains("interaction")) {
            const json& i = p["interaction"];
            check_keys(i, "problem.interaction", {"variant", "gamma1", "gamma2"});
            c.problem.interaction.variant =
                get_str(i, "variant", "linear", "problem.interaction");
            const std::string& v = c.problem.interaction.variant;
            if (v == "zero") {
                check_keys(i, "problem.interaction", {"variant"});
            } else if (v == "linear" || v == "saturating") {
                c.problem.interaction.gamma1 =
                    get_num(i, "gamma1", 0.5, "problem.interaction");
                c.problem.interaction.gamma2 =
                    get_num(i, "gamma2", 0.5, "problem.interaction");
            } else {
                throw ConfigError(
                    "problem.interaction.variant: expected \"zero\", \"linear\" or "
                    "\"saturating\"");
            }
        }
        if (p.contains("data")) {
            const json& d = p["data"];
            check_keys(d, "problem.data", {"u_T", "p_0"});
            if (d.contains("u_T"))
                c.problem.u_T = DataEntry::from_json(d["u_T"], "problem.data.u_T");
            if (d.contains("p_0"))
                c.problem.p_0 = DataEntry::from_json(d["p_0"], "problem.data.p_0");
        }
        if (p.contains("bounds")) {
            const json& b = p["bounds"];
            check_keys(b, "problem.bounds", {"N3", "N4"});
            c.problem.N3 = get_num(b, "N3", 10.0, "problem.bounds");
            c.problem.N4 = get_num(b, "N4", 10.0, "problem.bounds");
        }
    }

    if (j.contains("carleman")) {
        const json& k = j["carleman"];
        check_keys(k, "carleman", {"lambda_grid", "include_lambda0", "mode", "shift"});
        c.carleman.lambda_grid =
            get_vec<double>(k, "lambda_grid", c.carleman.lambda_grid, "carleman");
        c.carleman.include_lambda0 =
            get_bool(k, "include_lambda0", true, "carleman");
        c.carleman.mode = get_str(k, "mode", "corrected", "carleman");
        if (c.carleman.mode != "corrected" && c.carleman.mode != "literal-paper")
            throw ConfigError(
                "carleman.mode: expected \"corrected\" or \"literal-paper\"");
        if (k.contains("shift")) {
            if (k["shift"].is_string()) {
                if (k["shift"].get<std::string>() != "default")
                    throw ConfigError(
                        "carleman.shift: expected \"default\" or a number > 2");
            } else if (k["shift"].is_number()) {
                c.carleman.shift = k["shift"].get<double>();
                if (!(*c.carleman.shift > 2.0))
                    throw ConfigError("carleman.shift: must be greater than 2");
            } else {
                throw ConfigError("carleman.shift: expected \"default\" or a number");
            }
        }
        for (double l : c.carleman.lambda_grid)
            if (!(l >= 2.0))
                throw ConfigError("carleman.lambda_grid: entries must be >= 2");
    }

    if (j.contains("solver")) {
        const json& s = j["solver"];
        check_keys(s, "solver", {"damping", "picard_tol", "max_picard", "noise_level"});
        c.solver.damping = get_num(s, "damping", 0.5, "solver");
        c.solver.picard_tol = get_num(s, "picard_tol", 1e-8, "solver");
        c.solver.max_picard = get_size(s, "max_picard", 200, "solver");
        c.solver.noise_level = get_num(s, "noise_level", 0.0, "solver");
        if (c.solver.noise_level < 0.0)
            throw ConfigError("solver.noise_level: must be nonnegative");
    }

    if (j.contains("corpus")) {
        const json& s = j["corpus"];
        check_keys(s, "corpus", {"count", "kmax", "mmax", "decay", "amplitude"});
        c.corpus.count = get_size(s, "count", 20, "corpus");
        c.corpus.kmax = get_size(s, "kmax", 7, "corpus");
        c.corpus.mmax = get_size(s, "mmax", 7, "corpus");
        c.corpus.decay = get_num(s, "decay", 3.0, "corpus");
        c.corpus.amplitude = get_num(s, "amplitude", 1.0, "corpus");
        if (c.corpus.count == 0) throw ConfigError("corpus.count: must be at least 1");
    }

    if (j.contains("stability")) {
        const json& s = j["stability"];
        check_keys(s, "stability",
                   {"deltas", "seeds", "perturb_u_T", "perturb_p_0", "kmax",
                    "slope_band", "ratio_bound"});
        c.stability.deltas = get_vec<double>(s, "deltas", c.stability.deltas, "stability");
        c.stability.seeds =
            get_vec<std::uint64_t>(s, "seeds", c.stability.seeds, "stability");
        c.stability.perturb_u_T = get_bool(s, "perturb_u_T", true, "stability");
        c.stability.perturb_p_0 = get_bool(s, "perturb_p_0", true, "stability");
        c.stability.kmax = get_size(s, "kmax", 8, "stability");
        if (s.contains("slope_band")) {
            const std::vector<double> band =
                get_vec<double>(s, "slope_band", {}, "stability");
            if (band.size() != 2 || !(band[0] < band[1]))
                throw ConfigError("stability.slope_band: expected [low, high]");
            c.stability.slope_min = band[0];
            c.stability.slope_max = band[1];
        }
        c.stability.ratio_bound = get_num(s, "ratio_bound", 10.0, "stability");
        if (!(c.stability.ratio_bound > 1.0))
            throw ConfigError("stability.ratio_bound: must be greater than 1");
        for (double d : c.stability.deltas)
            if (!(d > 0.0))
                throw ConfigError("stability.deltas: entries must be positive");
        if (c.stability.deltas.empty() || c.stability.seeds.empty())
            throw ConfigError("stability: deltas and seeds must be nonempty");
        if (!c.stability.perturb_u_T && !c.stability.perturb_p_0)
            throw ConfigError("stability: at least one of perturb_u_T, perturb_p_0");
    }

    return c;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

inline nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["output_dir"] = output_dir;
    j["grid"] = {{"n_dim", grid.n_dim},
                 {"nx", grid.nx},
                 {"nt", grid.nt},
                 {"lengths", grid.lengths},
                 {"T", grid.T}};
    nlohmann::json el;
    if (problem.elasticity.variant == "constant")
        el = {{"variant", "constant"}, {"value", problem.elasticity.value}};
    else
        el = {{"variant", "smooth"},
              {"c0", problem.elasticity.c0},
              {"c1", problem.elasticity.c1}};
    nlohmann::json ker;
    if (problem.kernel.variant == "zero")
        ker = {{"variant", "zero"}};
    else if (problem.kernel.variant == "constant")
        ker = {{"variant", "constant"}, {"amplitude", problem.kernel.amplitude}};
    else
        ker = {{"variant", "gaussian"},
               {"amplitude", problem.kernel.amplitude},
               {"width", problem.kernel.width}};
    nlohmann::json inter;
    if (problem.interaction.variant == "zero")
        inter = {{"variant", "zero"}};
    else
        inter = {{"variant", problem.interaction.variant},
                 {"gamma1", problem.interaction.gamma1},
                 {"gamma2", problem.interaction.gamma2}};
    j["problem"] = {{"beta", problem.beta},
                    {"elasticity", el},
                    {"kernel", ker},
                    {"interaction", inter},
                    {"data", {{"u_T", problem.u_T.to_json()},
                              {"p_0", problem.p_0.to_json()}}},
                    {"bounds", {{"N3", problem.N3}, {"N4", problem.N4}}}};
    j["carleman"] = {{"lambda_grid", carleman.lambda_grid},
                     {"include_lambda0", carleman.include_lambda0},
                     {"mode", carleman.mode}};
    if (carleman.shift)
        j["carleman"]["shift"] = *carleman.shift;
    else
        j["carleman"]["shift"] = "default";
    j["solver"] = {{"damping", solver.damping},
                   {"picard_tol", solver.picard_tol},
                   {"max_picard", solver.max_picard},
                   {"noise_level", solver.noise_level}};
    j["corpus"] = {{"count", corpus.count},
                   {"kmax", corpus.kmax},
                   {"mmax", corpus.mmax},
                   {"decay", corpus.decay},
                   {"amplitude", corpus.amplitude}};
    j["stability"] = {{"deltas", stability.deltas},
                      {"seeds", stability.seeds},
                      {"perturb_u_T", stability.perturb_u_T},
                      {"perturb_p_0", stability.perturb_p_0},
                      {"kmax", stability.kmax},
                      {"slope_band", {stability.slope_min, stability.slope_max}},
                      {"ratio_bound", stability.ratio_bound}};
    return j;
}

// ---------------------------------------------------------------------------
// Builders.
// ---------------------------------------------------------------------------

inline SpaceTimeGrid build_grid(const RunConfig& c) {
    try {
        if (c.grid.n_dim == 1)
            return SpaceTimeGrid::box1d(c.grid.nx[0], c.grid.lengths[0], c.grid.nt,
                                        c.grid.T);
        return SpaceTimeGrid::box2d(c.grid.nx[0], c.grid.nx[1], c.grid.lengths[0],
                                    c.grid.lengths[1], c.grid.nt, c.grid.T);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
}

namespace detail {

inline SpatialSlice build_slice(const DataEntry& d, const SpaceTimeGrid& grid,
                                const char* where) {
    if (!d.file.empty()) {
        try {
            return load_slice(d.file, grid);
        } catch (const std::exception& e) {
            throw ConfigError(std::string(where) + ": " + e.what());
        }
    }
    try {
        const Expression e = Expression::parse(d.expression);
        return SpatialSlice::from_function(
            grid, [&](double x, double y) { return e.eval(x, y); });
    } catch (const ExprError& err) {
        throw ConfigError(std::string(where) + ": " + err.what());
    }
}

}  // namespace detail

inline MfgProblem build_problem(const RunConfig& c, const SpaceTimeGrid& grid) {
    ElasticitySpec el = c.problem.elasticity.variant == "constant"
                            ? ElasticitySpec::constant(c.problem.elasticity.value)
                            : ElasticitySpec::smooth(c.problem.elasticity.c0,
                                                     c.problem.elasticity.c1);
    KernelSpec ker = KernelSpec::zero();
    if (c.problem.kernel.variant == "constant")
        ker = KernelSpec::constant(c.problem.kernel.amplitude);
    else if (c.problem.kernel.variant == "gaussian")
        ker = KernelSpec::gaussian(c.problem.kernel.amplitude, c.problem.kernel.width);
    InteractionSpec inter = InteractionSpec::zero();
    if (c.problem.interaction.variant == "linear")
        inter = InteractionSpec::linear(c.problem.interaction.gamma1,
                                        c.problem.interaction.gamma2);
    else if (c.problem.interaction.variant == "saturating")
        inter = InteractionSpec::saturating(c.problem.interaction.gamma1,
                                            c.problem.interaction.gamma2);

    SpatialSlice u_T = detail::build_slice(c.problem.u_T, grid, "problem.data.u_T");
    SpatialSlice p_0 = detail::build_slice(c.problem.p_0, grid, "problem.data.p_0");
    try {
        return MfgProblem::make(grid, c.problem.beta, el, ker, inter, std::move(u_T),
                                std::move(p_0), c.problem.N3, c.problem.N4);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
}

inline double resolve_shift(const RunConfig& c) {
    return c.carleman.shift ? *c.carleman.shift : default_shift(c.grid.T);
}

inline InitialTermMode resolve_mode(const RunConfig& c) {
    return c.carleman.mode == "corrected" ? InitialTermMode::weighted
                                          : InitialTermMode::unweighted;
}

/// Campaign lambda values: the configured grid, plus lambda0 when requested,
/// sorted and deduplicated.
inline std::vector<double> lambda_list(const RunConfig& c) {
    std::vector<double> ls = c.carleman.lambda_grid;
    if (c.carleman.include_lambda0) {
        const double a = resolve_shift(c);
        ls.push_back(CarlemanParams(c.grid.T, a, 2.0).lambda0());
    }
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    return ls;
}

}  // namespace mfglab

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mfglab/config.hpp"
#include "mfglab/report.hpp"

using namespace mfglab;
using nlohmann::json;
using Catch::Matchers::ContainsSubstring;

namespace {
namespace fs = std::filesystem;

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "mfglab_test_config";
    fs::create_directories(d);
    return d;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}
}  // namespace

TEST_CASE("a bare versioned object yields the documented defaults") {
    const RunConfig c = RunConfig::from_json(json{{"version", 1}});
    CHECK(c.seed == 1);
    CHECK(c.jobs == 1);
    CHECK(c.output_dir == "out");
    CHECK(c.grid.n_dim == 1);
    CHECK(c.grid.nx == std::vector<std::size_t>{201});
    CHECK(c.grid.nt == 401);
    CHECK(c.grid.T == 0.3);
    CHECK(c.problem.beta == 0.1);
    CHECK(c.problem.kernel.variant == "gaussian");
    CHECK(c.problem.interaction.variant == "linear");
    CHECK(c.problem.u_T.expression == "cos(pi*x)");
    CHECK(c.carleman.mode == "corrected");
    CHECK(c.carleman.include_lambda0);
    CHECK_FALSE(c.carleman.shift.has_value());
    CHECK(c.solver.damping == 0.5);
    CHECK(c.corpus.count == 20);
    CHECK(c.stability.deltas == std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4});
    CHECK(c.stability.seeds == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("serialization round trips to the identical document") {
    const RunConfig c = RunConfig::from_json(json{{"version", 1}});
    const json once = c.to_json();
    const json twice = RunConfig::from_json(once).to_json();
    CHECK(once == twice);

    json custom = once;
    custom["grid"]["nt"] = 31;
    custom["problem"]["beta"] = 0.25;
    custom["carleman"]["mode"] = "literal-paper";
    custom["carleman"]["shift"] = 3.5;
    const json reparsed = RunConfig::from_json(custom).to_json();
    CHECK(reparsed == custom);
}

TEST_CASE("unknown keys are rejected by name at every level") {
    CHECK_THROWS_WITH(RunConfig::from_json(json{{"version", 1}, {"speling", 1}}),
                      ContainsSubstring("speling"));
    CHECK_THROWS_WITH(
        RunConfig::from_json(json{{"version", 1}, {"grid", {{"hx", 0.1}}}}),
        ContainsSubstring("hx"));
    CHECK_THROWS_WITH(
        RunConfig::from_json(
            json{{"version", 1}, {"problem", {{"data", {{"u_T", "x"}, {"junk", 2}}}}}}),
        ContainsSubstring("junk"));
    CHECK_THROWS_WITH(
        RunConfig::from_json(json{{"version", 1}, {"stability", {{"slope", 1.0}}}}),
        ContainsSubstring("slope"));
    // Variant narrowing: a constant elasticity must not carry smooth knobs.
    CHECK_THROWS_WITH(
        RunConfig::from_json(json{
            {"version", 1},
            {"problem",
             {{"elasticity", {{"variant", "constant"}, {"value", 1.0}, {"c0", 2.0}}}}}}),
        ContainsSubstring("c0"));
    CHECK_THROWS_WITH(
        RunConfig::from_json(
            json{{"version", 1}, {"problem", {{"kernel", {{"variant", "zero"}, {"amplitude", 1.0}}}}}}),
        ContainsSubstring("amplitude"));
}

TEST_CASE("the version gate is strict") {
    CHECK_THROWS_AS(RunConfig::from_json(json::object()), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"version", 2}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"version", "1"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"version", 1.5}}), ConfigError);
}

TEST_CASE("malformed values are diagnosed as configuration errors") {
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"grid", {{"nt", "many"}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"grid", {{"n_dim", 3}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(
            json{{"version", 1}, {"grid", {{"nx", {11, 11}}}}}),  // 1-d grid, two entries
        ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"version", 1}, {"jobs", 0}}), ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"problem", {{"beta", "thick"}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(
            json{{"version", 1}, {"carleman", {{"lambda_grid", {1.5}}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"carleman", {{"mode", "hopeful"}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"carleman", {{"shift", 2.0}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"carleman", {{"shift", "auto"}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"stability", {{"deltas", {0.1, -0.1}}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{
            {"version", 1},
            {"stability", {{"perturb_u_T", false}, {"perturb_p_0", false}}}}),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"version", 1}, {"solver", {{"noise_level", -1.0}}}}),
        ConfigError);
}

TEST_CASE("config files are loaded and validated from disk") {
    const fs::path dir = scratch_dir();
    const fs::path good = dir / "good.json";
    std::ofstream(good) << R"({"version": 1, "grid": {"nt": 21}})";
    CHECK(RunConfig::from_file(good.string()).grid.nt == 21);

    CHECK_THROWS_WITH(RunConfig::from_file((dir / "missing.json").string()),
                      ContainsSubstring("cannot open"));
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_WITH(RunConfig::from_file(bad.string()),
                      ContainsSubstring("not valid JSON"));
}

TEST_CASE("grid and problem builders honor the configuration") {
    RunConfig c = RunConfig::from_json(json{{"version", 1}});
    const SpaceTimeGrid g1 = build_grid(c);
    CHECK(g1.dim == 1);
    CHECK(g1.nx == 201);
    CHECK(g1.nt == 401);
    CHECK(g1.T == 0.3);

    const RunConfig c2 =
        RunConfig::from_json(json{{"version", 1}, {"grid", {{"n_dim", 2}}}});
    const SpaceTimeGrid g2 = build_grid(c2);
    CHECK(g2.dim == 2);
    CHECK(g2.nx == 41);
    CHECK(g2.ny == 41);
    CHECK(g2.nt == 101);

    RunConfig tiny = RunConfig::from_json(
        json{{"version", 1}, {"grid", {{"nx", {1}}, {"nt", 5}}}});
    CHECK_THROWS_AS(build_grid(tiny), ConfigError);

    const MfgProblem pr = build_problem(c, g1);
    // u_T comes from the default expression "cos(pi*x)".
    CHECK(pr.u_T.at(0, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(pr.u_T.at(100, 0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(pr.u_T.at(200, 0) == Catch::Approx(-1.0).margin(1e-15));
    CHECK(pr.beta == 0.1);
}

TEST_CASE("data entries accept expressions or binary slice files") {
    const fs::path dir = scratch_dir();
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(21, 1.0, 5, 0.3);
    const SpatialSlice ramp = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + x; });
    const fs::path slice_path = dir / "ramp.bin";
    save_slice(ramp, slice_path.string());

    RunConfig c = RunConfig::from_json(json{
        {"version", 1},
        {"grid", {{"nx", {21}}, {"nt", 5}}},
        {"problem",
         {{"kernel", {{"variant", "zero"}}},
          {"interaction", {{"variant", "zero"}}},
          {"data",
           {{"u_T", "x^2"}, {"p_0", {{"file", slice_path.string()}}}}}}}});
    const SpaceTimeGrid grid = build_grid(c);
    const MfgProblem pr = build_problem(c, grid);
    CHECK(pr.u_T.at(10, 0) == Catch::Approx(0.25).margin(1e-15));
    // p_0 is the saved ramp, renormalized to unit mass (integral was 1.5).
    CHECK(pr.p_0.at(0, 0) == Catch::Approx(1.0 / 1.5).margin(1e-13));

    // A bad expression or a missing file surfaces as a configuration error.
    c.problem.u_T = DataEntry::expr("cos(pi*z)");
    CHECK_THROWS_AS(build_problem(c, grid), ConfigError);
    c.problem.u_T = DataEntry{{}, (dir / "nowhere.bin").string()};
    CHECK_THROWS_AS(build_problem(c, grid), ConfigError);

    CHECK_THROWS_AS(
        DataEntry::from_json(json{{"file", "a.bin"}, {"scale", 2}}, "problem.data.u_T"),
        ConfigError);
    CHECK_THROWS_AS(DataEntry::from_json(json(3.0), "problem.data.u_T"), ConfigError);
}

TEST_CASE("campaign lambda values are sorted, deduplicated and extended") {
    RunConfig c = RunConfig::from_json(json{
        {"version", 1}, {"carleman", {{"lambda_grid", {8.0, 2.5, 8.0}}}}});
    const double a = resolve_shift(c);
    CHECK(a == Catch::Approx(2.0 + std::sqrt(0.25 + 0.3)).epsilon(1e-15));
    const double l0 = CarlemanParams(c.grid.T, a, 2.0).lambda0();
    const std::vector<double> ls = lambda_list(c);
    REQUIRE(ls.size() == 3);
    CHECK(ls[0] == 2.5);
    CHECK(ls[1] == 8.0);
    CHECK(ls[2] == Catch::Approx(l0).epsilon(1e-15));

    c.carleman.include_lambda0 = false;
    CHECK(lambda_list(c).size() == 2);

    c.carleman.shift = 3.0;
    CHECK(resolve_shift(c) == 3.0);

    CHECK(resolve_mode(c) == InitialTermMode::weighted);
    c.carleman.mode = "literal-paper";
    CHECK(resolve_mode(c) == InitialTermMode::unweighted);
}

TEST_CASE("expression grammar: precedence, associativity, names") {
    CHECK(Expression::parse("2+3*4").eval(0) == 14.0);
    CHECK(Expression::parse("(2+3)*4").eval(0) == 20.0);
    CHECK(Expression::parse("2^3^2").eval(0) == 512.0);  // right associative
    CHECK(Expression::parse("-x^2").eval(3) == -9.0);
    CHECK(Expression::parse("2^-3").eval(0) == 0.125);
    CHECK(Expression::parse("(-x)^2").eval(3) == 9.0);
    CHECK(Expression::parse("1 - -2").eval(0) == 3.0);
    CHECK(Expression::parse("7/2").eval(0) == 3.5);
    CHECK(Expression::parse(".5 + x").eval(0.25) == 0.75);
    CHECK(Expression::parse("cos(pi)").eval(0) == Catch::Approx(-1.0).epsilon(1e-15));
    CHECK(Expression::parse("sqrt(abs(-4))").eval(0) == 2.0);
    CHECK(Expression::parse("exp(log(5))").eval(0) == Catch::Approx(5.0).epsilon(1e-14));
    CHECK(Expression::parse("tanh(0)").eval(0) == 0.0);
    CHECK(Expression::parse("sin(pi*y)").eval(0.0, 0.5) ==
          Catch::Approx(1.0).epsilon(1e-15));
    CHECK(Expression::parse("1 + 0.4*cos(pi*x)").eval(1.0) ==
          Catch::Approx(0.6).epsilon(1e-14));

    CHECK_THROWS_AS(Expression::parse("2 +"), ExprError);
    CHECK_THROWS_AS(Expression::parse("cos(pi*z)"), ExprError);
    CHECK_THROWS_AS(Expression::parse("frob(x)"), ExprError);
    CHECK_THROWS_AS(Expression::parse("(1 + x"), ExprError);
    CHECK_THROWS_AS(Expression::parse("1 2"), ExprError);
    CHECK_THROWS_AS(Expression::parse("x $ 2"), ExprError);
}

TEST_CASE("csv files carry front matter, exact headers and LF endings") {
    const fs::path dir = scratch_dir();
    const fs::path out = dir / "table.csv";

    CsvWriter w({"alpha", "beta"});
    w.set_front_matter(R"({"T": 0.3})");
    w.add_row({"1", "2"});
    w.add_row({format_double(1.0 / 3.0), "-4"});
    CHECK_THROWS_AS(w.add_row({"only-one"}), std::invalid_argument);
    CHECK(w.row_count() == 2);
    w.write(out.string());

    const std::string text = read_all(out);
    CHECK(text.rfind("# {\"T\": 0.3}\nalpha,beta\n1,2\n", 0) == 0);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find("0.33333333333333331") != std::string::npos);

    // Identical content produces byte-identical files.
    const fs::path out2 = dir / "table2.csv";
    w.write(out2.string());
    CHECK(read_all(out2) == text);
}

TEST_CASE("svg plots are well formed line charts") {
    const fs::path dir = scratch_dir();
    const fs::path out = dir / "plot.svg";
    SvgLinePlot plot("response", "log10 delta", "log10 change");
    plot.add_series("seed 1", {-4, -3, -2, -1}, {-4.1, -3.1, -2.1, -1.1});
    plot.add_series("seed 2", {-4, -3, -2, -1}, {-4.0, -3.0, -2.0, -1.0});
    CHECK_THROWS_AS(plot.add_series("bad", {1, 2}, {1}), std::invalid_argument);
    plot.write(out.string());

    const std::string text = read_all(out);
    CHECK(text.rfind("<svg", 0) == 0);
    CHECK(text.find("<polyline") != std::string::npos);
    CHECK(text.find("seed 2") != std::string::npos);
    CHECK(text.find("</svg>") != std::string::npos);
}

TEST_CASE("least squares slope is exact on affine data") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    const std::vector<double> y{1, 3, 5, 7, 9};
    CHECK(fit_slope(x, y) == Catch::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(fit_slope({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_slope({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
}

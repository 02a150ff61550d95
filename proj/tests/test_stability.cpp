#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfglab/config.hpp"
#include "mfglab/stability.hpp"

using namespace mfglab;

namespace {
namespace fs = std::filesystem;
constexpr double kPi = 3.14159265358979323846;

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "mfglab_test_stability";
    fs::create_directories(d);
    return d;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

MfgProblem default_problem(const SpaceTimeGrid& g) {
    const SpatialSlice u_T = SpatialSlice::from_function(
        g, [](double x, double) { return std::cos(kPi * x); });
    const SpatialSlice p_0 = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + 0.5 * std::cos(2.0 * kPi * x); });
    return MfgProblem::make(g, 0.1, ElasticitySpec::smooth(1.0, 0.25),
                            KernelSpec::gaussian(0.5, 0.2), InteractionSpec::linear(0.5, 0.5),
                            u_T, p_0);
}

MfgProblem decoupled_problem(const SpaceTimeGrid& g) {
    const SpatialSlice u_T = SpatialSlice::from_function(
        g, [](double x, double) { return std::cos(kPi * x); });
    const SpatialSlice p_0 = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + 0.5 * std::cos(2.0 * kPi * x); });
    return MfgProblem::make(g, 0.1, ElasticitySpec::constant(0.0), KernelSpec::zero(),
                            InteractionSpec::zero(), u_T, p_0);
}
}  // namespace

TEST_CASE("terminal-data perturbations realize exactly delta times the bump") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 41, 0.3);
    const MfgProblem base = default_problem(g);
    PerturbationSpec spec;
    spec.delta = 1e-3;
    spec.seed = 5;
    spec.perturb_p_0 = false;
    const MfgProblem pert = perturb_problem(base, spec);

    const SpatialSlice bump = cosine_bump(g, spec.seed, spec.kmax);
    const double diff = norm_l2_omega(pert.u_T - base.u_T);
    CHECK(diff == Catch::Approx(spec.delta * norm_l2_omega(bump)).epsilon(1e-10));
    CHECK(norm_l2_omega(pert.p_0 - base.p_0) == 0.0);

    // Same spec, same result.
    const MfgProblem again = perturb_problem(base, spec);
    CHECK(again.u_T.values == pert.u_T.values);
}

TEST_CASE("density perturbations preserve nonnegativity and unit mass") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 41, 0.3);
    const MfgProblem base = default_problem(g);
    PerturbationSpec spec;
    spec.delta = 2.0;  // large enough to threaten the positivity floor
    spec.seed = 3;
    spec.perturb_u_T = false;
    const MfgProblem pert = perturb_problem(base, spec);

    for (double v : pert.p_0.values) CHECK(v >= 0.0);
    CHECK(integrate_space(pert.p_0) == Catch::Approx(1.0).margin(1e-13));
    CHECK(norm_l2_omega(pert.p_0 - base.p_0) > 0.0);
}

TEST_CASE("an unperturbed experiment is reported as degenerate") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(51, 1.0, 21, 0.3);
    const MfgProblem base = decoupled_problem(g);
    SolverConfig cfg;
    cfg.damping = 1.0;
    const MfgSolution sol = solve_mfgs(base, cfg);
    PerturbationSpec spec;
    spec.perturb_u_T = false;
    spec.perturb_p_0 = false;
    const StabilityRow row = run_stability_experiment(base, cfg, spec, sol);
    CHECK(row.degenerate);
    CHECK(std::isnan(row.ratio));
    CHECK(row.lhs_h10 == 0.0);
}

TEST_CASE("a linear response sweep sits exactly on slope one") {
    // With zero elasticity the value equation is linear in its terminal data
    // and the density never feels the value, so doubling delta doubles the
    // solution difference exactly; slope 1 and a constant ratio are forced.
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 201, 0.3);
    const MfgProblem base = decoupled_problem(g);
    SolverConfig cfg;
    cfg.damping = 1.0;

    const SweepResult sweep = stability_sweep(base, cfg, {1e-1, 1e-2, 1e-3, 1e-4}, {7},
                                              /*perturb_u_T=*/true, /*perturb_p_0=*/false);
    REQUIRE(sweep.rows.size() == 4);
    CHECK(sweep.base_iterations == 1);
    CHECK(sweep.slope == Catch::Approx(1.0).margin(1e-8));
    CHECK(sweep.ratio_max / sweep.ratio_min == Catch::Approx(1.0).margin(1e-9));
    for (const StabilityRow& r : sweep.rows) {
        CHECK_FALSE(r.degenerate);
        CHECK(r.rhs_p0_l2 == 0.0);
        CHECK(r.rhs_uT_h1 > 0.0);
    }
}

TEST_CASE("sweep rows are ordered delta-major, seed-minor") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(51, 1.0, 51, 0.3);
    const MfgProblem base = decoupled_problem(g);
    SolverConfig cfg;
    cfg.damping = 1.0;
    const std::vector<double> deltas{1e-2, 1e-3};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const SweepResult sweep = stability_sweep(base, cfg, deltas, seeds);
    REQUIRE(sweep.rows.size() == 6);
    for (std::size_t di = 0; di < deltas.size(); ++di)
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const StabilityRow& r = sweep.rows[di * seeds.size() + si];
            CHECK(r.delta == deltas[di]);
            CHECK(r.seed == seeds[si]);
        }
    CHECK_THROWS_AS(stability_sweep(base, cfg, {}, seeds), std::invalid_argument);
    CHECK_THROWS_AS(stability_sweep(base, cfg, {-1e-2}, seeds), std::invalid_argument);
}

TEST_CASE("the measured quadrature tolerance is positive and small") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 201, 0.3);
    const double tol = measure_quadrature_tolerance(g, 0.1, CorpusSpec{});
    CHECK(tol > 0.0);
    CHECK(tol < 1e-2);
}

TEST_CASE("the corrected campaign passes where the uncorrected one fails") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 201, 0.3);
    CorpusSpec corpus;
    corpus.count = 3;
    const double eps = measure_quadrature_tolerance(g, 0.1, corpus);
    const double l0 = CarlemanParams::with_default_shift(g.T, 2.0).lambda0();

    const FuzzResult ok = carleman_fuzz(g, corpus, 0.1, {3.0, l0},
                                        InitialTermMode::weighted, eps);
    REQUIRE(ok.rows.size() == 6);
    CHECK(ok.lambda0 == Catch::Approx(l0).epsilon(1e-15));
    CHECK(ok.violations_at_lambda0 == 0);
    CHECK(ok.worst_margin_at_lambda0 >= -eps);
    for (std::size_t f = 0; f < corpus.count; ++f)
        for (std::size_t li = 0; li < 2; ++li) {
            const FuzzRow& r = ok.rows[f * 2 + li];
            CHECK(r.func_id == f);
            CHECK(r.lambda == (li == 0 ? 3.0 : l0));
            CHECK_FALSE(std::isnan(r.min_passing_lambda));
            CHECK(r.min_passing_lambda <= l0);
        }

    // Without the initial-term weight the bound is false for data with a
    // nonzero initial trace: every member must violate at lambda0.
    const FuzzResult bad =
        carleman_fuzz(g, corpus, 0.1, {l0}, InitialTermMode::unweighted, eps);
    CHECK(bad.violations_at_lambda0 == corpus.count);
    CHECK(bad.worst_margin_at_lambda0 < -eps);
}

TEST_CASE("the coupled campaign fits bounded closing multipliers") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(101, 1.0, 201, 0.3);
    CorpusSpec corpus;
    corpus.count = 4;
    ScalarField f(g);
    for (double& v : f.values) v = 0.3;

    const QuasiFuzzResult res = quasi_fuzz(g, corpus, f, 0.1, {3.0, 8.0}, 2);
    REQUIRE(res.rows.size() == 4);
    REQUIRE(res.pair_c1.size() == 2);
    CHECK(res.all_feasible);
    CHECK_FALSE(res.any_negative);
    CHECK(res.f_sup == Catch::Approx(0.3).epsilon(1e-14));
    CHECK(res.f_grad_sup == Catch::Approx(0.0).margin(1e-14));
    for (std::size_t i = 0; i < 2; ++i) {
        const double expect =
            std::max(res.rows[i * 2].c1_hat, res.rows[i * 2 + 1].c1_hat);
        CHECK(res.pair_c1[i] == Catch::Approx(expect).epsilon(1e-15));
        CHECK(res.pair_c1[i] >= 0.0);
    }
    CHECK(res.c1_max >= res.c1_median);
    for (const QuasiFuzzRow& r : res.rows) CHECK(r.margin_at_c1 >= -1e-9);
}

TEST_CASE("result files are deterministic and carry their provenance") {
    const fs::path dir = scratch_dir();
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(51, 1.0, 51, 0.3);
    const MfgProblem base = decoupled_problem(g);
    SolverConfig cfg;
    cfg.damping = 1.0;
    const SweepResult sweep = stability_sweep(base, cfg, {1e-2, 1e-3}, {1, 2});

    const fs::path csv1 = dir / "sweep1.csv", csv2 = dir / "sweep2.csv";
    write_sweep_csv(csv1.string(), sweep);
    write_sweep_csv(csv2.string(), sweep);
    const std::string text = read_all(csv1);
    CHECK(text == read_all(csv2));
    CHECK(text.rfind("delta,seed,lhs_h10,rhs_uT_h1,rhs_u0_l2,rhs_p0_l2,ratio,"
                     "picard_iters_base,picard_iters_pert\n",
                     0) == 0);

    const fs::path svg = dir / "sweep.svg";
    write_sweep_svg(svg.string(), sweep);
    CHECK(read_all(svg).rfind("<svg", 0) == 0);

    CorpusSpec corpus;
    corpus.count = 2;
    const double l0 = CarlemanParams::with_default_shift(g.T, 2.0).lambda0();
    const FuzzResult fuzz =
        carleman_fuzz(g, corpus, 0.1, {3.0, l0}, InitialTermMode::weighted, 1e-6);
    const fs::path fcsv1 = dir / "fuzz1.csv", fcsv2 = dir / "fuzz2.csv";
    write_fuzz_csv(fcsv1.string(), fuzz, g.T, default_shift(g.T), 0.1, {3.0, l0});
    write_fuzz_csv(fcsv2.string(), fuzz, g.T, default_shift(g.T), 0.1, {3.0, l0});
    const std::string ftext = read_all(fcsv1);
    CHECK(ftext == read_all(fcsv2));
    CHECK(ftext.rfind("# {", 0) == 0);
    CHECK(ftext.find("func_id,lambda,mode,margin,min_passing_lambda\n") !=
          std::string::npos);
    CHECK(ftext.find("corrected") != std::string::npos);
    CHECK(ftext.find("\"lambda0\"") != std::string::npos);

    const fs::path msvg = dir / "margins.svg";
    write_margin_svg(msvg.string(), fuzz);
    CHECK(read_all(msvg).rfind("<svg", 0) == 0);

    const CarlemanParams p = CarlemanParams::with_default_shift(g.T, 3.0);
    const ScalarField u = corpus_member(g, corpus, 0);
    const EstimateTerms terms =
        carleman_estimate_terms(u, p, 0.1, InitialTermMode::weighted);
    const fs::path tcsv = dir / "terms.csv";
    write_estimate_terms_csv(tcsv.string(), terms, p, 0.1, "corrected");
    const std::string ttext = read_all(tcsv);
    CHECK(ttext.find("term_name,sign,log_magnitude,rescaled_value\n") !=
          std::string::npos);
    CHECK(ttext.find("lhs_heat_op_sq") != std::string::npos);
    CHECK(ttext.find("rhs_initial") != std::string::npos);
    CHECK(ttext.find("\"lambda\"") != std::string::npos);
}

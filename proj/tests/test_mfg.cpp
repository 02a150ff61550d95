#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mfglab/corpus.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"

using namespace mfglab;

namespace {
constexpr double kPi = 3.14159265358979323846;

SpaceTimeGrid small_grid() { return SpaceTimeGrid::box1d(81, 1.0, 41, 0.3); }

MfgProblem make_problem(const SpaceTimeGrid& g, const ElasticitySpec& el,
                        const KernelSpec& ker, const InteractionSpec& inter) {
    const SpatialSlice u_T = SpatialSlice::from_function(
        g, [](double x, double) { return std::cos(kPi * x); });
    const SpatialSlice p_0 = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + 0.5 * std::cos(2.0 * kPi * x); });
    return MfgProblem::make(g, 0.1, el, ker, inter, u_T, p_0);
}
}  // namespace

TEST_CASE("elasticity variants and cached square") {
    const SpaceTimeGrid g = small_grid();
    const MfgProblem pr = make_problem(g, ElasticitySpec::smooth(1.0, 0.25),
                                       KernelSpec::zero(), InteractionSpec::zero());
    // kappa(x) = 1 + 0.25 cos(pi x / L): squared and cached at the nodes.
    CHECK(pr.kappa2[0] == Catch::Approx(1.5625).epsilon(1e-14));
    CHECK(pr.kappa2[g.nx - 1] == Catch::Approx(0.5625).epsilon(1e-14));
    CHECK(ElasticitySpec::smooth(1.0, 0.25).c1_norm_bound(g) >= 1.25);

    const MfgProblem prc = make_problem(g, ElasticitySpec::constant(0.7),
                                        KernelSpec::zero(), InteractionSpec::zero());
    for (double v : prc.kappa2) CHECK(v == Catch::Approx(0.49).epsilon(1e-15));
}

TEST_CASE("problem construction validates and normalizes the density") {
    const SpaceTimeGrid g = small_grid();
    const SpatialSlice u_T = SpatialSlice::from_function(
        g, [](double, double) { return 0.0; });

    // Strictly negative density data is rejected.
    const SpatialSlice bad = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + 2.0 * std::cos(kPi * x); });
    CHECK_THROWS_AS(MfgProblem::make(g, 0.1, ElasticitySpec::constant(1.0),
                                     KernelSpec::zero(), InteractionSpec::zero(), u_T,
                                     bad),
                    std::invalid_argument);
    // beta must be positive.
    const SpatialSlice ok = SpatialSlice::from_function(
        g, [](double, double) { return 2.0; });
    CHECK_THROWS_AS(MfgProblem::make(g, 0.0, ElasticitySpec::constant(1.0),
                                     KernelSpec::zero(), InteractionSpec::zero(), u_T,
                                     ok),
                    std::invalid_argument);

    // Mass is normalized to one whatever the input scale.
    const MfgProblem pr = MfgProblem::make(g, 0.1, ElasticitySpec::constant(1.0),
                                           KernelSpec::zero(), InteractionSpec::zero(),
                                           u_T, ok);
    CHECK(integrate_space(pr.p_0) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("interaction averages for the three kernels") {
    const SpaceTimeGrid g = small_grid();
    const SpatialSlice p = SpatialSlice::from_function(
        g, [](double x, double) { return 1.0 + 0.5 * std::cos(2.0 * kPi * x); });

    // Zero kernel: identically zero average.
    const MfgProblem pz = make_problem(g, ElasticitySpec::constant(1.0),
                                       KernelSpec::zero(), InteractionSpec::zero());
    for (double v : interaction_average(pz, p).values) CHECK(v == 0.0);

    // Constant kernel: A times the mass, independent of x.
    const MfgProblem pc = make_problem(g, ElasticitySpec::constant(1.0),
                                       KernelSpec::constant(0.8), InteractionSpec::zero());
    const double mass = integrate_space(p);
    for (double v : interaction_average(pc, p).values)
        CHECK(v == Catch::Approx(0.8 * mass).epsilon(1e-13));

    // Gaussian kernel: positive, bounded by A * mass, symmetric matrix.
    const MfgProblem pg = make_problem(g, ElasticitySpec::constant(1.0),
                                       KernelSpec::gaussian(0.8, 0.2),
                                       InteractionSpec::zero());
    const SpatialSlice avg = interaction_average(pg, p);
    for (double v : avg.values) {
        CHECK(v > 0.0);
        CHECK(v <= 0.8 * mass + 1e-12);
    }
    REQUIRE(pg.kernel_matrix != nullptr);
    const auto& K = *pg.kernel_matrix;
    const std::size_t n = g.space_points();
    for (std::size_t i : {std::size_t(3), std::size_t(40)})
        for (std::size_t j : {std::size_t(11), std::size_t(77)})
            CHECK(K[i * n + j] == Catch::Approx(K[j * n + i]).epsilon(1e-14));
}

TEST_CASE("interaction terms and derivative bounds") {
    const SpaceTimeGrid g = small_grid();
    const SpatialSlice p = SpatialSlice::from_function(
        g, [](double, double) { return 1.0; });

    const MfgProblem lin = make_problem(g, ElasticitySpec::constant(1.0),
                                        KernelSpec::constant(1.0),
                                        InteractionSpec::linear(0.5, 0.25));
    // G(y, z) = 0.5 y + 0.25 z with y = mass = 1, z = p = 1.
    for (double v : interaction_eval(lin, p).values)
        CHECK(v == Catch::Approx(0.75).epsilon(1e-12));
    CHECK(lin.interaction.derivative_bound() == Catch::Approx(0.5).epsilon(1e-15));

    const MfgProblem sat = make_problem(g, ElasticitySpec::constant(1.0),
                                        KernelSpec::constant(1.0),
                                        InteractionSpec::saturating(2.0, 3.0));
    // tanh saturation stays within |gamma1| + |gamma2|.
    for (double v : interaction_eval(sat, p).values) CHECK(std::abs(v) <= 5.0);
}

TEST_CASE("flux divergence conserves mass exactly") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(0.1, 2.0);
    for (int dim : {1, 2}) {
        const SpaceTimeGrid g = dim == 1
                                    ? SpaceTimeGrid::box1d(41, 1.0, 5, 0.3)
                                    : SpaceTimeGrid::box2d(13, 11, 1.0, 0.8, 5, 0.3);
        const SpatialSlice u_T = SpatialSlice::from_function(
            g, [](double, double) { return 0.0; });
        const SpatialSlice p_0 = SpatialSlice::from_function(
            g, [](double, double) { return 1.0; });
        const MfgProblem pr =
            MfgProblem::make(g, 0.1, ElasticitySpec::smooth(1.0, 0.3),
                             KernelSpec::zero(), InteractionSpec::zero(), u_T, p_0);
        SpatialSlice p(g), du(g);
        for (double& v : p.values) v = dist(rng);
        for (double& v : du.values) v = dist(rng) - 1.0;
        const SpatialSlice f = flux_divergence(pr, p, du);
        const double scale = norm_l2_omega(f) + 1.0;
        CHECK(std::abs(integrate_space(f)) < 1e-12 * scale);
    }
}

TEST_CASE("flux divergence converges to the analytic divergence") {
    // kappa^2 = 1, p = 2 + cos(pi x), u = cos(2 pi x):
    // d/dx (p du/dx) available in closed form; interior second order.
    auto err_at = [](std::size_t nx) {
        const SpaceTimeGrid g = SpaceTimeGrid::box1d(nx, 1.0, 3, 0.3);
        const SpatialSlice u_T = SpatialSlice::from_function(
            g, [](double, double) { return 0.0; });
        const SpatialSlice p_0 = SpatialSlice::from_function(
            g, [](double, double) { return 1.0; });
        const MfgProblem pr =
            MfgProblem::make(g, 0.1, ElasticitySpec::constant(1.0), KernelSpec::zero(),
                             InteractionSpec::zero(), u_T, p_0);
        const SpatialSlice p = SpatialSlice::from_function(
            g, [](double x, double) { return 2.0 + std::cos(kPi * x); });
        const SpatialSlice u = SpatialSlice::from_function(
            g, [](double x, double) { return std::cos(2.0 * kPi * x); });
        const SpatialSlice f = flux_divergence(pr, p, u);
        double worst = 0.0;
        for (std::size_t i = g.nx / 4; i < 3 * g.nx / 4; ++i) {
            const double x = g.x(i);
            const double exact =
                kPi * kPi *
                (std::sin(kPi * x) * 2.0 * std::sin(2.0 * kPi * x) -
                 (2.0 + std::cos(kPi * x)) * 4.0 * std::cos(2.0 * kPi * x));
            worst = std::max(worst, std::abs(f.at(i, 0) - exact));
        }
        return worst;
    };
    const double e1 = err_at(51);
    const double e2 = err_at(101);
    CHECK(e2 < 0.2);
    CHECK(e1 / e2 > 3.0);
}

TEST_CASE("equation residuals recompose from the primitive operators") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(41, 1.0, 21, 0.3);
    const MfgProblem pr = make_problem(g, ElasticitySpec::smooth(1.0, 0.2),
                                       KernelSpec::gaussian(0.5, 0.2),
                                       InteractionSpec::linear(0.5, 0.5));
    CorpusSpec spec;
    const ScalarField u = corpus_member(g, spec, 0);
    ScalarField p = corpus_member(g, spec, 1);
    for (double& v : p.values) v = 1.0 + 0.1 * v;  // keep the density positive

    const ScalarField rb = bellman_residual(pr, u, p);
    const ScalarField rf = fokker_planck_residual(pr, p, u);
    const ScalarField ut = time_derivative(u);
    const ScalarField pt = time_derivative(p);

    for (std::size_t k : {std::size_t(0), std::size_t(10), std::size_t(20)}) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice pk = slice_at(p, k);
        const SpatialSlice lap_u = laplacian(uk);
        const SpatialSlice lap_p = laplacian(pk);
        const SpatialSlice gsq = gradient_sq(uk);
        const SpatialSlice G = interaction_eval(pr, pk);
        const SpatialSlice fd = flux_divergence(pr, pk, uk);
        for (std::size_t i : {std::size_t(0), std::size_t(17), std::size_t(40)}) {
            const double expect_b = ut.at(i, 0, k) + pr.beta * lap_u.at(i, 0) +
                                    0.5 * pr.kappa2[i] * gsq.at(i, 0) + G.at(i, 0);
            CHECK(rb.at(i, 0, k) == Catch::Approx(expect_b).margin(1e-12));
            const double expect_f =
                pt.at(i, 0, k) - pr.beta * lap_p.at(i, 0) + fd.at(i, 0);
            CHECK(rf.at(i, 0, k) == Catch::Approx(expect_f).margin(1e-12));
        }
    }
}

TEST_CASE("interaction difference bound holds over random trials") {
    // |G(., p1) - G(., p2)| <= N1 (|avg difference| + |p1 - p2|) nodewise,
    // for every interaction variant, over many random density pairs.
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(11, 1.0, 5, 0.3);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    for (const InteractionSpec& inter :
         {InteractionSpec::linear(0.5, 0.25), InteractionSpec::saturating(1.0, 2.0),
          InteractionSpec::zero()}) {
        const MfgProblem pr = make_problem(g, ElasticitySpec::constant(1.0),
                                           KernelSpec::gaussian(0.5, 0.2), inter);
        double worst = -1e300;
        for (int trial = 0; trial < 2000; ++trial) {
            SpatialSlice p1(g), p2(g);
            for (double& v : p1.values) v = dist(rng);
            for (double& v : p2.values) v = dist(rng);
            const TaylorBoundReport rep = taylor_difference_bound(pr, p1, p2);
            CHECK(rep.ok);
            worst = std::max(worst, rep.worst_violation);
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("hypothesis membership measures sup norms") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(41, 1.0, 21, 0.3);
    const MfgProblem pr = make_problem(g, ElasticitySpec::constant(1.0),
                                       KernelSpec::zero(), InteractionSpec::zero());
    CorpusSpec spec;
    const ScalarField u = corpus_member(g, spec, 0);
    ScalarField p = corpus_member(g, spec, 1);
    for (double& v : p.values) v = 1.0 + 0.1 * v;

    const MembershipReport in = hypothesis_membership(pr, u, p);
    CHECK(in.u_sup > 0.0);
    CHECK(in.u_ok);
    CHECK(in.p_ok);

    ScalarField big = u;
    for (double& v : big.values) v *= 1e4;
    const MembershipReport out = hypothesis_membership(pr, big, p);
    CHECK_FALSE(out.u_ok);
}

TEST_CASE("residual difference witness stays finite and flags degeneracy") {
    const SpaceTimeGrid g = SpaceTimeGrid::box1d(31, 1.0, 11, 0.3);
    const MfgProblem pr = make_problem(g, ElasticitySpec::constant(1.0),
                                       KernelSpec::constant(0.5),
                                       InteractionSpec::linear(0.3, 0.3));
    CorpusSpec spec;
    const ScalarField u1 = corpus_member(g, spec, 0);
    const ScalarField u2 = corpus_member(g, spec, 1);
    ScalarField p1 = corpus_member(g, spec, 2);
    ScalarField p2 = corpus_member(g, spec, 3);
    for (double& v : p1.values) v = 1.0 + 0.1 * v;
    for (double& v : p2.values) v = 1.0 + 0.1 * v;

    const DifferenceBoundWitness w = residual_difference_check(pr, u1, p1, u2, p2);
    CHECK_FALSE(w.degenerate);
    CHECK(std::isfinite(w.value_ratio_sup));
    CHECK(std::isfinite(w.density_ratio_sup));
    CHECK(w.value_ratio_sup >= 0.0);

    const DifferenceBoundWitness same = residual_difference_check(pr, u1, p1, u1, p1);
    CHECK(same.degenerate);
}

#pragma once

// The coupled model: a backward value equation and a forward density
// equation on a box with zero-flux walls,
//   u_t + beta lap u + (kappa^2/2)|grad u|^2 + G(x,t, int K(x,y)p(y)dy, p) = 0,
//   p_t - beta lap p + div(kappa^2 p grad u) = 0,
// with terminal data u(.,T), initial density p(.,0) >= 0 of unit mass, and
// an extra measured initial value u(.,0) in the inverse problem.
//
// Catalogued coefficient families keep every run inside the hypothesis set:
// bounded kappa in C^1, bounded kernel, and interactions with derivative
// bound N1.  The divergence term is discretized in conservative face-flux
// form, so its spatial integral telescopes to zero exactly and discrete mass
// is conserved step by step.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

/// kappa(x): constant c0, or c0 + c1 cos(pi x/Lx) (times cos(pi y/Ly) in 2-d).
struct ElasticitySpec {
    enum class Kind { constant, smooth };
    Kind kind = Kind::constant;
    double c0 = 1.0;
    double c1 = 0.0;  // smooth only

    static ElasticitySpec constant(double c) { return {Kind::constant, c, 0.0}; }
    static ElasticitySpec smooth(double c0, double c1) { return {Kind::smooth, c0, c1}; }

    double eval(const SpaceTimeGrid& g, std::size_t i, std::size_t j) const {
        if (kind == Kind::constant) return c0;
        const double pi = 3.14159265358979323846;
        double v = std::cos(pi * g.x(i) / g.Lx);
        if (g.dim == 2) v *= std::cos(pi * g.y(j) / g.Ly);
        return c0 + c1 * v;
    }

    /// Conservative bound on sup|kappa| + sup|grad kappa|.
    double c1_norm_bound(const SpaceTimeGrid& g) const {
        if (kind == Kind::constant) return std::abs(c0);
        const double pi = 3.14159265358979323846;
        const double grad = std::abs(c1) * pi * (1.0 / g.Lx + (g.dim == 2 ? 1.0 / g.Ly : 0.0));
        return std::abs(c0) + std::abs(c1) + grad;
    }
};

/// K(x,y): zero, constant A, or A exp(-|x-y|^2/(2 w^2)).
struct KernelSpec {
    enum class Kind { zero, constant, gaussian };
    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double width = 1.0;  // gaussian only

    static KernelSpec zero() { return {Kind::zero, 0.0, 1.0}; }
    static KernelSpec constant(double A) { return {Kind::constant, A, 1.0}; }
    static KernelSpec gaussian(double A, double w) {
        if (!(w > 0.0)) throw std::invalid_argument("KernelSpec: width must be positive");
        return {Kind::gaussian, A, w};
    }

    double sup() const { return std::abs(amplitude); }
};

/// G(y,z) with y the nonlocal average and z the local density value.
/// Catalog keeps |dG/dy|, |dG/dz| <= N1 = max(|gamma1|, |gamma2|).
struct InteractionSpec {
    enum class Kind { zero, linear, saturating };
    Kind kind = Kind::zero;
    double gamma1 = 0.0;
    double gamma2 = 0.0;

    static InteractionSpec zero() { return {Kind::zero, 0.0, 0.0}; }
    static InteractionSpec linear(double g1, double g2) { return {Kind::linear, g1, g2}; }
    static InteractionSpec saturating(double g1, double g2) {
        return {Kind::saturating, g1, g2};
    }

    double eval(double y, double z) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::linear: return gamma1 * y + gamma2 * z;
            case Kind::saturating: return gamma1 * std::tanh(y) + gamma2 * std::tanh(z);
        }
        return 0.0;
    }

    /// N1: uniform bound on both partial derivatives.
    double derivative_bound() const { return std::max(std::abs(gamma1), std::abs(gamma2)); }
};

/// A fully specified problem instance.  Construction normalizes p_0 to unit
/// mass, rejects negative densities, and caches kappa^2 and (when needed)
/// the kernel matrix.
struct MfgProblem {
    SpaceTimeGrid grid;
    double beta = 0.1;
    ElasticitySpec elasticity = ElasticitySpec::constant(0.0);
    KernelSpec kernel = KernelSpec::zero();
    InteractionSpec interaction = InteractionSpec::zero();
    SpatialSlice u_T;
    SpatialSlice p_0;
    std::optional<SpatialSlice> u_0_measured;
    double N3 = 10.0;  // hypothesis bound for the value function
    double N4 = 10.0;  // hypothesis bound for the density

    std::vector<double> kappa2;                                // nodal kappa^2
    std::shared_ptr<const std::vector<double>> kernel_matrix;  // K(x_i, x_j), row-major

    static MfgProblem make(const SpaceTimeGrid& grid, double beta,
                           const ElasticitySpec& el, const KernelSpec& ker,
                           const InteractionSpec& inter, SpatialSlice u_T,
                           SpatialSlice p_0, double N3 = 10.0, double N4 = 10.0) {
        if (!(beta > 0.0)) throw std::invalid_argument("MfgProblem: beta must be positive");
        if (!u_T.grid.same_space(grid) || !p_0.grid.same_space(grid))
            throw std::invalid_argument("MfgProblem: data not on the problem grid");
        MfgProblem pr;
        pr.grid = grid;
        pr.beta = beta;
        pr.elasticity = el;
        pr.kernel = ker;
        pr.interaction = inter;
        pr.u_T = std::move(u_T);
        pr.N3 = N3;
        pr.N4 = N4;

        for (double v : p_0.values)
            if (v < -1e-12)
                throw std::invalid_argument("MfgProblem: initial density must be nonnegative");
        for (double& v : p_0.values) v = std::max(v, 0.0);
        const double mass = integrate_space(p_0);
        if (!(mass > 0.0))
            throw std::invalid_argument("MfgProblem: initial density has no mass");
        for (double& v : p_0.values) v /= mass;
        pr.p_0 = std::move(p_0);

        pr.kappa2.resize(grid.space_points());
        for (std::size_t i = 0; i < grid.nx; ++i)
            for (std::size_t j = 0; j < grid.ny; ++j) {
                const double k = el.eval(grid, i, j);
                pr.kappa2[i * grid.ny + j] = k * k;
            }

        if (ker.kind == KernelSpec::Kind::gaussian) {
            const std::size_t n = grid.space_points();
            auto M = std::make_shared<std::vector<double>>(n * n);
            std::vector<double> px(n), py(n);
            for (std::size_t i = 0; i < grid.nx; ++i)
                for (std::size_t j = 0; j < grid.ny; ++j) {
                    px[i * grid.ny + j] = grid.x(i);
                    py[i * grid.ny + j] = grid.y(j);
                }
            const double iw2 = 1.0 / (2.0 * ker.width * ker.width);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) {
                    const double dx = px[r] - px[c], dy = py[r] - py[c];
                    (*M)[r * n + c] = ker.amplitude * std::exp(-(dx * dx + dy * dy) * iw2);
                }
            pr.kernel_matrix = std::move(M);
        }
        return pr;
    }
};

/// Nonlocal coupling value y(x) = int K(x,y) p(y) dy as a slice.
inline SpatialSlice interaction_average(const MfgProblem& pr, const SpatialSlice& p) {
    require_same_space(p, pr.p_0, "interaction_average");
    SpatialSlice out(p.grid);
    switch (pr.kernel.kind) {
        case KernelSpec::Kind::zero:
            break;
        case KernelSpec::Kind::constant: {
            const double v = pr.kernel.amplitude * integrate_space(p);
            for (double& o : out.values) o = v;
            break;
        }
        case KernelSpec::Kind::gaussian: {
            const SpaceTimeGrid& g = p.grid;
            const std::size_t n = g.space_points();
            std::vector<double> wp(n);
            for (std::size_t i = 0; i < g.nx; ++i)
                for (std::size_t j = 0; j < g.ny; ++j)
                    wp[i * g.ny + j] = p.at(i, j) * g.node_weight(i, j);
            const std::vector<double>& M = *pr.kernel_matrix;
            for (std::size_t r = 0; r < n; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < n; ++c) s += M[r * n + c] * wp[c];
                out.values[r] = s;
            }
            break;
        }
    }
    return out;
}

/// G evaluated nodewise from a density slice.
inline SpatialSlice interaction_eval(const MfgProblem& pr, const SpatialSlice& p) {
    SpatialSlice y = interaction_average(pr, p);
    SpatialSlice out(p.grid);
    for (std::size_t n = 0; n < out.values.size(); ++n)
        out.values[n] = pr.interaction.eval(y.values[n], p.values[n]);
    return out;
}

/// Conservative divergence of the drift flux kappa^2 p grad u: first
/// differences on faces, arithmetic face averages for kappa^2 p, zero flux
/// through the walls.  integrate_space of the result is exactly zero.
inline SpatialSlice flux_divergence(const MfgProblem& pr, const SpatialSlice& p,
                                    const SpatialSlice& u) {
    require_same_space(p, u, "flux_divergence");
    const SpaceTimeGrid& g = p.grid;
    SpatialSlice out(g);
    const double ihx = 1.0 / g.hx();
    // x faces
    for (std::size_t j = 0; j < g.ny; ++j) {
        double prev_flux = 0.0;  // zero flux through the left wall
        for (std::size_t i = 0; i + 1 < g.nx; ++i) {
            const double kp = 0.5 * (pr.kappa2[i * g.ny + j] * p.at(i, j) +
                                     pr.kappa2[(i + 1) * g.ny + j] * p.at(i + 1, j));
            const double flux = kp * (u.at(i + 1, j) - u.at(i, j)) * ihx;
            // Half cells at the walls, full cells inside.
            out.at(i, j) += (i == 0 ? 2.0 : 1.0) * (flux - prev_flux) * ihx;
            prev_flux = flux;
        }
        out.at(g.nx - 1, j) += 2.0 * (0.0 - prev_flux) * ihx;
    }
    if (g.dim == 2) {
        const double ihy = 1.0 / g.hy();
        for (std::size_t i = 0; i < g.nx; ++i) {
            double prev_flux = 0.0;
            for (std::size_t j = 0; j + 1 < g.ny; ++j) {
                const double kp = 0.5 * (pr.kappa2[i * g.ny + j] * p.at(i, j) +
                                         pr.kappa2[i * g.ny + j + 1] * p.at(i, j + 1));
                const double flux = kp * (u.at(i, j + 1) - u.at(i, j)) * ihy;
                out.at(i, j) += (j == 0 ? 2.0 : 1.0) * (flux - prev_flux) * ihy;
                prev_flux = flux;
            }
            out.at(i, g.ny - 1) += 2.0 * (0.0 - prev_flux) * ihy;
        }
    }
    return out;
}

/// Pointwise residual of the value equation for given trajectories.
inline ScalarField bellman_residual(const MfgProblem& pr, const ScalarField& u,
                                    const ScalarField& p) {
    if (!(u.grid == pr.grid) || !(p.grid == pr.grid))
        throw std::invalid_argument("bellman_residual: fields not on the problem grid");
    const ScalarField ut = time_derivative(u);
    ScalarField r(pr.grid);
    for (std::size_t k = 0; k < pr.grid.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice pk = slice_at(p, k);
        const SpatialSlice lap = laplacian(uk);
        const SpatialSlice gsq = gradient_sq(uk);
        const SpatialSlice G = interaction_eval(pr, pk);
        for (std::size_t i = 0; i < pr.grid.nx; ++i)
            for (std::size_t j = 0; j < pr.grid.ny; ++j) {
                const std::size_t n = i * pr.grid.ny + j;
                r.at(i, j, k) = ut.at(i, j, k) + pr.beta * lap.values[n] +
                                0.5 * pr.kappa2[n] * gsq.values[n] + G.values[n];
            }
    }
    return r;
}

/// Pointwise residual of the density equation.
inline ScalarField fokker_planck_residual(const MfgProblem& pr, const ScalarField& p,
                                          const ScalarField& u) {
    if (!(u.grid == pr.grid) || !(p.grid == pr.grid))
        throw std::invalid_argument("fokker_planck_residual: fields not on the problem grid");
    const ScalarField pt = time_derivative(p);
    ScalarField r(pr.grid);
    for (std::size_t k = 0; k < pr.grid.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice pk = slice_at(p, k);
        const SpatialSlice lap = laplacian(pk);
        const SpatialSlice div = flux_divergence(pr, pk, uk);
        for (std::size_t i = 0; i < pr.grid.nx; ++i)
            for (std::size_t j = 0; j < pr.grid.ny; ++j) {
                const std::size_t n = i * pr.grid.ny + j;
                r.at(i, j, k) = pt.at(i, j, k) - pr.beta * lap.values[n] + div.values[n];
            }
    }
    return r;
}

/// Check |G(.,p1) - G(.,p2)| <= N1 (|int K ptilde| + |ptilde|) nodewise.
struct TaylorBoundReport {
    double worst_violation = 0.0;  // max over nodes of lhs - rhs; <= 0 means ok
    bool ok = true;
};

inline TaylorBoundReport taylor_difference_bound(const MfgProblem& pr,
                                                 const SpatialSlice& p1,
                                                 const SpatialSlice& p2,
                                                 double slack = 1e-12) {
    require_same_space(p1, p2, "taylor_difference_bound");
    const double N1 = pr.interaction.derivative_bound();
    const SpatialSlice G1 = interaction_eval(pr, p1);
    const SpatialSlice G2 = interaction_eval(pr, p2);
    const SpatialSlice y1 = interaction_average(pr, p1);
    const SpatialSlice y2 = interaction_average(pr, p2);
    TaylorBoundReport rep;
    rep.worst_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < G1.values.size(); ++n) {
        const double lhs = std::abs(G1.values[n] - G2.values[n]);
        const double rhs = N1 * (std::abs(y1.values[n] - y2.values[n]) +
                                 std::abs(p1.values[n] - p2.values[n]));
        rep.worst_violation = std::max(rep.worst_violation, lhs - rhs);
    }
    rep.ok = rep.worst_violation <= slack;
    return rep;
}

/// Measured sups against the hypothesis bounds N3 (value) and N4 (density).
struct MembershipReport {
    double u_sup = 0.0, u_grad_sup = 0.0, u_lap_sup = 0.0;
    double p_sup = 0.0, p_grad_sup = 0.0;
    bool u_ok = false, p_ok = false;
};

inline MembershipReport hypothesis_membership(const MfgProblem& pr, const ScalarField& u,
                                              const ScalarField& p) {
    MembershipReport rep;
    for (std::size_t k = 0; k < pr.grid.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice pk = slice_at(p, k);
        const SpatialSlice gu = gradient_sq(uk);
        const SpatialSlice gp = gradient_sq(pk);
        const SpatialSlice lu = laplacian(uk);
        for (std::size_t n = 0; n < uk.values.size(); ++n) {
            rep.u_sup = std::max(rep.u_sup, std::abs(uk.values[n]));
            rep.u_grad_sup = std::max(rep.u_grad_sup, std::sqrt(gu.values[n]));
            rep.u_lap_sup = std::max(rep.u_lap_sup, std::abs(lu.values[n]));
            rep.p_sup = std::max(rep.p_sup, std::abs(pk.values[n]));
            rep.p_grad_sup = std::max(rep.p_grad_sup, std::sqrt(gp.values[n]));
        }
    }
    rep.u_ok = std::max({rep.u_sup, rep.u_grad_sup, rep.u_lap_sup}) <= pr.N3;
    rep.p_ok = std::max(rep.p_sup, rep.p_grad_sup) <= pr.N4;
    return rep;
}

/// Empirical constants for the difference-of-solutions bounds.  For two
/// trajectory pairs of the same problem, the differences satisfy
///   |du_t + beta lap du|                    <= C (|grad du| + |dp| + int |dp|),
///   |dp_t - beta lap dp + kappa^2 p1 lap du| <= C (|grad dp| + |dp| + |grad du|),
/// and the reported sup-ratios witness the smallest such C on the grid.
/// Identical pairs make every bracket vanish; that is flagged degenerate
/// rather than reported as 0/0.
struct DifferenceBoundWitness {
    double value_ratio_sup = 0.0;
    double density_ratio_sup = 0.0;
    bool degenerate = false;
};

inline DifferenceBoundWitness residual_difference_check(const MfgProblem& pr,
                                                        const ScalarField& u1,
                                                        const ScalarField& p1,
                                                        const ScalarField& u2,
                                                        const ScalarField& p2) {
    const ScalarField du = u1 - u2;
    const ScalarField dp = p1 - p2;
    const ScalarField dut = time_derivative(du);
    const ScalarField dpt = time_derivative(dp);

    double scale = 0.0;
    for (const ScalarField* f : {&u1, &u2, &p1, &p2})
        for (double v : f->values) scale = std::max(scale, std::abs(v));

    double bracket_sup = 0.0;
    double ratio_u = 0.0, ratio_p = 0.0;
    std::vector<double> lhs_u, rhs_u, lhs_p, rhs_p;
    for (std::size_t k = 0; k < pr.grid.nt; ++k) {
        const SpatialSlice duk = slice_at(du, k);
        const SpatialSlice dpk = slice_at(dp, k);
        const SpatialSlice lap_du = laplacian(duk);
        const SpatialSlice lap_dp = laplacian(dpk);
        const SpatialSlice gdu = gradient_sq(duk);
        const SpatialSlice gdp = gradient_sq(dpk);
        const SpatialSlice p1k = slice_at(p1, k);
        SpatialSlice abs_dp = dpk;
        for (double& v : abs_dp.values) v = std::abs(v);
        const double int_abs_dp = integrate_space(abs_dp);

        for (std::size_t i = 0; i < pr.grid.nx; ++i)
            for (std::size_t j = 0; j < pr.grid.ny; ++j) {
                const std::size_t n = i * pr.grid.ny + j;
                const double lu = std::abs(dut.at(i, j, k) + pr.beta * lap_du.values[n]);
                const double bu =
                    std::sqrt(gdu.values[n]) + std::abs(dpk.values[n]) + int_abs_dp;
                const double lp = std::abs(dpt.at(i, j, k) - pr.beta * lap_dp.values[n] +
                                           pr.kappa2[n] * p1k.values[n] * lap_du.values[n]);
                const double bp = std::sqrt(gdp.values[n]) + std::abs(dpk.values[n]) +
                                  std::sqrt(gdu.values[n]);
                bracket_sup = std::max({bracket_sup, bu, bp});
                lhs_u.push_back(lu);
                rhs_u.push_back(bu);
                lhs_p.push_back(lp);
                rhs_p.push_back(bp);
            }
    }

    DifferenceBoundWitness w;
    if (bracket_sup <= 1e-13 * std::max(scale, 1.0)) {
        w.degenerate = true;
        return w;
    }
    // Ratios only where the bracket is non-negligible; tiny brackets carry
    // discretization noise, not information about the constant.
    const double floor = 1e-8 * bracket_sup;
    for (std::size_t n = 0; n < lhs_u.size(); ++n) {
        if (rhs_u[n] > floor) ratio_u = std::max(ratio_u, lhs_u[n] / rhs_u[n]);
        if (rhs_p[n] > floor) ratio_p = std::max(ratio_p, lhs_p[n] / rhs_p[n]);
    }
    w.value_ratio_sup = ratio_u;
    w.density_ratio_sup = ratio_p;
    return w;
}

}  // namespace mfglab

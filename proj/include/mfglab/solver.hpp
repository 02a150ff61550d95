#pragma once

// Forward solver for the coupled system: semi-implicit time stepping for
// each equation (diffusion implicit, nonlinear/coupling terms lagged one
// level) inside a damped Picard loop on the density.
//
// The value equation marches backward from u(.,T); the density equation
// marches forward from p(.,0) in conservative flux form, so discrete mass
// is preserved to rounding at every step.  Implicit solves are tridiagonal
// (dimension-split in 2-d).

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"

namespace mfglab {

struct SolverConfig {
    double damping = 0.5;        ///< Picard relaxation weight in (0,1]
    double picard_tol = 1e-8;    ///< relative L2(Q_T) change for convergence
    std::size_t max_picard = 200;

    void validate() const {
        if (!(damping > 0.0) || damping > 1.0)
            throw std::invalid_argument("SolverConfig: damping must be in (0,1]");
        if (!(picard_tol > 0.0))
            throw std::invalid_argument("SolverConfig: picard_tol must be positive");
        if (max_picard < 1) throw std::invalid_argument("SolverConfig: max_picard >= 1");
    }
};

struct PicardTraceRow {
    std::size_t iteration = 0;
    double du = 0.0;  ///< relative change of the value sweep vs the previous one
    double dp = 0.0;  ///< relative fixed-point residual of the density map
};

struct MfgSolution {
    ScalarField u;
    ScalarField p;
    std::vector<PicardTraceRow> trace;
    std::size_t iterations = 0;  ///< accepted Picard updates (see solve_mfgs)
    bool converged = false;
};

/// Field values left the representable range during a time sweep.
class SolverDivergence : public std::runtime_error {
public:
    SolverDivergence(const std::string& which, std::size_t time_level)
        : std::runtime_error("solver diverged in the " + which + " sweep at time level " +
                             std::to_string(time_level)),
          time_level_(time_level) {}
    std::size_t time_level() const { return time_level_; }

private:
    std::size_t time_level_;
};

/// Picard loop hit max_picard without meeting the tolerance.
class NonConvergence : public std::runtime_error {
public:
    explicit NonConvergence(std::vector<PicardTraceRow> trace)
        : std::runtime_error("Picard iteration did not converge within " +
                             std::to_string(trace.size()) + " sweeps"),
          trace_(std::move(trace)) {}
    const std::vector<PicardTraceRow>& trace() const { return trace_; }

private:
    std::vector<PicardTraceRow> trace_;
};

namespace detail {

/// Thomas solve of (I - c*L1d) w = rhs along one axis, where L1d is the
/// mirror-ghost second difference.  Row pattern: (1+2g, -2g | -g, 1+2g, -g |
/// -2g, 1+2g); strictly diagonally dominant for c > 0.
class TridiagonalNeumann {
public:
    TridiagonalNeumann(std::size_t n, double g) : n_(n), g_(g), cp_(n), d_(n) {}

    void solve(double* w, std::size_t stride) const {
        // Forward elimination with the Neumann end rows folded in.
        const double diag = 1.0 + 2.0 * g_;
        cp_[0] = -2.0 * g_ / diag;
        d_[0] = w[0] / diag;
        for (std::size_t i = 1; i < n_; ++i) {
            const double sub = (i + 1 == n_) ? -2.0 * g_ : -g_;
            const double sup = -g_;
            const double m = diag - sub * cp_[i - 1];
            cp_[i] = sup / m;
            d_[i] = (w[i * stride] - sub * d_[i - 1]) / m;
        }
        w[(n_ - 1) * stride] = d_[n_ - 1];
        for (std::size_t i = n_ - 1; i-- > 0;)
            w[i * stride] = d_[i] - cp_[i] * w[(i + 1) * stride];
    }

private:
    std::size_t n_;
    double g_;
    mutable std::vector<double> cp_, d_;
};

/// In-place (I - c lap)^-1 rhs, dimension-split in 2-d.  Each 1-d solve
/// preserves the trapezoid mass of its line exactly (the mirror rows sum to
/// zero against the half/full weights), so the full step conserves mass.
inline void implicit_diffusion(SpatialSlice& w, double c) {
    const SpaceTimeGrid& g = w.grid;
    const double gx = c / (g.hx() * g.hx());
    TridiagonalNeumann tx(g.nx, gx);
    for (std::size_t j = 0; j < g.ny; ++j) tx.solve(&w.values[j], g.ny);
    if (g.dim == 2) {
        const double gy = c / (g.hy() * g.hy());
        TridiagonalNeumann ty(g.ny, gy);
        for (std::size_t i = 0; i < g.nx; ++i) ty.solve(&w.values[i * g.ny], 1);
    }
}

inline void check_finite(const SpatialSlice& s, const char* which, std::size_t level) {
    for (double v : s.values)
        if (!std::isfinite(v)) throw SolverDivergence(which, level);
}

}  // namespace detail

/// Backward sweep for the value equation with a frozen density trajectory.
/// Step from level k+1 to k:  (I - tau beta lap) u_k = u_{k+1} +
/// tau [ (kappa^2/2)|grad u_{k+1}|^2 + G(., p_{k+1}) ].  First order in tau.
inline ScalarField solve_bellman_backward(const MfgProblem& pr, const ScalarField& p) {
    if (!(p.grid == pr.grid))
        throw std::invalid_argument("solve_bellman_backward: density not on problem grid");
    const SpaceTimeGrid& g = pr.grid;
    const double tau = g.tau();
    ScalarField u(g);

    SpatialSlice uk = pr.u_T;
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j) u.at(i, j, g.nt - 1) = uk.at(i, j);

    for (std::size_t k = g.nt - 1; k-- > 0;) {
        const SpatialSlice pk1 = slice_at(p, k + 1);
        const SpatialSlice gsq = gradient_sq(uk);
        const SpatialSlice G = interaction_eval(pr, pk1);
        SpatialSlice rhs(g);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j) {
                const std::size_t n = i * g.ny + j;
                rhs.at(i, j) = uk.at(i, j) +
                               tau * (0.5 * pr.kappa2[n] * gsq.values[n] + G.values[n]);
            }
        detail::implicit_diffusion(rhs, tau * pr.beta);
        detail::check_finite(rhs, "value", k);
        uk = rhs;
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j) u.at(i, j, k) = uk.at(i, j);
    }
    return u;
}

/// Forward sweep for the density equation with a frozen value trajectory.
/// Step from level k to k+1: (I - tau beta lap) p_{k+1} = p_k -
/// tau div(kappa^2 p_k grad u_{k+1}); conservative fluxes, mass preserved.
inline ScalarField solve_fokker_planck_forward(const MfgProblem& pr, const ScalarField& u) {
    if (!(u.grid == pr.grid))
        throw std::invalid_argument("solve_fokker_planck_forward: value not on problem grid");
    const SpaceTimeGrid& g = pr.grid;
    const double tau = g.tau();
    ScalarField p(g);

    SpatialSlice pk = pr.p_0;
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j) p.at(i, j, 0) = pk.at(i, j);

    for (std::size_t k = 0; k + 1 < g.nt; ++k) {
        const SpatialSlice uk1 = slice_at(u, k + 1);
        const SpatialSlice div = flux_divergence(pr, pk, uk1);
        SpatialSlice rhs(g);
        for (std::size_t n = 0; n < rhs.values.size(); ++n)
            rhs.values[n] = pk.values[n] - tau * div.values[n];
        detail::implicit_diffusion(rhs, tau * pr.beta);
        detail::check_finite(rhs, "density", k + 1);
        pk = rhs;
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j) p.at(i, j, k + 1) = pk.at(i, j);
    }
    return p;
}

/// Damped Picard iteration on the density trajectory.
///
/// Sweep m computes u_m from the current density iterate, then the density
/// response p_hat_m; `dp` is the relative fixed-point residual
/// |p_hat_m - p_iter| and `du` the change between consecutive value sweeps.
/// Convergence requires both below picard_tol, which certifies the previous
/// iterate; `iterations` therefore counts accepted updates, and a problem
/// with no feedback (kernel and interaction zero, kappa zero) reports 1.
/// The returned pair (u_m, p_hat_m) is self-consistent to O(picard_tol).
inline MfgSolution solve_mfgs(const MfgProblem& pr, const SolverConfig& cfg,
                              const std::optional<ScalarField>& p_init = std::nullopt) {
    cfg.validate();
    const SpaceTimeGrid& g = pr.grid;

    ScalarField p_iter(g);
    if (p_init) {
        if (!(p_init->grid == g))
            throw std::invalid_argument("solve_mfgs: p_init not on problem grid");
        p_iter = *p_init;
    } else {
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                for (std::size_t k = 0; k < g.nt; ++k)
                    p_iter.at(i, j, k) = pr.p_0.at(i, j);
    }

    MfgSolution sol;
    ScalarField u_prev;
    bool have_u_prev = false;
    for (std::size_t m = 1; m <= cfg.max_picard; ++m) {
        ScalarField u = solve_bellman_backward(pr, p_iter);
        const double du = have_u_prev ? rel_change(u, u_prev)
                                      : std::numeric_limits<double>::infinity();
        ScalarField p_hat = solve_fokker_planck_forward(pr, u);
        const double dp = rel_change(p_hat, p_iter);
        sol.trace.push_back({m, du, dp});

        if (m >= 2 && du <= cfg.picard_tol && dp <= cfg.picard_tol) {
            sol.u = std::move(u);
            sol.p = std::move(p_hat);
            sol.iterations = m - 1;
            sol.converged = true;
            return sol;
        }
        const double w = cfg.damping;
        for (std::size_t n = 0; n < p_iter.values.size(); ++n)
            p_iter.values[n] = (1.0 - w) * p_iter.values[n] + w * p_hat.values[n];
        u_prev = std::move(u);
        have_u_prev = true;
    }
    throw NonConvergence(std::move(sol.trace));
}

/// Synthetic measurement of the initial value: u(.,0) plus delta times a
/// seeded smooth cosine bump.  delta = 0 returns the clean trace.
inline SpatialSlice synthesize_measurement(const ScalarField& u, double delta,
                                           std::uint64_t seed, std::size_t kmax = 8);

}  // namespace mfglab

#include "mfglab/corpus.hpp"

namespace mfglab {

inline SpatialSlice synthesize_measurement(const ScalarField& u, double delta,
                                           std::uint64_t seed, std::size_t kmax) {
    SpatialSlice s = slice_at(u, 0);
    if (delta != 0.0) {
        const SpatialSlice bump = cosine_bump(u.grid, seed, kmax);
        for (std::size_t n = 0; n < s.values.size(); ++n)
            s.values[n] += delta * bump.values[n];
    }
    return s;
}

}  // namespace mfglab

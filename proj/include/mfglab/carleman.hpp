#pragma once

// Carleman machinery: the weight exp(2(T-t+a)^lambda), its stable rescaled
// forms, weighted time quadrature that survives the weight's collapse at
// large lambda, the exact weighted energy identity used as the
// discretization-quality oracle, and the two pointwise estimates it feeds.
//
// Convention: every integral and boundary term is reported divided by the
// weight's maximum phi(0) = exp(2(T+a)^lambda).  In that frame the rescaled
// weight lives in (0,1], prefactors like lambda*(T+a)^(lambda-1) are carried
// in log space, and inequalities are preserved because the frame change is a
// single positive factor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/signed_log.hpp"

namespace mfglab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Shift rule a(T) = 2 + sqrt(1/4 + T); keeps a > 2 and (T+a)/a^2 < 1.
inline double default_shift(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("default_shift: T must be positive");
    return 2.0 + std::sqrt(0.25 + T);
}

/// Weight parameters.  Requires T > 0, a > 2, lambda >= 2.
struct CarlemanParams {
    double T = 1.0;
    double a = 3.0;
    double lambda = 2.0;

    CarlemanParams() = default;
    CarlemanParams(double T_, double a_, double lambda_) : T(T_), a(a_), lambda(lambda_) {
        validate();
    }
    static CarlemanParams with_default_shift(double T_, double lambda_) {
        return CarlemanParams(T_, default_shift(T_), lambda_);
    }

    void validate() const {
        if (!(T > 0.0)) throw std::invalid_argument("CarlemanParams: T must be positive");
        if (!(a > 2.0)) throw std::invalid_argument("CarlemanParams: a must exceed 2");
        if (!(lambda >= 2.0)) throw std::invalid_argument("CarlemanParams: lambda must be >= 2");
    }

    /// Threshold 16(T+a)^2 above which the estimates are asserted.
    double lambda0() const { return 16.0 * (T + a) * (T + a); }
    /// Contraction ratio (T+a)/a^2; < 1 under the default shift.
    double rho() const { return (T + a) / (a * a); }
};

// ---------------------------------------------------------------------------
// Weight evaluations.
// ---------------------------------------------------------------------------

/// ln of the raw weight, 2(T-t+a)^lambda.  Overflows to +inf for large
/// lambda; callers needing large lambda must stay in the rescaled frame.
inline double carleman_weight_log(const CarlemanParams& p, double t) {
    return 2.0 * std::exp(p.lambda * std::log(p.T - t + p.a));
}

/// ln( phi(t)/phi(0) ) = 2[(T-t+a)^lambda - (T+a)^lambda] <= 0, computed
/// stably; may round to -inf when the true value is below double range.
inline double carleman_log_weight_rescaled(const CarlemanParams& p, double t) {
    if (t < 0.0 || t > p.T * (1.0 + 1e-12))
        throw std::invalid_argument("carleman weight: t outside [0,T]");
    if (t <= 0.0) return 0.0;
    const double S = p.T + p.a;
    const double s = p.T - t + p.a;
    const double lnr = p.lambda * (std::log(s) - std::log(S));  // <= 0
    const double one_minus = -std::expm1(lnr);                  // in [0,1]
    if (one_minus == 0.0) return 0.0;
    const double logmag = std::log(2.0) + p.lambda * std::log(S) + std::log(one_minus);
    if (logmag > 709.0) return kNegInf;
    return -std::exp(logmag);
}

/// phi(t)/phi(0) in (0,1]; underflow to exact 0 is permitted and expected at
/// large lambda away from t = 0.
inline double carleman_weight_rescaled(const CarlemanParams& p, double t) {
    return std::exp(carleman_log_weight_rescaled(p, t));
}

/// -2(T+a)^lambda as a log-frame constant: ln(phi(T)/phi(0)) etc. reuse it.
inline double log_weight_at_T(const CarlemanParams& p) {
    return carleman_log_weight_rescaled(p, p.T);
}

// ---------------------------------------------------------------------------
// Change of variables v = u * exp((T-t+a)^lambda), kept in the frame divided
// by the maximal factor exp((T+a)^lambda) (i.e. multiplied by sqrt of the
// rescaled weight).
// ---------------------------------------------------------------------------

inline ScalarField carleman_transform(const ScalarField& u, const CarlemanParams& p) {
    const SpaceTimeGrid& g = u.grid;
    if (std::abs(g.T - p.T) > 1e-12 * std::max(1.0, p.T))
        throw std::invalid_argument("carleman_transform: grid horizon differs from params");
    ScalarField v(g);
    for (std::size_t k = 0; k < g.nt; ++k) {
        const double f = std::exp(0.5 * carleman_log_weight_rescaled(p, g.t(k)));
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                v.at(i, j, k) = u.at(i, j, k) * f;
    }
    return v;
}

/// Inverse of carleman_transform.  Where the forward factor underflowed to
/// zero the original values are unrecoverable; those nodes are returned as 0
/// rather than NaN.  Round trips are exact to rounding whenever the factor
/// stayed normal (moderate lambda).
inline ScalarField carleman_inverse_transform(const ScalarField& v, const CarlemanParams& p) {
    const SpaceTimeGrid& g = v.grid;
    ScalarField u(g);
    for (std::size_t k = 0; k < g.nt; ++k) {
        const double lw = 0.5 * carleman_log_weight_rescaled(p, g.t(k));
        const double f = std::exp(-lw);
        const bool dead = !std::isfinite(f);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                u.at(i, j, k) = dead ? 0.0 : v.at(i, j, k) * f;
    }
    return u;
}

// ---------------------------------------------------------------------------
// Weighted time quadrature.
//
// Integrals int g(t) w(t) dt with w the (rescaled) Carleman weight collapse
// into a boundary layer near t = 0 once lambda is large: the layer width
// 1/(2 lambda (T+a)^(lambda-1)) can be far below any resolvable time step.
// Per cell we linearize ln w and integrate the resulting exponential in
// closed form; that is exact for piecewise-constant g under a log-linear
// weight, O(tau^2) for smooth g, and -- crucially -- the closed form keeps
// its accuracy no matter how violently the weight decays across the cell.
// ---------------------------------------------------------------------------

/// Weight described by exact nodal log-values plus an analytic log-slope.
/// The slope is a SignedLog because |d/dt ln w| itself overflows double at
/// the lambda values of interest.
class TimeWeight {
public:
    /// w(t) = phi(t)/phi(0).
    static TimeWeight carleman(const CarlemanParams& p) { return TimeWeight(p, 0.0); }
    /// w(t) = (T-t+a)^power * phi(t)/phi(0), power >= 0.
    static TimeWeight carleman_power(const CarlemanParams& p, double power) {
        if (power < 0.0) throw std::invalid_argument("TimeWeight: power must be >= 0");
        return TimeWeight(p, power);
    }

    double log_value(double t) const {
        const double base = carleman_log_weight_rescaled(p_, t);
        if (base == kNegInf) return kNegInf;
        return base + power_ * std::log(p_.T - t + p_.a);
    }

    /// d/dt ln w(t); strictly negative for these weights.
    SignedLog log_slope(double t) const {
        const double s = p_.T - t + p_.a;
        SignedLog m = SignedLog::from_log(
            -1, std::log(2.0) + std::log(p_.lambda) + (p_.lambda - 1.0) * std::log(s));
        if (power_ > 0.0) m += SignedLog::from_log(-1, std::log(power_) - std::log(s));
        return m;
    }

    const CarlemanParams& params() const { return p_; }

private:
    TimeWeight(const CarlemanParams& p, double power) : p_(p), power_(power) {}
    CarlemanParams p_;
    double power_;
};

namespace detail {

// E0(z) = int_0^1 e^{z s} ds, E1(z) = int_0^1 s e^{z s} ds; stable branches.
inline double quad_e0(double z) {
    if (std::abs(z) < 1e-12) return 1.0 + 0.5 * z;
    if (z < -700.0) return -1.0 / z;
    return std::expm1(z) / z;
}
inline double quad_e1(double z) {
    if (std::abs(z) < 1e-3) return 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
    if (z < -700.0) return 1.0 / (z * z);
    return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

}  // namespace detail

/// int_0^T g(t) w(t) dt with g given at the grid's time nodes (linear per
/// cell) and w a TimeWeight.  Signed result in log space.
inline SignedLog weighted_time_integral(std::span<const double> g, const SpaceTimeGrid& grid,
                                        const TimeWeight& w) {
    if (g.size() != grid.nt)
        throw std::invalid_argument("weighted_time_integral: sample count != nt");
    if (std::abs(grid.T - w.params().T) > 1e-12 * std::max(1.0, grid.T))
        throw std::invalid_argument("weighted_time_integral: horizon mismatch");
    const double tau = grid.tau();
    const double log_tau = std::log(tau);
    SignedLog acc = SignedLog::zero();

    std::vector<double> lw(grid.nt);
    for (std::size_t k = 0; k < grid.nt; ++k) lw[k] = w.log_value(grid.t(k));

    for (std::size_t k = 0; k + 1 < grid.nt; ++k) {
        const double l0 = lw[k], l1 = lw[k + 1];
        const double g0 = g[k], g1 = g[k + 1];
        const bool f0 = (l0 != kNegInf), f1 = (l1 != kNegInf);
        if (!f0 && !f1) continue;  // weight identically dead across the cell

        if (f0 && f1) {
            const double z = l1 - l0;  // finite
            const double bracket = g0 * detail::quad_e0(z) + (g1 - g0) * detail::quad_e1(z);
            if (bracket != 0.0)
                acc += SignedLog::from_log(bracket > 0 ? 1 : -1,
                                           l0 + log_tau + std::log(std::abs(bracket)));
            continue;
        }

        // One endpoint's weight fell below double range: the decay across the
        // cell is so steep that only the finite-anchored boundary layer
        // contributes.  Use the analytic slope, in log space throughout.
        if (f0) {
            const SignedLog slope = w.log_slope(grid.t(k));  // negative
            const double log_abs_z = slope.log_magnitude() + log_tau;
            if (log_abs_z < 34.5) {  // |z| < ~1e15: representable, use closed form
                const double z = -std::exp(log_abs_z);
                const double bracket =
                    g0 * detail::quad_e0(z) + (g1 - g0) * detail::quad_e1(z);
                if (bracket != 0.0)
                    acc += SignedLog::from_log(bracket > 0 ? 1 : -1,
                                               l0 + log_tau + std::log(std::abs(bracket)));
            } else {
                // Asymptotics: E0 -> 1/|z|, E1 -> 1/z^2.
                if (g0 != 0.0)
                    acc += SignedLog::from_log(g0 > 0 ? 1 : -1,
                                               l0 + log_tau + std::log(std::abs(g0)) - log_abs_z);
                const double dg = g1 - g0;
                if (dg != 0.0)
                    acc += SignedLog::from_log(dg > 0 ? 1 : -1,
                                               l0 + log_tau + std::log(std::abs(dg)) -
                                                   2.0 * log_abs_z);
            }
        } else {
            // Mirrored case (weight growing into the cell); not produced by
            // the Carleman weights but kept for completeness.
            const SignedLog slope = w.log_slope(grid.t(k + 1));
            const double log_abs_z = slope.log_magnitude() + log_tau;
            if (log_abs_z < 34.5) {
                const double z = -std::exp(log_abs_z);
                const double bracket =
                    g1 * detail::quad_e0(z) - (g1 - g0) * detail::quad_e1(z);
                if (bracket != 0.0)
                    acc += SignedLog::from_log(bracket > 0 ? 1 : -1,
                                               l1 + log_tau + std::log(std::abs(bracket)));
            } else {
                if (g1 != 0.0)
                    acc += SignedLog::from_log(g1 > 0 ? 1 : -1,
                                               l1 + log_tau + std::log(std::abs(g1)) - log_abs_z);
            }
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Exact weighted energy identity (the discretization-quality oracle).
//
// For smooth u with zero-flux boundaries, multiplying -(u_t + beta lap u) by
// u phi and integrating gives, exactly,
//   int (-u_t - beta lap u) u phi
//     = beta int |grad u|^2 phi  -  lambda int (T-t+a)^(lambda-1) u^2 phi
//       - (1/2) phi(T) int u^2(x,T)  +  (1/2) phi(0) int u^2(x,0).
// Spatially our face Dirichlet form makes the Laplacian part exact, so the
// discrete residual isolates pure time-discretization error: it must vanish
// at O(tau^2) under refinement, and its measured size calibrates every
// margin tolerance used by the estimate campaigns.
// ---------------------------------------------------------------------------

struct IdentityResidual {
    double lhs = 0.0;       // all in the phi(0) frame
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs|
};

inline IdentityResidual weighted_energy_identity_residual(const ScalarField& u,
                                                          const CarlemanParams& p,
                                                          double beta) {
    const SpaceTimeGrid& g = u.grid;
    if (std::abs(g.T - p.T) > 1e-12 * std::max(1.0, g.T))
        throw std::invalid_argument("identity residual: grid horizon differs from params");
    const ScalarField ut = time_derivative(u);

    std::vector<double> op_u(g.nt), dir(g.nt), usq(g.nt);
    for (std::size_t k = 0; k < g.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice utk = slice_at(ut, k);
        const SpatialSlice lap = laplacian(uk);
        SpatialSlice integrand(uk.grid);
        for (std::size_t n = 0; n < integrand.values.size(); ++n)
            integrand.values[n] =
                (-utk.values[n] - beta * lap.values[n]) * uk.values[n];
        op_u[k] = integrate_space(integrand);
        dir[k] = dirichlet_form(uk, uk);
        usq[k] = inner_l2(uk, uk);
    }

    const TimeWeight w0 = TimeWeight::carleman(p);
    const TimeWeight w1 = TimeWeight::carleman_power(p, p.lambda - 1.0);

    const SignedLog lhs = weighted_time_integral(op_u, g, w0);
    SignedLog rhs = SignedLog::from_value(beta) * weighted_time_integral(dir, g, w0);
    rhs -= SignedLog::from_value(p.lambda) * weighted_time_integral(usq, g, w1);
    rhs -= SignedLog::from_log(1, std::log(0.5) + log_weight_at_T(p)) *
           SignedLog::from_value(usq[g.nt - 1]);
    rhs += SignedLog::from_value(0.5 * usq[0]);

    IdentityResidual r;
    r.lhs = lhs.value();
    r.rhs = rhs.value();
    r.residual = std::abs((lhs - rhs).value());
    return r;
}

// ---------------------------------------------------------------------------
// Estimate term sheets.
// ---------------------------------------------------------------------------

/// Accounting convention for the t = 0 boundary term of the pointwise heat
/// estimate.  `weighted` carries the full factor exp(2(T+a)^lambda) that the
/// integral identity produces (the default); `unweighted` evaluates the bare
/// prefactor for comparison, which is expected to fail for u(.,0) != 0 at
/// large lambda.
enum class InitialTermMode { weighted, unweighted };

inline const char* to_string(InitialTermMode m) {
    return m == InitialTermMode::weighted ? "corrected" : "literal-paper";
}

/// One side's named terms plus totals/margin in a shared O(1) frame.
struct EstimateTerms {
    struct Term {
        std::string name;
        bool lhs = false;
        SignedLog value;        // signed, phi(0) frame
        double rescaled = 0.0;  // value / exp(common_log_scale)
    };

    std::vector<Term> terms;
    double common_log_scale = 0.0;

    void add(const std::string& name, bool lhs, SignedLog v) {
        terms.push_back({name, lhs, v, 0.0});
    }

    /// Fix the common frame: the largest term magnitude maps to +-1.
    void finalize() {
        common_log_scale = kNegInf;
        for (const Term& t : terms)
            if (!t.value.is_zero())
                common_log_scale = std::max(common_log_scale, t.value.log_magnitude());
        if (common_log_scale == kNegInf) common_log_scale = 0.0;
        for (Term& t : terms) t.rescaled = t.value.value_scaled(common_log_scale);
    }

    SignedLog lhs_sum() const {
        SignedLog s;
        for (const Term& t : terms)
            if (t.lhs) s += t.value;
        return s;
    }
    SignedLog rhs_sum() const {
        SignedLog s;
        for (const Term& t : terms)
            if (!t.lhs) s += t.value;
        return s;
    }

    double lhs_total() const { return lhs_sum().value_scaled(common_log_scale); }
    double rhs_total() const { return rhs_sum().value_scaled(common_log_scale); }
    /// lhs - rhs in the common frame; >= 0 means the estimate holds.
    double margin() const {
        return (lhs_sum() - rhs_sum()).value_scaled(common_log_scale);
    }

    const Term* find(const std::string& name) const {
        for (const Term& t : terms)
            if (t.name == name) return &t;
        return nullptr;
    }
};

/// Term sheet of the pointwise Carleman estimate for the backward-heat
/// operator u_t + beta lap u:
///   int (u_t + beta lap u)^2 phi
///     >= (2/3) sqrt(lambda) beta int |grad u|^2 phi
///      + (lambda^2/12) a^(lambda-2) int u^2 phi
///      - (2/3) phi(T) int_Omega (beta |grad u|^2 + u^2/2)(x,T)
///      - (2/3) lambda (T+a)^(lambda-1) W0 int_Omega u^2(x,0),
/// W0 = phi(0) in weighted mode, 1 in unweighted mode.  Valid for
/// lambda >= lambda0 (weighted accounting); all terms in the phi(0) frame.
inline EstimateTerms carleman_estimate_terms(const ScalarField& u, const CarlemanParams& p,
                                             double beta,
                                             InitialTermMode mode = InitialTermMode::weighted) {
    const SpaceTimeGrid& g = u.grid;
    if (std::abs(g.T - p.T) > 1e-12 * std::max(1.0, g.T))
        throw std::invalid_argument("estimate terms: grid horizon differs from params");
    if (!(beta > 0.0)) throw std::invalid_argument("estimate terms: beta must be positive");
    const ScalarField ut = time_derivative(u);

    std::vector<double> op_sq(g.nt), dir(g.nt), usq(g.nt);
    for (std::size_t k = 0; k < g.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice utk = slice_at(ut, k);
        const SpatialSlice lap = laplacian(uk);
        SpatialSlice sq(uk.grid);
        for (std::size_t n = 0; n < sq.values.size(); ++n) {
            const double v = utk.values[n] + beta * lap.values[n];
            sq.values[n] = v * v;
        }
        op_sq[k] = integrate_space(sq);
        dir[k] = dirichlet_form(uk, uk);
        usq[k] = inner_l2(uk, uk);
    }

    const TimeWeight w0 = TimeWeight::carleman(p);
    const double lam = p.lambda;
    const double lnS = std::log(p.T + p.a);

    EstimateTerms E;
    E.add("lhs_heat_op_sq", true, weighted_time_integral(op_sq, g, w0));
    E.add("rhs_gradient", false,
          SignedLog::from_value((2.0 / 3.0) * std::sqrt(lam) * beta) *
              weighted_time_integral(dir, g, w0));
    E.add("rhs_zeroth", false,
          SignedLog::from_log(1, std::log(lam * lam / 12.0) + (lam - 2.0) * std::log(p.a)) *
              weighted_time_integral(usq, g, w0));
    E.add("rhs_terminal", false,
          -(SignedLog::from_log(1, std::log(2.0 / 3.0) + log_weight_at_T(p)) *
            SignedLog::from_value(beta * dir[g.nt - 1] + 0.5 * usq[g.nt - 1])));
    SignedLog init = SignedLog::from_log(
                         1, std::log(2.0 / 3.0) + std::log(lam) + (lam - 1.0) * lnS) *
                     SignedLog::from_value(usq[0]);
    if (mode == InitialTermMode::unweighted) {
        // Bare prefactor: divide out phi(0) = exp(2(T+a)^lambda).
        const double two_S_lam = 2.0 * std::exp(lam * lnS);  // may overflow to +inf
        init = std::isinf(two_S_lam) ? SignedLog::zero()
                                     : init * SignedLog::from_log(1, -two_S_lam);
    }
    E.add("rhs_initial", false, -init);
    E.finalize();
    return E;
}

/// Term sheet and empirical coupling constant of the quasi estimate for
/// u_t - beta lap u + f lap q:
///   int (u_t - beta lap u + f lap q)^2 phi
///     >= (lambda^2/4) a^(2 lambda-2) int u^2 phi
///      + beta lambda a^(lambda-1) int |grad u|^2 phi
///      - C1 lambda (T+a)^(lambda-1) int |grad q|^2 phi
///      - lambda (T+a)^(lambda-1) phi(0) int u^2(x,0).
/// C1 exists but is not constructive; c1_hat below is the smallest
/// nonnegative multiplier that closes the margin, found by bisection.
struct QuasiEstimate {
    EstimateTerms terms;    // coupling term evaluated at c1_hat
    double c1_hat = 0.0;    // NaN when no multiplier can close the margin
    bool feasible = true;
    double f_sup = 0.0;       // measured sup |f|
    double f_grad_sup = 0.0;  // measured sup |grad f|
};

inline QuasiEstimate quasi_carleman_estimate_terms(const ScalarField& u, const ScalarField& q,
                                                   const ScalarField& f,
                                                   const CarlemanParams& p, double beta) {
    const SpaceTimeGrid& g = u.grid;
    if (!(q.grid == g) || !(f.grid == g))
        throw std::invalid_argument("quasi estimate: u, q, f must share one grid");
    if (std::abs(g.T - p.T) > 1e-12 * std::max(1.0, g.T))
        throw std::invalid_argument("quasi estimate: grid horizon differs from params");
    if (!(beta > 0.0)) throw std::invalid_argument("quasi estimate: beta must be positive");

    const ScalarField ut = time_derivative(u);

    QuasiEstimate out;
    std::vector<double> op_sq(g.nt), dir_u(g.nt), dir_q(g.nt), usq(g.nt);
    for (std::size_t k = 0; k < g.nt; ++k) {
        const SpatialSlice uk = slice_at(u, k);
        const SpatialSlice utk = slice_at(ut, k);
        const SpatialSlice qk = slice_at(q, k);
        const SpatialSlice fk = slice_at(f, k);
        const SpatialSlice lap_u = laplacian(uk);
        const SpatialSlice lap_q = laplacian(qk);
        SpatialSlice sq(uk.grid);
        for (std::size_t n = 0; n < sq.values.size(); ++n) {
            const double v =
                utk.values[n] - beta * lap_u.values[n] + fk.values[n] * lap_q.values[n];
            sq.values[n] = v * v;
        }
        op_sq[k] = integrate_space(sq);
        dir_u[k] = dirichlet_form(uk, uk);
        dir_q[k] = dirichlet_form(qk, qk);
        usq[k] = inner_l2(uk, uk);

        const SpatialSlice gf = gradient_sq(fk);
        for (std::size_t n = 0; n < fk.values.size(); ++n) {
            out.f_sup = std::max(out.f_sup, std::abs(fk.values[n]));
            out.f_grad_sup = std::max(out.f_grad_sup, std::sqrt(gf.values[n]));
        }
    }

    const TimeWeight w0 = TimeWeight::carleman(p);
    const double lam = p.lambda;
    const double lnS = std::log(p.T + p.a);

    EstimateTerms& E = out.terms;
    E.add("lhs_quasi_op_sq", true, weighted_time_integral(op_sq, g, w0));
    E.add("rhs_zeroth", false,
          SignedLog::from_log(1, std::log(lam * lam / 4.0) +
                                     (2.0 * lam - 2.0) * std::log(p.a)) *
              weighted_time_integral(usq, g, w0));
    E.add("rhs_gradient", false,
          SignedLog::from_log(1, std::log(beta * lam) + (lam - 1.0) * std::log(p.a)) *
              weighted_time_integral(dir_u, g, w0));
    // phi(0) cancels the frame division in the initial term: bare prefactor.
    E.add("rhs_initial", false,
          -(SignedLog::from_log(1, std::log(lam) + (lam - 1.0) * lnS) *
            SignedLog::from_value(usq[0])));

    // Coupling coefficient K = lambda (T+a)^(lambda-1) int |grad q|^2 phi;
    // the coupling term enters the right side as -c1 * K.
    const SignedLog K = SignedLog::from_log(1, std::log(lam) + (lam - 1.0) * lnS) *
                        weighted_time_integral(dir_q, g, w0);

    const SignedLog margin0 = E.lhs_sum() - E.rhs_sum();
    double c1 = 0.0;
    if (margin0.sign() >= 0) {
        c1 = 0.0;
    } else if (K.is_zero()) {
        out.feasible = false;
        c1 = std::numeric_limits<double>::quiet_NaN();
    } else {
        // margin(c) = margin0 + c*K is increasing in c; bracket then bisect
        // to 1e-6 relative.
        auto margin_at = [&](double c) {
            return (margin0 + SignedLog::from_value(c) * K).sign() >= 0;
        };
        double hi = 1.0;
        while (!margin_at(hi)) {
            hi *= 2.0;
            if (hi > 1e300) {
                out.feasible = false;
                break;
            }
        }
        if (out.feasible) {
            double lo = 0.0;
            while (hi - lo > 1e-6 * hi) {
                const double mid = 0.5 * (lo + hi);
                (margin_at(mid) ? hi : lo) = mid;
            }
            c1 = hi;  // upper end: margin certified >= 0
        } else {
            c1 = std::numeric_limits<double>::quiet_NaN();
        }
    }
    out.c1_hat = c1;
    E.add("rhs_coupling", false, -(SignedLog::from_value(out.feasible ? c1 : 0.0) * K));
    E.finalize();
    return out;
}

// ---------------------------------------------------------------------------
// Scalar proof-step audit.
//
// The estimates lean on three elementary parameter facts; each is checked in
// log space so the powers never overflow:
//   (i)   lambda/2 <= (lambda^2/8) a^(lambda-2)          for lambda >= lambda0
//   (ii)  lambda^2 s^(2l-2) - l(l-1) s^(l-1) >= (1/2) lambda^2 s^(2l-2)
//         on s in [a, T+a]   (equivalent: (l-1) ln s >= ln(2(l-1)/l))
//   (iii) rho = (T+a)/a^2 < 1 under the default shift.
// ---------------------------------------------------------------------------

struct AuditCheck {
    std::string name;
    double lambda = 0.0;   // 0 when not lambda-specific
    bool ok = false;
    double log_gap = 0.0;  // ln(rhs) - ln(lhs): >= 0 iff ok (worst case over grids)
};

struct ParameterAuditReport {
    double T = 0.0, a = 0.0, rho = 0.0, lambda0 = 0.0;
    std::vector<AuditCheck> checks;
    bool all_ok = true;

    void add(AuditCheck c) {
        all_ok = all_ok && c.ok;
        checks.push_back(std::move(c));
    }
};

inline ParameterAuditReport parameter_inequality_audit(double T, double a,
                                                       std::span<const double> lambdas,
                                                       std::size_t s_samples = 1000) {
    if (!(T > 0.0) || !(a > 2.0))
        throw std::invalid_argument("parameter audit: need T > 0 and a > 2");
    if (s_samples < 2) throw std::invalid_argument("parameter audit: s_samples >= 2");
    ParameterAuditReport rep;
    rep.T = T;
    rep.a = a;
    rep.rho = (T + a) / (a * a);
    rep.lambda0 = 16.0 * (T + a) * (T + a);

    {
        // Threshold chain 16(T+a)^2 > 16 a^2 > 64.
        AuditCheck c{"threshold_chain", 0.0, false, 0.0};
        c.ok = rep.lambda0 > 16.0 * a * a && 16.0 * a * a > 64.0;
        c.log_gap = std::min(std::log(rep.lambda0) - std::log(16.0 * a * a),
                             std::log(16.0 * a * a) - std::log(64.0));
        rep.add(c);
    }
    for (double lam : lambdas) {
        if (!(lam >= 2.0)) throw std::invalid_argument("parameter audit: lambda >= 2 required");
        {
            AuditCheck c{"absorb_half_lambda", lam, false, 0.0};
            const double lhs_log = std::log(lam / 2.0);
            const double rhs_log = std::log(lam * lam / 8.0) + (lam - 2.0) * std::log(a);
            c.log_gap = rhs_log - lhs_log;
            c.ok = c.log_gap >= 0.0;
            rep.add(c);
        }
        {
            // min over the s-grid of (lam-1) ln s - ln(2(lam-1)/lam).
            AuditCheck c{"dominant_square_power", lam, false, 0.0};
            const double rhs_log = std::log(2.0 * (lam - 1.0) / lam);
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < s_samples; ++i) {
                const double s = a + (T) * double(i) / double(s_samples - 1);
                worst = std::min(worst, (lam - 1.0) * std::log(s) - rhs_log);
            }
            c.log_gap = worst;
            c.ok = worst >= 0.0;
            rep.add(c);
        }
    }
    {
        AuditCheck c{"contraction_ratio", 0.0, false, 0.0};
        c.log_gap = -std::log(rep.rho);  // > 0 iff rho < 1
        c.ok = rep.rho < 1.0;
        rep.add(c);
    }
    return rep;
}

inline ParameterAuditReport parameter_inequality_audit(double T,
                                                       std::size_t s_samples = 1000) {
    const double a = default_shift(T);
    const double lam0 = 16.0 * (T + a) * (T + a);
    const std::vector<double> lams = {lam0, 2.0 * lam0};
    return parameter_inequality_audit(T, a, lams, s_samples);
}

}  // namespace mfglab

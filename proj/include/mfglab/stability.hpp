#pragma once

// Perturb-and-resolve experiments measuring the Lipschitz stability of the
// inverse problem, plus the randomized estimate campaigns ("fuzz") that
// check the pointwise Carleman bounds over a corpus of fields.
//
// Stability experiment: solve a base problem, perturb the observable data
// (terminal value and/or initial density) by a seeded smooth bump of size
// delta, re-solve, and compare
//   lhs  = |du|_{H^{1,0}} + |dp|_{H^{1,0}}
//   rhs  = |du_T|_{H^1(Omega)} + |du(.,0)|_{L^2} + |dp_0|_{L^2}
// where all differences are realized (post-normalization) differences.  A
// Lipschitz-stable reconstruction shows lhs ~ C * rhs with slope one across
// delta decades and a bounded ratio spread.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfglab/carleman.hpp"
#include "mfglab/corpus.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/report.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

struct PerturbationSpec {
    double delta = 1e-2;
    std::uint64_t seed = 1;
    bool perturb_u_T = true;
    bool perturb_p_0 = true;
    std::size_t kmax = 8;  ///< highest bump mode
};

/// New problem with perturbed data.  The density perturbation is scaled back
/// (deterministically) if it would break nonnegativity, and construction
/// re-normalizes the density to unit mass, so the realized data differences
/// can deviate slightly from delta * bump; experiments always measure the
/// realized differences.
inline MfgProblem perturb_problem(const MfgProblem& base, const PerturbationSpec& spec) {
    SpatialSlice u_T = base.u_T;
    SpatialSlice p_0 = base.p_0;
    if (spec.perturb_u_T) {
        const SpatialSlice bump = cosine_bump(base.grid, spec.seed, spec.kmax);
        for (std::size_t n = 0; n < u_T.values.size(); ++n)
            u_T.values[n] += spec.delta * bump.values[n];
    }
    if (spec.perturb_p_0) {
        const SpatialSlice bump = cosine_bump(base.grid, spec.seed ^ 0x5bd1e995u, spec.kmax);
        double alpha = 1.0;
        for (std::size_t n = 0; n < p_0.values.size(); ++n) {
            const double d = spec.delta * bump.values[n];
            if (d < 0.0 && p_0.values[n] + d < 0.0)
                alpha = std::min(alpha, 0.999 * p_0.values[n] / (-d));
        }
        for (std::size_t n = 0; n < p_0.values.size(); ++n)
            p_0.values[n] += alpha * spec.delta * bump.values[n];
    }
    return MfgProblem::make(base.grid, base.beta, base.elasticity, base.kernel,
                            base.interaction, std::move(u_T), std::move(p_0), base.N3,
                            base.N4);
}

struct StabilityRow {
    double delta = 0.0;
    std::uint64_t seed = 0;
    double lhs_h10 = 0.0;
    double rhs_uT_h1 = 0.0;
    double rhs_u0_l2 = 0.0;
    double rhs_p0_l2 = 0.0;
    double ratio = 0.0;  ///< lhs / (sum of the three rhs norms); NaN when degenerate
    std::size_t picard_iters_base = 0;
    std::size_t picard_iters_pert = 0;
    bool degenerate = false;

    double rhs_sum() const { return rhs_uT_h1 + rhs_u0_l2 + rhs_p0_l2; }
};

/// One perturb-and-resolve cell against a precomputed base solution.
inline StabilityRow run_stability_experiment(const MfgProblem& base_problem,
                                             const SolverConfig& solver,
                                             const PerturbationSpec& spec,
                                             const MfgSolution& base) {
    const MfgProblem pert_problem = perturb_problem(base_problem, spec);
    const MfgSolution pert = solve_mfgs(pert_problem, solver);

    StabilityRow row;
    row.delta = spec.delta;
    row.seed = spec.seed;
    row.picard_iters_base = base.iterations;
    row.picard_iters_pert = pert.iterations;

    const ScalarField du = base.u - pert.u;
    const ScalarField dp = base.p - pert.p;
    row.lhs_h10 = norm_h10(du) + norm_h10(dp);
    row.rhs_uT_h1 = norm_h1_omega(base_problem.u_T - pert_problem.u_T);
    row.rhs_u0_l2 = norm_l2_omega(slice_at(base.u, 0) - slice_at(pert.u, 0));
    row.rhs_p0_l2 = norm_l2_omega(base_problem.p_0 - pert_problem.p_0);
    const double rhs = row.rhs_sum();
    if (rhs <= 0.0) {
        row.degenerate = true;
        row.ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
        row.ratio = row.lhs_h10 / rhs;
    }
    return row;
}

struct SweepResult {
    std::vector<StabilityRow> rows;  // delta-major, seed-minor order
    double slope = 0.0;              // d ln(lhs) / d ln(rhs) over all cells
    double ratio_max = 0.0;
    double ratio_min = 0.0;
    std::size_t base_iterations = 0;
};

/// Full sweep: one base solve, then independent cells over deltas x seeds.
inline SweepResult stability_sweep(const MfgProblem& problem, const SolverConfig& solver,
                                   const std::vector<double>& deltas,
                                   const std::vector<std::uint64_t>& seeds,
                                   bool perturb_u_T = true, bool perturb_p_0 = true,
                                   std::size_t kmax = 8, unsigned jobs = 1) {
    if (deltas.empty() || seeds.empty())
        throw std::invalid_argument("stability_sweep: need at least one delta and one seed");
    for (double d : deltas)
        if (!(d > 0.0))
            throw std::invalid_argument("stability_sweep: deltas must be positive");

    const MfgSolution base = solve_mfgs(problem, solver);

    SweepResult res;
    res.base_iterations = base.iterations;
    res.rows.resize(deltas.size() * seeds.size());
    parallel_for(res.rows.size(), jobs, [&](std::size_t cell) {
        const std::size_t di = cell / seeds.size();
        const std::size_t si = cell % seeds.size();
        PerturbationSpec spec;
        spec.delta = deltas[di];
        spec.seed = seeds[si];
        spec.perturb_u_T = perturb_u_T;
        spec.perturb_p_0 = perturb_p_0;
        spec.kmax = kmax;
        res.rows[cell] = run_stability_experiment(problem, solver, spec, base);
    });

    std::vector<double> lx, ly;
    res.ratio_max = 0.0;
    res.ratio_min = std::numeric_limits<double>::infinity();
    for (const StabilityRow& r : res.rows) {
        if (r.degenerate) continue;
        lx.push_back(std::log(r.rhs_sum()));
        ly.push_back(std::log(r.lhs_h10));
        res.ratio_max = std::max(res.ratio_max, r.ratio);
        res.ratio_min = std::min(res.ratio_min, r.ratio);
    }
    res.slope = (lx.size() >= 2) ? fit_slope(lx, ly) : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// Estimate campaigns.
// ---------------------------------------------------------------------------

/// Measured quadrature tolerance: ten corpus members, the exact weighted
/// energy identity at lambda = 3, maximum |residual| on the given grid,
/// times a safety factor of 10.  This is the margin tolerance used when the
/// campaigns assert the estimates at lambda >= lambda0.
inline double measure_quadrature_tolerance(const SpaceTimeGrid& grid, double beta,
                                           CorpusSpec spec) {
    spec.count = 10;
    const CarlemanParams p = CarlemanParams::with_default_shift(grid.T, 3.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < spec.count; ++i) {
        const ScalarField u = corpus_member(grid, spec, i);
        worst = std::max(worst, weighted_energy_identity_residual(u, p, beta).residual);
    }
    return 10.0 * worst;
}

struct FuzzRow {
    std::size_t func_id = 0;
    double lambda = 0.0;
    InitialTermMode mode = InitialTermMode::weighted;
    double margin = 0.0;               // common-frame margin
    double min_passing_lambda = 0.0;   // NaN when no grid lambda passes
};

struct FuzzResult {
    std::vector<FuzzRow> rows;  // func-major, lambda-minor order
    double eps_quad = 0.0;
    double lambda0 = 0.0;
    std::size_t violations_at_lambda0 = 0;  // margins < -eps_quad with lambda >= lambda0
    double worst_margin_at_lambda0 = std::numeric_limits<double>::infinity();
    std::size_t worst_func = 0;
    double worst_lambda = 0.0;
};

/// Randomized campaign for the backward-heat estimate over a corpus and a
/// lambda grid.  Margins below -eps_quad at lambda >= lambda0 are counted as
/// violations; at smaller lambda negative margins are data, not failures.
inline FuzzResult carleman_fuzz(const SpaceTimeGrid& grid, const CorpusSpec& corpus,
                                double beta, std::vector<double> lambda_grid,
                                InitialTermMode mode, double eps_quad, unsigned jobs = 1) {
    if (lambda_grid.empty())
        throw std::invalid_argument("carleman_fuzz: empty lambda grid");
    const double a = default_shift(grid.T);
    FuzzResult res;
    res.eps_quad = eps_quad;
    res.lambda0 = CarlemanParams(grid.T, a, 2.0).lambda0();

    const std::size_t L = lambda_grid.size();
    res.rows.resize(corpus.count * L);
    parallel_for(corpus.count, jobs, [&](std::size_t f) {
        const ScalarField u = corpus_member(grid, corpus, f);
        double min_pass = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t li = 0; li < L; ++li) {
            const CarlemanParams p(grid.T, a, lambda_grid[li]);
            const EstimateTerms terms = carleman_estimate_terms(u, p, beta, mode);
            FuzzRow& row = res.rows[f * L + li];
            row.func_id = f;
            row.lambda = lambda_grid[li];
            row.mode = mode;
            row.margin = terms.margin();
            if (std::isnan(min_pass) && row.margin >= -eps_quad) min_pass = row.lambda;
        }
        for (std::size_t li = 0; li < L; ++li)
            res.rows[f * L + li].min_passing_lambda = min_pass;
    });

    for (const FuzzRow& r : res.rows) {
        if (r.lambda >= res.lambda0) {
            if (r.margin < res.worst_margin_at_lambda0) {
                res.worst_margin_at_lambda0 = r.margin;
                res.worst_func = r.func_id;
                res.worst_lambda = r.lambda;
            }
            if (r.margin < -eps_quad) ++res.violations_at_lambda0;
        }
    }
    return res;
}

struct QuasiFuzzRow {
    std::size_t pair_id = 0;
    double lambda = 0.0;
    double c1_hat = 0.0;
    double margin_at_c1 = 0.0;
    bool feasible = true;
};

struct QuasiFuzzResult {
    std::vector<QuasiFuzzRow> rows;      // pair-major, lambda-minor
    std::vector<double> pair_c1;         // per pair: max over the lambda grid
    double c1_max = 0.0;
    double c1_median = 0.0;
    double f_sup = 0.0, f_grad_sup = 0.0;
    bool all_feasible = true;
    bool any_negative = false;
};

/// Campaign for the quasi estimate: corpus pairs (u = member 2i,
/// q = member 2i+1) against a fixed multiplier field f.  Per pair the
/// reported constant is the max over the lambda grid (a single multiplier
/// must serve every lambda).
inline QuasiFuzzResult quasi_fuzz(const SpaceTimeGrid& grid, const CorpusSpec& corpus,
                                  const ScalarField& f, double beta,
                                  std::vector<double> lambda_grid, std::size_t pairs,
                                  unsigned jobs = 1) {
    if (lambda_grid.empty()) throw std::invalid_argument("quasi_fuzz: empty lambda grid");
    const double a = default_shift(grid.T);
    QuasiFuzzResult res;
    const std::size_t L = lambda_grid.size();
    res.rows.resize(pairs * L);
    res.pair_c1.resize(pairs);
    std::vector<double> fs(pairs, 0.0), fg(pairs, 0.0);
    parallel_for(pairs, jobs, [&](std::size_t i) {
        const ScalarField u = corpus_member(grid, corpus, 2 * i);
        const ScalarField q = corpus_member(grid, corpus, 2 * i + 1);
        double worst = 0.0;
        for (std::size_t li = 0; li < L; ++li) {
            const CarlemanParams p(grid.T, a, lambda_grid[li]);
            const QuasiEstimate est = quasi_carleman_estimate_terms(u, q, f, p, beta);
            QuasiFuzzRow& row = res.rows[i * L + li];
            row.pair_id = i;
            row.lambda = lambda_grid[li];
            row.c1_hat = est.c1_hat;
            row.margin_at_c1 = est.terms.margin();
            row.feasible = est.feasible;
            if (est.feasible) worst = std::max(worst, est.c1_hat);
            fs[i] = est.f_sup;
            fg[i] = est.f_grad_sup;
        }
        res.pair_c1[i] = worst;
    });
    for (std::size_t i = 0; i < pairs; ++i) {
        res.f_sup = std::max(res.f_sup, fs[i]);
        res.f_grad_sup = std::max(res.f_grad_sup, fg[i]);
    }
    for (const QuasiFuzzRow& r : res.rows) {
        res.all_feasible = res.all_feasible && r.feasible;
        if (r.feasible && r.c1_hat < 0.0) res.any_negative = true;
    }
    std::vector<double> sorted = res.pair_c1;
    std::sort(sorted.begin(), sorted.end());
    res.c1_max = sorted.empty() ? 0.0 : sorted.back();
    res.c1_median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
    return res;
}

// ---------------------------------------------------------------------------
// Emission.
// ---------------------------------------------------------------------------

inline std::string carleman_front_matter(double T, double a, double beta,
                                         const std::vector<double>& lambda_grid,
                                         const char* mode, double lambda = 0.0) {
    nlohmann::json j;
    j["T"] = T;
    j["a"] = a;
    j["beta"] = beta;
    j["lambda0"] = 16.0 * (T + a) * (T + a);
    j["rho"] = (T + a) / (a * a);
    if (lambda > 0.0) j["lambda"] = lambda;
    if (!lambda_grid.empty()) j["lambda_grid"] = lambda_grid;
    if (mode) j["mode"] = mode;
    return j.dump();
}

inline void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
    CsvWriter csv({"delta", "seed", "lhs_h10", "rhs_uT_h1", "rhs_u0_l2", "rhs_p0_l2",
                   "ratio", "picard_iters_base", "picard_iters_pert"});
    for (const StabilityRow& r : sweep.rows)
        csv.add_row({format_double(r.delta), std::to_string(r.seed),
                     format_double(r.lhs_h10), format_double(r.rhs_uT_h1),
                     format_double(r.rhs_u0_l2), format_double(r.rhs_p0_l2),
                     format_double(r.ratio), std::to_string(r.picard_iters_base),
                     std::to_string(r.picard_iters_pert)});
    csv.write(path);
}

/// log-log response plot, one polyline per seed.
inline void write_sweep_svg(const std::string& path, const SweepResult& sweep) {
    SvgLinePlot plot("perturbation response", "log10 data difference",
                     "log10 solution difference");
    std::vector<std::uint64_t> seeds;
    for (const StabilityRow& r : sweep.rows)
        if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end())
            seeds.push_back(r.seed);
    for (std::uint64_t s : seeds) {
        std::vector<double> xs, ys;
        for (const StabilityRow& r : sweep.rows) {
            if (r.seed != s || r.degenerate) continue;
            xs.push_back(std::log10(r.rhs_sum()));
            ys.push_back(std::log10(r.lhs_h10));
        }
        plot.add_series("seed " + std::to_string(s), xs, ys);
    }
    plot.write(path);
}

inline void write_fuzz_csv(const std::string& path, const FuzzResult& fuzz, double T,
                           double a, double beta, const std::vector<double>& lambda_grid) {
    CsvWriter csv({"func_id", "lambda", "mode", "margin", "min_passing_lambda"});
    csv.set_front_matter(carleman_front_matter(
        T, a, beta, lambda_grid,
        fuzz.rows.empty() ? "corrected" : to_string(fuzz.rows.front().mode)));
    for (const FuzzRow& r : fuzz.rows)
        csv.add_row({std::to_string(r.func_id), format_double(r.lambda), to_string(r.mode),
                     format_double(r.margin), format_double(r.min_passing_lambda)});
    csv.write(path);
}

/// margin vs lambda, one polyline per corpus function (capped for legibility).
inline void write_margin_svg(const std::string& path, const FuzzResult& fuzz,
                             std::size_t max_series = 12) {
    SvgLinePlot plot("estimate margin vs lambda", "lambda", "common-frame margin");
    std::vector<std::size_t> funcs;
    for (const FuzzRow& r : fuzz.rows)
        if (std::find(funcs.begin(), funcs.end(), r.func_id) == funcs.end())
            funcs.push_back(r.func_id);
    if (funcs.size() > max_series) funcs.resize(max_series);
    for (std::size_t f : funcs) {
        std::vector<double> xs, ys;
        for (const FuzzRow& r : fuzz.rows) {
            if (r.func_id != f) continue;
            xs.push_back(r.lambda);
            ys.push_back(r.margin);
        }
        plot.add_series("f" + std::to_string(f), xs, ys);
    }
    plot.write(path);
}

inline void write_estimate_terms_csv(const std::string& path, const EstimateTerms& terms,
                                     const CarlemanParams& p, double beta,
                                     const char* mode) {
    CsvWriter csv({"term_name", "sign", "log_magnitude", "rescaled_value"});
    csv.set_front_matter(carleman_front_matter(p.T, p.a, beta, {}, mode, p.lambda));
    for (const EstimateTerms::Term& t : terms.terms)
        csv.add_row({t.name, std::to_string(t.value.sign()),
                     format_double(t.value.log_magnitude()), format_double(t.rescaled)});
    csv.write(path);
}

inline void write_quasi_csv(const std::string& path, const QuasiFuzzResult& res, double T,
                            double a, double beta, const std::vector<double>& lambda_grid) {
    CsvWriter csv({"pair_id", "lambda", "c1_hat", "margin_at_c1", "feasible"});
    csv.set_front_matter(carleman_front_matter(T, a, beta, lambda_grid, nullptr));
    for (const QuasiFuzzRow& r : res.rows)
        csv.add_row({std::to_string(r.pair_id), format_double(r.lambda),
                     format_double(r.c1_hat), format_double(r.margin_at_c1),
                     r.feasible ? "1" : "0"});
    csv.write(path);
}

}  // namespace mfglab

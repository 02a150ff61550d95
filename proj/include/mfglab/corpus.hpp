#pragma once

// Random cosine-series test fields.  Every member satisfies the zero-flux
// boundary condition exactly at the discrete level: cosine modes are even
// across both walls, so the mirror-ghost convention introduces no boundary
// error at all, and the node-centred normal difference vanishes identically.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

struct CorpusSpec {
    std::size_t count = 10;   ///< number of fields to generate
    std::size_t kmax = 7;     ///< highest spatial mode per axis (inclusive)
    std::size_t mmax = 7;     ///< highest temporal mode (inclusive)
    double decay = 3.0;       ///< coefficient decay exponent s in (1+|k|^2+m^2)^-s
    double amplitude = 1.0;   ///< overall scale
    std::uint64_t seed = 1;   ///< generator seed; same seed, same corpus
};

namespace detail {

/// Deterministic standard normal via Box-Muller on mt19937_64 uniforms.
/// Avoids std::normal_distribution so the stream is pinned by this code
/// alone, not by a library implementation choice.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}
    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

private:
    double uniform() {
        // 53-bit mantissa uniform in [0,1).
        return double(eng_() >> 11) * 0x1.0p-53;
    }
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detail

/// One cosine-series member: u = sum c_{k,m} cos(kx pi x/Lx) [cos(ky pi y/Ly)]
/// cos(m pi t/T), coefficients N(0,1) damped by (1+|k|^2+m^2)^-decay.
/// Members are smooth, zero-flux compatible, and generically have
/// u(.,0) != 0 and u(.,T) != 0.
inline ScalarField corpus_member(const SpaceTimeGrid& g, const CorpusSpec& spec,
                                 std::size_t index) {
    // Per-member engine: decorrelates members and makes generation order
    // irrelevant (members can be produced independently and in parallel).
    detail::NormalSampler normal(spec.seed * 0x9e3779b97f4a7c15ull + 0x51ull * (index + 1));

    const std::size_t kyn = (g.dim == 2) ? spec.kmax + 1 : 1;
    std::vector<double> coeff((spec.kmax + 1) * kyn * (spec.mmax + 1));
    std::size_t n = 0;
    for (std::size_t kx = 0; kx <= spec.kmax; ++kx)
        for (std::size_t ky = 0; ky < kyn; ++ky)
            for (std::size_t m = 0; m <= spec.mmax; ++m) {
                const double k2 = double(kx * kx + ky * ky + m * m);
                coeff[n++] = spec.amplitude * normal() * std::pow(1.0 + k2, -spec.decay);
            }

    // Per-axis mode tables; the triple accumulation is then a plain sum.
    const double pi = 3.14159265358979323846;
    std::vector<double> cx((spec.kmax + 1) * g.nx), cy(kyn * g.ny),
        ct((spec.mmax + 1) * g.nt);
    for (std::size_t k = 0; k <= spec.kmax; ++k)
        for (std::size_t i = 0; i < g.nx; ++i)
            cx[k * g.nx + i] = std::cos(double(k) * pi * g.x(i) / g.Lx);
    for (std::size_t k = 0; k < kyn; ++k)
        for (std::size_t j = 0; j < g.ny; ++j)
            cy[k * g.ny + j] = (g.dim == 2)
                                   ? std::cos(double(k) * pi * g.y(j) / g.Ly)
                                   : 1.0;
    for (std::size_t m = 0; m <= spec.mmax; ++m)
        for (std::size_t k = 0; k < g.nt; ++k)
            ct[m * g.nt + k] = std::cos(double(m) * pi * g.t(k) / g.T);

    ScalarField u(g);
    n = 0;
    for (std::size_t kx = 0; kx <= spec.kmax; ++kx)
        for (std::size_t ky = 0; ky < kyn; ++ky)
            for (std::size_t m = 0; m <= spec.mmax; ++m) {
                const double c = coeff[n++];
                if (c == 0.0) continue;
                for (std::size_t i = 0; i < g.nx; ++i) {
                    const double a = c * cx[kx * g.nx + i];
                    for (std::size_t j = 0; j < g.ny; ++j) {
                        const double b = a * cy[ky * g.ny + j];
                        double* col = &u.values[(i * g.ny + j) * g.nt];
                        const double* tc = &ct[m * g.nt];
                        for (std::size_t k = 0; k < g.nt; ++k) col[k] += b * tc[k];
                    }
                }
            }
    return u;
}

/// The full corpus, index order.  Bit-identical for identical (grid, spec).
inline std::vector<ScalarField> neumann_corpus(const SpaceTimeGrid& g,
                                               const CorpusSpec& spec) {
    std::vector<ScalarField> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) out.push_back(corpus_member(g, spec, i));
    return out;
}

/// Smooth spatial perturbation bump: sum over modes k >= 1 of
/// xi_k (1+k^2)^-1 cos(k pi x/Lx) [cos(k' pi y/Ly)], used for data
/// perturbations and synthetic measurement noise.  Unit shape; callers scale.
inline SpatialSlice cosine_bump(const SpaceTimeGrid& g, std::uint64_t seed,
                                std::size_t kmax = 8) {
    detail::NormalSampler normal(seed * 0x9e3779b97f4a7c15ull + 0xb5ull);
    SpatialSlice s(g);
    const double pi = 3.14159265358979323846;
    if (g.dim == 1) {
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double c = normal() / (1.0 + double(k * k));
            for (std::size_t i = 0; i < g.nx; ++i)
                s.at(i, 0) += c * std::cos(double(k) * pi * g.x(i) / g.Lx);
        }
    } else {
        for (std::size_t kx = 0; kx <= kmax; ++kx)
            for (std::size_t ky = 0; ky <= kmax; ++ky) {
                if (kx + ky == 0) continue;
                const double c = normal() / (1.0 + double(kx * kx + ky * ky));
                for (std::size_t i = 0; i < g.nx; ++i)
                    for (std::size_t j = 0; j < g.ny; ++j)
                        s.at(i, j) += c * std::cos(double(kx) * pi * g.x(i) / g.Lx) *
                                      std::cos(double(ky) * pi * g.y(j) / g.Ly);
            }
    }
    return s;
}

}  // namespace mfglab

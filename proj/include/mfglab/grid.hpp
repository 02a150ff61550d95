#pragma once

// Uniform tensor-product grids on boxes, scalar fields over space-time, and
// the discrete calculus used throughout: central differences with mirror
// ghosts (zero-flux boundaries), trapezoid quadrature, and the face-difference
// Dirichlet form that makes discrete integration by parts exact.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfglab {

/// Uniform grid on [0,Lx] ([0,Lx]x[0,Ly] when dim == 2) times [0,T].
/// Nodes are vertex-centred: spacing hx = Lx/(nx-1), tau = T/(nt-1).
struct SpaceTimeGrid {
    int dim = 1;
    std::size_t nx = 2;
    std::size_t ny = 1;  // 1 when dim == 1
    std::size_t nt = 2;
    double Lx = 1.0;
    double Ly = 1.0;     // ignored when dim == 1
    double T = 1.0;

    static SpaceTimeGrid box1d(std::size_t nx, double Lx, std::size_t nt, double T) {
        SpaceTimeGrid g;
        g.dim = 1; g.nx = nx; g.ny = 1; g.nt = nt; g.Lx = Lx; g.Ly = 1.0; g.T = T;
        g.validate();
        return g;
    }

    static SpaceTimeGrid box2d(std::size_t nx, std::size_t ny, double Lx, double Ly,
                               std::size_t nt, double T) {
        SpaceTimeGrid g;
        g.dim = 2; g.nx = nx; g.ny = ny; g.nt = nt; g.Lx = Lx; g.Ly = Ly; g.T = T;
        g.validate();
        return g;
    }

    void validate() const {
        if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
        if (nx < 2) throw std::invalid_argument("grid: nx must be >= 2");
        if (dim == 2 && ny < 2) throw std::invalid_argument("grid: ny must be >= 2 in 2-d");
        if (dim == 1 && ny != 1) throw std::invalid_argument("grid: ny must be 1 in 1-d");
        if (nt < 2) throw std::invalid_argument("grid: nt must be >= 2");
        if (!(Lx > 0.0) || (dim == 2 && !(Ly > 0.0)))
            throw std::invalid_argument("grid: box lengths must be positive");
        if (!(T > 0.0)) throw std::invalid_argument("grid: T must be positive");
    }

    double hx() const { return Lx / double(nx - 1); }
    double hy() const { return dim == 2 ? Ly / double(ny - 1) : 0.0; }
    double tau() const { return T / double(nt - 1); }

    double x(std::size_t i) const { return hx() * double(i); }
    double y(std::size_t j) const { return dim == 2 ? hy() * double(j) : 0.0; }
    double t(std::size_t k) const { return tau() * double(k); }

    std::size_t space_points() const { return nx * ny; }

    /// Trapezoid weight along x (hx, halved at the two boundary nodes).
    double wx(std::size_t i) const {
        return (i == 0 || i + 1 == nx) ? 0.5 * hx() : hx();
    }
    /// Trapezoid weight along y; 1 in 1-d so products reduce to the x weight.
    double wy(std::size_t j) const {
        if (dim == 1) return 1.0;
        return (j == 0 || j + 1 == ny) ? 0.5 * hy() : hy();
    }
    /// Trapezoid weight in time.
    double wt(std::size_t k) const {
        return (k == 0 || k + 1 == nt) ? 0.5 * tau() : tau();
    }
    /// Spatial quadrature weight of node (i,j).
    double node_weight(std::size_t i, std::size_t j) const { return wx(i) * wy(j); }

    bool same_space(const SpaceTimeGrid& o) const {
        return dim == o.dim && nx == o.nx && ny == o.ny && Lx == o.Lx && Ly == o.Ly;
    }
    bool operator==(const SpaceTimeGrid& o) const {
        return same_space(o) && nt == o.nt && T == o.T;
    }
};

/// Scalar values over the spatial nodes of a grid at one time level.
struct SpatialSlice {
    SpaceTimeGrid grid;  // nt/T carried along for context; values ignore time
    std::vector<double> values;

    SpatialSlice() = default;
    explicit SpatialSlice(const SpaceTimeGrid& g, double fill = 0.0)
        : grid(g), values(g.space_points(), fill) {}

    static SpatialSlice from_function(const SpaceTimeGrid& g,
                                      const std::function<double(double, double)>& f) {
        SpatialSlice s(g);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                s.at(i, j) = f(g.x(i), g.y(j));
        return s;
    }

    double& at(std::size_t i, std::size_t j = 0) { return values[i * grid.ny + j]; }
    double at(std::size_t i, std::size_t j = 0) const { return values[i * grid.ny + j]; }
};

/// Scalar values over all space-time nodes.  Layout is space-major with the
/// time index fastest: linear index = (ix*ny + iy)*nt + it.
struct ScalarField {
    SpaceTimeGrid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const SpaceTimeGrid& g, double fill = 0.0)
        : grid(g), values(g.space_points() * g.nt, fill) {}

    static ScalarField from_function(const SpaceTimeGrid& g,
                                     const std::function<double(double, double, double)>& f) {
        ScalarField u(g);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                for (std::size_t k = 0; k < g.nt; ++k)
                    u.at(i, j, k) = f(g.x(i), g.y(j), g.t(k));
        return u;
    }

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return values[(i * grid.ny + j) * grid.nt + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return values[(i * grid.ny + j) * grid.nt + k];
    }
    // 1-d convenience.
    double& at(std::size_t i, std::size_t k) { return at(i, 0, k); }
    double at(std::size_t i, std::size_t k) const { return at(i, 0, k); }
};

inline void require_same_space(const SpatialSlice& a, const SpatialSlice& b,
                               const char* where) {
    if (!a.grid.same_space(b.grid))
        throw std::invalid_argument(std::string(where) + ": grids differ");
}

/// Extract the spatial slice at time level k.
inline SpatialSlice slice_at(const ScalarField& u, std::size_t k) {
    if (k >= u.grid.nt) throw std::invalid_argument("slice_at: time level out of range");
    SpatialSlice s(u.grid);
    for (std::size_t i = 0; i < u.grid.nx; ++i)
        for (std::size_t j = 0; j < u.grid.ny; ++j)
            s.at(i, j) = u.at(i, j, k);
    return s;
}

// ---------------------------------------------------------------------------
// Node-centred spatial derivatives.  Mirror ghosts encode the zero-flux
// boundary: the ghost value equals the first interior value, so the centred
// normal difference at a boundary node is exactly zero.
// ---------------------------------------------------------------------------

/// Node-centred spatial gradient (one slice per axis).  Central differences
/// in the interior; identically zero at boundary nodes in the normal
/// direction by the mirror convention.
inline std::vector<SpatialSlice> gradient(const SpatialSlice& u) {
    const SpaceTimeGrid& g = u.grid;
    std::vector<SpatialSlice> out;
    out.emplace_back(g);
    const double ihx2 = 1.0 / (2.0 * g.hx());
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j)
            out[0].at(i, j) = (i == 0 || i + 1 == g.nx)
                                  ? 0.0
                                  : (u.at(i + 1, j) - u.at(i - 1, j)) * ihx2;
    if (g.dim == 2) {
        out.emplace_back(g);
        const double ihy2 = 1.0 / (2.0 * g.hy());
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j)
                out[1].at(i, j) = (j == 0 || j + 1 == g.ny)
                                      ? 0.0
                                      : (u.at(i, j + 1) - u.at(i, j - 1)) * ihy2;
    }
    return out;
}

/// |grad u|^2 at every node, from the node-centred gradient.
inline SpatialSlice gradient_sq(const SpatialSlice& u) {
    auto gr = gradient(u);
    SpatialSlice out(u.grid);
    for (std::size_t n = 0; n < out.values.size(); ++n) {
        double s = gr[0].values[n] * gr[0].values[n];
        if (gr.size() > 1) s += gr[1].values[n] * gr[1].values[n];
        out.values[n] = s;
    }
    return out;
}

/// 3-point (1-d) / 5-point (2-d) Laplacian with mirror ghosts.  At a boundary
/// node the normal part collapses to 2*(u_in - u_b)/h^2, which is the
/// zero-flux finite-volume stencil on the half cell.
inline SpatialSlice laplacian(const SpatialSlice& u) {
    const SpaceTimeGrid& g = u.grid;
    SpatialSlice out(g);
    const double ihx2 = 1.0 / (g.hx() * g.hx());
    for (std::size_t i = 0; i < g.nx; ++i) {
        for (std::size_t j = 0; j < g.ny; ++j) {
            double v;
            if (i == 0) v = 2.0 * (u.at(1, j) - u.at(0, j)) * ihx2;
            else if (i + 1 == g.nx) v = 2.0 * (u.at(g.nx - 2, j) - u.at(g.nx - 1, j)) * ihx2;
            else v = (u.at(i + 1, j) - 2.0 * u.at(i, j) + u.at(i - 1, j)) * ihx2;
            out.at(i, j) = v;
        }
    }
    if (g.dim == 2) {
        const double ihy2 = 1.0 / (g.hy() * g.hy());
        for (std::size_t i = 0; i < g.nx; ++i) {
            for (std::size_t j = 0; j < g.ny; ++j) {
                double v;
                if (j == 0) v = 2.0 * (u.at(i, 1) - u.at(i, 0)) * ihy2;
                else if (j + 1 == g.ny) v = 2.0 * (u.at(i, g.ny - 2) - u.at(i, g.ny - 1)) * ihy2;
                else v = (u.at(i, j + 1) - 2.0 * u.at(i, j) + u.at(i, j - 1)) * ihy2;
                out.at(i, j) += v;
            }
        }
    }
    return out;
}

/// Time derivative: centred in the interior, one-sided second order at the
/// two endpoints.  O(tau^2) everywhere for smooth fields.
inline ScalarField time_derivative(const ScalarField& u) {
    const SpaceTimeGrid& g = u.grid;
    if (g.nt < 3)
        throw std::invalid_argument("time_derivative: needs at least 3 time levels");
    ScalarField out(g);
    const double it2 = 1.0 / (2.0 * g.tau());
    for (std::size_t i = 0; i < g.nx; ++i) {
        for (std::size_t j = 0; j < g.ny; ++j) {
            out.at(i, j, 0) =
                (-3.0 * u.at(i, j, 0) + 4.0 * u.at(i, j, 1) - u.at(i, j, 2)) * it2;
            for (std::size_t k = 1; k + 1 < g.nt; ++k)
                out.at(i, j, k) = (u.at(i, j, k + 1) - u.at(i, j, k - 1)) * it2;
            out.at(i, j, g.nt - 1) = (3.0 * u.at(i, j, g.nt - 1) -
                                      4.0 * u.at(i, j, g.nt - 2) + u.at(i, j, g.nt - 3)) * it2;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature and norms.
// ---------------------------------------------------------------------------

/// Trapezoid integral over the spatial box.
inline double integrate_space(const SpatialSlice& u) {
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j)
            s += u.at(i, j) * g.node_weight(i, j);
    return s;
}

/// Trapezoid integral of u*v over the spatial box.
inline double inner_l2(const SpatialSlice& u, const SpatialSlice& v) {
    require_same_space(u, v, "inner_l2");
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j)
            s += u.at(i, j) * v.at(i, j) * g.node_weight(i, j);
    return s;
}

/// Face-difference Dirichlet form: integral of grad u . grad v assembled
/// from first differences on cell faces.  This is the exact summation-by-
/// parts partner of `laplacian` under `integrate_space`:
///     sum_ij w_ij (lap u)_ij v_ij  ==  -dirichlet_form(u, v)   (to rounding)
/// for arbitrary fields.  A node-centred central gradient cannot satisfy
/// this identity exactly (it annihilates the odd-even mode), which is why
/// energies and the identity checks are built on the face form.
inline double dirichlet_form(const SpatialSlice& u, const SpatialSlice& v) {
    require_same_space(u, v, "dirichlet_form");
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    const double ihx = 1.0 / g.hx();
    for (std::size_t i = 0; i + 1 < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j) {
            const double du = (u.at(i + 1, j) - u.at(i, j)) * ihx;
            const double dv = (v.at(i + 1, j) - v.at(i, j)) * ihx;
            s += du * dv * g.hx() * g.wy(j);
        }
    if (g.dim == 2) {
        const double ihy = 1.0 / g.hy();
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j + 1 < g.ny; ++j) {
                const double du = (u.at(i, j + 1) - u.at(i, j)) * ihy;
                const double dv = (v.at(i, j + 1) - v.at(i, j)) * ihy;
                s += du * dv * g.hy() * g.wx(i);
            }
    }
    return s;
}

/// Trapezoid integral over the space-time cylinder.
inline double integrate_spacetime(const ScalarField& u) {
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    for (std::size_t k = 0; k < g.nt; ++k)
        s += integrate_space(slice_at(u, k)) * g.wt(k);
    return s;
}

inline double norm_l2_omega(const SpatialSlice& u) {
    return std::sqrt(inner_l2(u, u));
}

/// H1(Omega) norm: sqrt( int u^2 + |grad u|^2 ), gradient energy from the
/// face form.
inline double norm_h1_omega(const SpatialSlice& u) {
    return std::sqrt(inner_l2(u, u) + dirichlet_form(u, u));
}

/// L2 over the space-time cylinder.
inline double norm_l2_qt(const ScalarField& u) {
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    for (std::size_t k = 0; k < g.nt; ++k) {
        const SpatialSlice sl = slice_at(u, k);
        s += inner_l2(sl, sl) * g.wt(k);
    }
    return std::sqrt(s);
}

/// H^{1,0} norm over the cylinder: sqrt( int_QT u^2 + |grad u|^2 dx dt ),
/// first-order in space only.
inline double norm_h10(const ScalarField& u) {
    const SpaceTimeGrid& g = u.grid;
    double s = 0.0;
    for (std::size_t k = 0; k < g.nt; ++k) {
        const SpatialSlice sl = slice_at(u, k);
        s += (inner_l2(sl, sl) + dirichlet_form(sl, sl)) * g.wt(k);
    }
    return std::sqrt(s);
}

// Arithmetic helpers used by the solvers and experiments.

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid == b.grid)) throw std::invalid_argument("field difference: grids differ");
    ScalarField out = a;
    for (std::size_t n = 0; n < out.values.size(); ++n) out.values[n] -= b.values[n];
    return out;
}

inline SpatialSlice operator-(const SpatialSlice& a, const SpatialSlice& b) {
    require_same_space(a, b, "slice difference");
    SpatialSlice out = a;
    for (std::size_t n = 0; n < out.values.size(); ++n) out.values[n] -= b.values[n];
    return out;
}

/// Relative L2(Q_T) distance, guarded for a zero reference.
inline double rel_change(const ScalarField& a, const ScalarField& ref) {
    const double d = norm_l2_qt(a - ref);
    const double r = norm_l2_qt(ref);
    return d / (r > 1e-300 ? r : 1.0);
}

}  // namespace mfglab

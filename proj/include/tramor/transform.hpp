#ifndef TRAMOR_TRANSFORM_HPP
#define TRAMOR_TRANSFORM_HPP

#include <cmath>
#include <optional>
#include <sstream>

#include "tramor/diff_ops.hpp"
#include "tramor/grid.hpp"

namespace tramor {

enum class TransformKind { PeriodicShift, VirtualDomainShift, Identity };
enum class InterpKind { CubicLagrange };

namespace detail {

// Snap tolerance (in cells) below which a shift is treated as a lattice
// shift and realized as an exact index rotation.
constexpr double kLatticeSnap = 1e-9;

inline std::array<double, 4> cubic_weights_centered(double t) {
    // Lagrange weights on nodes {-1,0,1,2} evaluated at t in [0,1).
    return {-t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0};
}

inline std::array<double, 4> cubic_weights_generic(double x) {
    // Lagrange weights on nodes {0,1,2,3} evaluated at x.
    return {(x - 1.0) * (x - 2.0) * (x - 3.0) / -6.0,
            x * (x - 2.0) * (x - 3.0) / 2.0,
            x * (x - 1.0) * (x - 3.0) / -2.0,
            x * (x - 1.0) * (x - 2.0) / 6.0};
}

} // namespace detail

/// Parametrized family eta -> T(eta) of transformations acting on grid
/// functions: periodic spatial shift, shift with modes stored on an
/// extended virtual domain and restricted to the physical one, or the
/// identity. Shift evaluation off the lattice uses cubic Lagrange
/// interpolation on the two stored nodes on each side of the target.
struct TransformFamily {
    TransformKind kind = TransformKind::Identity;
    Grid grid;                      // physical grid (domain of the output)
    std::optional<Grid> virtual_grid; // mode storage grid (VirtualDomainShift)
    InterpKind interp = InterpKind::CubicLagrange;
    int param_dim = 1;
    DiffOrder d1_order = DiffOrder::D1_6th; // discretization backing T'

    static TransformFamily periodic_shift(const Grid& g, DiffOrder d1 = DiffOrder::D1_6th) {
        if (g.topology != Topology::Periodic)
            throw DimensionError("periodic_shift requires a periodic grid");
        TransformFamily f;
        f.kind = TransformKind::PeriodicShift;
        f.grid = g;
        f.d1_order = d1;
        return f;
    }

    static TransformFamily identity(const Grid& g) {
        TransformFamily f;
        f.kind = TransformKind::Identity;
        f.grid = g;
        return f;
    }

    /// Virtual domain covers {xi - p : xi in grid, p in [p_min, p_max]}
    /// plus one interpolation stencil of margin; nodes stay on the
    /// physical lattice so lattice shifts remain exact.
    static TransformFamily virtual_domain_shift(const Grid& g, double p_min, double p_max,
                                                DiffOrder d1 = DiffOrder::D1_2nd) {
        if (g.topology != Topology::Bounded)
            throw DimensionError("virtual_domain_shift requires a bounded grid");
        TransformFamily f;
        f.kind = TransformKind::VirtualDomainShift;
        f.grid = g;
        f.d1_order = d1;
        const double h = g.dxi();
        const int margin = 3;
        const int left_cells = static_cast<int>(std::ceil(std::max(p_max, 0.0) / h - detail::kLatticeSnap)) + margin;
        const int right_cells = static_cast<int>(std::ceil(std::max(-p_min, 0.0) / h - detail::kLatticeSnap)) + margin;
        const int n_v = g.n + left_cells + right_cells;
        f.virtual_grid = Grid(n_v, g.xi0 - left_cells * h, (n_v - 1) * h, Topology::Bounded);
        return f;
    }

    /// Grid on which this family's modes live.
    const Grid& mode_grid() const {
        return kind == TransformKind::VirtualDomainShift ? *virtual_grid : grid;
    }
};

/// T(eta) phi: samples phi at xi_k - eta. Output lives on the family's
/// physical grid. Lattice shifts reduce to exact index rotations.
inline GridFunction transform(const TransformFamily& fam, double eta, const GridFunction& phi) {
    if (fam.kind == TransformKind::Identity) {
        if (!(phi.grid == fam.grid)) throw DimensionError("transform: field not on family grid");
        return phi;
    }
    if (!(phi.grid == fam.mode_grid()))
        throw DimensionError("transform: field not on the family's mode grid");

    const int c = phi.components();
    const Grid& out_grid = fam.grid;
    GridFunction out(out_grid, c);

    if (fam.kind == TransformKind::PeriodicShift) {
        const int n = out_grid.n;
        const double s = eta / out_grid.dxi();
        const double s_round = std::round(s);
        if (std::abs(s - s_round) < detail::kLatticeSnap) {
            long shift = static_cast<long>(s_round) % n;
            for (int k = 0; k < n; ++k) {
                long src = (k - shift) % n;
                if (src < 0) src += n;
                out.values.col(k) = phi.values.col(static_cast<int>(src));
            }
            return out;
        }
        const double S = std::floor(s);
        const double t = 1.0 - (s - S); // local coordinate in (0,1)
        const auto w = detail::cubic_weights_centered(t);
        const long Sl = static_cast<long>(S);
        for (int k = 0; k < n; ++k) {
            long base = k - Sl - 2; // leftmost of the four stencil nodes
            for (int ci = 0; ci < c; ++ci) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    long idx = (base + j) % n;
                    if (idx < 0) idx += n;
                    acc += w[j] * phi.values(ci, static_cast<int>(idx));
                }
                out.values(ci, k) = acc;
            }
        }
        return out;
    }

    // VirtualDomainShift: evaluate the stored virtual-domain field at
    // xi_k - eta and restrict to the physical grid.
    const Grid& vg = *fam.virtual_grid;
    const double h = vg.dxi();
    for (int k = 0; k < out_grid.n; ++k) {
        const double u = (out_grid.node(k) - eta - vg.xi0) / h;
        if (u < -detail::kLatticeSnap || u > vg.n - 1 + detail::kLatticeSnap) {
            std::ostringstream msg;
            msg << "transform: shift eta=" << eta << " evaluates node xi=" << out_grid.node(k)
                << " outside the virtual hull [" << vg.xi0 << ", " << vg.xi0 + vg.length << "]";
            throw DomainExceededError(msg.str());
        }
        const double u_round = std::round(u);
        if (std::abs(u - u_round) < detail::kLatticeSnap) {
            int src = std::min(std::max(static_cast<int>(u_round), 0), vg.n - 1);
            out.values.col(k) = phi.values.col(src);
            continue;
        }
        int j0 = static_cast<int>(std::floor(u)) - 1;
        j0 = std::min(std::max(j0, 0), vg.n - 4);
        const auto w = detail::cubic_weights_generic(u - j0);
        for (int ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) acc += w[j] * phi.values(ci, j0 + j);
            out.values(ci, k) = acc;
        }
    }
    return out;
}

/// Discrete realization of [T'(eta) phi] e1. The sign follows
/// d/deta phi(. - eta) = -d/dxi phi(. - eta); the spatial derivative uses
/// the same discretization as the full-order model.
inline GridFunction transform_derivative(const TransformFamily& fam, double eta,
                                         const GridFunction& phi) {
    if (fam.kind == TransformKind::Identity)
        return GridFunction(fam.grid, MatrixXd::Zero(phi.components(), fam.grid.n));
    GridFunction shifted = transform(fam, eta, phi);
    DiffOp d1(fam.d1_order, fam.grid);
    GridFunction der = apply_diff(d1, shifted);
    der.values *= -1.0;
    return der;
}

} // namespace tramor

#endif

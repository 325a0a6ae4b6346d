#ifndef TRAMOR_DIFF_OPS_HPP
#define TRAMOR_DIFF_OPS_HPP

#include <array>
#include <vector>

#include "tramor/grid.hpp"

namespace tramor {

enum class DiffOrder { D1_6th, D2_6th, D1_2nd, D2_2nd };
enum class BoundaryClosure { PeriodicCirculant, OneSidedClosure };

namespace detail {

/// Fornberg finite-difference weights for the m-th derivative at x0 on
/// the stencil nodes x (exact rational recurrence, done in doubles).
inline std::vector<double> fd_weights(double x0, const std::vector<double>& x, int m) {
    const int nd = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(nd, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < nd; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(nd);
    for (int i = 0; i < nd; ++i) w[i] = c[i][m];
    return w;
}

struct Stencil {
    std::vector<double> coeffs; // centered, odd length
    int half = 0;
    int deriv = 1;
};

inline Stencil interior_stencil(DiffOrder order) {
    switch (order) {
    case DiffOrder::D1_6th:
        return {{-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60}, 3, 1};
    case DiffOrder::D2_6th:
        return {{1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90}, 3, 2};
    case DiffOrder::D1_2nd:
        return {{-0.5, 0.0, 0.5}, 1, 1};
    case DiffOrder::D2_2nd:
        return {{1.0, -2.0, 1.0}, 1, 2};
    }
    throw Error("unknown stencil order");
}

} // namespace detail

/// Finite-difference derivative operator on a grid. Periodic closure
/// wraps the centered stencil; one-sided closure replaces boundary rows
/// by shifted stencils of the same width and order of accuracy.
struct DiffOp {
    DiffOrder order = DiffOrder::D1_6th;
    Grid grid;
    BoundaryClosure boundary = BoundaryClosure::PeriodicCirculant;

    DiffOp() = default;
    DiffOp(DiffOrder ord, const Grid& g)
        : order(ord), grid(g),
          boundary(g.topology == Topology::Periodic ? BoundaryClosure::PeriodicCirculant
                                                    : BoundaryClosure::OneSidedClosure) {}

    int derivative_order() const {
        return (order == DiffOrder::D1_6th || order == DiffOrder::D1_2nd) ? 1 : 2;
    }
};

inline GridFunction apply_diff(const DiffOp& op, const GridFunction& u) {
    if (!(u.grid == op.grid))
        throw DimensionError("apply_diff: field not on the operator's grid");
    const Grid& g = op.grid;
    const int n = g.n;
    const int c = u.components();
    const detail::Stencil st = detail::interior_stencil(op.order);
    const int width = static_cast<int>(st.coeffs.size());
    const double scale = 1.0 / std::pow(g.dxi(), st.deriv);

    GridFunction out(g, c);
    if (op.boundary == BoundaryClosure::PeriodicCirculant) {
        for (int ci = 0; ci < c; ++ci) {
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int j = 0; j < width; ++j) {
                    int idx = k - st.half + j;
                    idx %= n;
                    if (idx < 0) idx += n;
                    acc += st.coeffs[j] * u.values(ci, idx);
                }
                out.values(ci, k) = acc * scale;
            }
        }
        return out;
    }

    // Bounded grid: centered interior rows, one-sided rows near the ends
    // built from Fornberg weights on the same number of nodes.
    std::vector<double> offsets(width);
    for (int k = 0; k < n; ++k) {
        int start = k - st.half;
        if (start < 0) start = 0;
        if (start + width > n) start = n - width;
        const bool centered = (start == k - st.half);
        std::vector<double> w;
        if (!centered) {
            for (int j = 0; j < width; ++j) offsets[j] = static_cast<double>(start + j - k);
            w = detail::fd_weights(0.0, offsets, st.deriv);
        }
        for (int ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (int j = 0; j < width; ++j)
                acc += (centered ? st.coeffs[j] : w[j]) * u.values(ci, start + j);
            out.values(ci, k) = acc * scale;
        }
    }
    return out;
}

/// Dense matrix of the operator acting on a single component.
inline MatrixXd diff_matrix(const DiffOp& op) {
    const int n = op.grid.n;
    MatrixXd m(n, n);
    GridFunction e(op.grid, 1);
    for (int j = 0; j < n; ++j) {
        e.values.setZero();
        e.values(0, j) = 1.0;
        m.col(j) = apply_diff(op, e).values.row(0).transpose();
    }
    return m;
}

} // namespace tramor

#endif

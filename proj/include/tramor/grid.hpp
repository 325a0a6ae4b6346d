#ifndef TRAMOR_GRID_HPP
#define TRAMOR_GRID_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>

#include "tramor/errors.hpp"

namespace tramor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Topology { Periodic, Bounded };

/// Equidistant 1-D grid. Periodic grids exclude the duplicated right
/// endpoint, so dxi = length/n; bounded grids include both endpoints,
/// dxi = length/(n-1).
struct Grid {
    int n = 0;
    double xi0 = 0.0;
    double length = 0.0;
    Topology topology = Topology::Periodic;

    Grid() = default;
    Grid(int n_, double xi0_, double length_, Topology topo)
        : n(n_), xi0(xi0_), length(length_), topology(topo) {
        if (n < 8) throw DimensionError("Grid: need n >= 8, got " + std::to_string(n));
        if (length <= 0.0) throw DimensionError("Grid: length must be positive");
    }

    double dxi() const {
        return topology == Topology::Periodic ? length / n : length / (n - 1);
    }
    double node(int k) const { return xi0 + k * dxi(); }

    VectorXd nodes() const {
        VectorXd x(n);
        for (int k = 0; k < n; ++k) x[k] = node(k);
        return x;
    }

    bool operator==(const Grid& other) const {
        return n == other.n && xi0 == other.xi0 && length == other.length &&
               topology == other.topology;
    }
};

/// Possibly vector-valued field sampled on a grid; values has one row per
/// component and one column per node.
struct GridFunction {
    Grid grid;
    MatrixXd values; // components x n

    GridFunction() = default;
    GridFunction(const Grid& g, int components)
        : grid(g), values(MatrixXd::Zero(components, g.n)) {}
    GridFunction(const Grid& g, const MatrixXd& vals) : grid(g), values(vals) {
        if (vals.cols() != g.n)
            throw DimensionError("GridFunction: value columns do not match grid size");
    }

    int components() const { return static_cast<int>(values.rows()); }
    int n() const { return grid.n; }

    static GridFunction sample(const Grid& g, const std::function<double(double)>& f) {
        GridFunction out(g, 1);
        for (int k = 0; k < g.n; ++k) out.values(0, k) = f(g.node(k));
        return out;
    }

    VectorXd flat() const {
        VectorXd v(values.size());
        int c = components(), n_ = n();
        for (int ci = 0; ci < c; ++ci)
            v.segment(ci * n_, n_) = values.row(ci).transpose();
        return v;
    }

    static GridFunction from_flat(const Grid& g, int components, const VectorXd& v) {
        if (v.size() != static_cast<Eigen::Index>(components) * g.n)
            throw DimensionError("GridFunction::from_flat: size mismatch");
        GridFunction out(g, components);
        for (int ci = 0; ci < components; ++ci)
            out.values.row(ci) = v.segment(ci * g.n, g.n).transpose();
        return out;
    }
};

inline void check_compatible(const GridFunction& u, const GridFunction& v) {
    if (!(u.grid == v.grid))
        throw DimensionError("grid mismatch between fields");
    if (u.components() != v.components())
        throw DimensionError("component count mismatch between fields");
}

/// Node weight of the discrete L2 pairing: dxi everywhere on periodic
/// grids, trapezoid endpoint halving on bounded grids.
inline double node_weight(const Grid& g, int k) {
    double w = g.dxi();
    if (g.topology == Topology::Bounded && (k == 0 || k == g.n - 1)) w *= 0.5;
    return w;
}

/// Discrete L2 inner product. Compensated extended-precision
/// accumulation makes the value independent of summation order at the
/// double rounding level, so lattice shifts are exactly isometric.
inline double inner_product(const GridFunction& u, const GridFunction& v) {
    check_compatible(u, v);
    const Grid& g = u.grid;
    long double acc = 0.0L, comp = 0.0L;
    const int c = u.components();
    for (int k = 0; k < g.n; ++k) {
        long double colsum = 0.0L;
        for (int ci = 0; ci < c; ++ci)
            colsum += static_cast<long double>(u.values(ci, k)) * v.values(ci, k);
        const long double term = static_cast<long double>(node_weight(g, k)) * colsum;
        const long double sum = acc + term;
        if (std::abs(static_cast<double>(acc)) >= std::abs(static_cast<double>(term)))
            comp += (acc - sum) + term;
        else
            comp += (term - sum) + acc;
        acc = sum;
    }
    return static_cast<double>(acc + comp);
}

inline double norm(const GridFunction& u) {
    return std::sqrt(std::max(0.0, inner_product(u, u)));
}

/// Weight vector for flattened (component-blocked) fields.
inline VectorXd flat_weights(const Grid& g, int components) {
    VectorXd w(static_cast<Eigen::Index>(components) * g.n);
    for (int ci = 0; ci < components; ++ci)
        for (int k = 0; k < g.n; ++k) w[ci * g.n + k] = node_weight(g, k);
    return w;
}

} // namespace tramor

#endif

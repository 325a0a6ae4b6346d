#ifndef TRAMOR_FOM_HPP
#define TRAMOR_FOM_HPP

#include <functional>
#include <optional>
#include <string>

#include "tramor/diff_ops.hpp"
#include "tramor/integrators.hpp"
#include "tramor/snapshots.hpp"
#include "tramor/transform.hpp"

namespace tramor {

enum class FomKind {
    Advection,
    AdvectionDiffusionPeriodic,
    AdvectionDiffusionDirichletNeumann,
    LinearWave,
    Burgers
};

/// Time-dependent Dirichlet inflow value and its time derivative.
struct BoundaryData {
    std::function<double(double)> value;
    std::function<double(double)> rate;
};

struct FomModel {
    FomKind kind = FomKind::AdvectionDiffusionPeriodic;
    double c = 1.0;   // transport velocity
    double mu = 0.0;  // diffusion / viscosity
    Grid grid;
    int components = 1;
    GridFunction initial_condition;
    std::optional<BoundaryData> dirichlet_left;

    void validate() const {
        if (mu < 0.0) throw ConfigError("model.mu must be nonnegative");
        if (kind == FomKind::LinearWave) {
            if (components != 2 || grid.topology != Topology::Periodic)
                throw ConfigError("linear wave model needs two components on a periodic grid");
        } else if (components != 1) {
            throw ConfigError("scalar models carry exactly one component");
        }
        if (kind == FomKind::AdvectionDiffusionDirichletNeumann) {
            if (grid.topology != Topology::Bounded || !dirichlet_left)
                throw ConfigError("Dirichlet-Neumann model needs a bounded grid and inflow data");
        }
        if (initial_condition.components() != components || !(initial_condition.grid == grid))
            throw ConfigError("initial condition does not match the model grid");
    }

    DiffOrder d1_order() const {
        return kind == FomKind::AdvectionDiffusionDirichletNeumann ? DiffOrder::D1_2nd
                                                                   : DiffOrder::D1_6th;
    }
    DiffOrder d2_order() const {
        return kind == FomKind::AdvectionDiffusionDirichletNeumann ? DiffOrder::D2_2nd
                                                                   : DiffOrder::D2_6th;
    }

    std::string tag() const {
        switch (kind) {
        case FomKind::Advection: return "advection";
        case FomKind::AdvectionDiffusionPeriodic: return "advection_diffusion";
        case FomKind::AdvectionDiffusionDirichletNeumann: return "advection_diffusion_dn";
        case FomKind::LinearWave: return "linear_wave";
        case FomKind::Burgers: return "burgers";
        }
        return "unknown";
    }
};

inline GridFunction gaussian_field(const Grid& g, double center, double width,
                                   double amplitude = 1.0, double exponent_sign = -1.0) {
    return GridFunction::sample(g, [=](double xi) {
        const double s = (xi - center) / width;
        return amplitude * std::exp(exponent_sign * s * s);
    });
}

namespace detail {

inline void nonperiodic_closure(const FomModel& model, double t, const GridFunction& z,
                                GridFunction& out) {
    const Grid& g = model.grid;
    const int n = g.n;
    const double h = g.dxi();
    const auto& zv = z.values;
    // The inflow value enters the first interior stencil as known data
    // (strong imposition); the boundary node itself tracks the exact
    // rate and is overwritten after every accepted step.
    const double zb = model.dirichlet_left->value(t);
    out.values(0, 1) = -model.c * (zv(0, 2) - zb) / (2.0 * h) +
                       model.mu * (zv(0, 2) - 2.0 * zv(0, 1) + zb) / (h * h);
    for (int k = 2; k + 1 < n; ++k) {
        const double adv = -model.c * (zv(0, k + 1) - zv(0, k - 1)) / (2.0 * h);
        const double dif = model.mu * (zv(0, k + 1) - 2.0 * zv(0, k) + zv(0, k - 1)) / (h * h);
        out.values(0, k) = adv + dif;
    }
    // Homogeneous Neumann on the right via a mirrored ghost node.
    out.values(0, n - 1) = 2.0 * model.mu * (zv(0, n - 2) - zv(0, n - 1)) / (h * h);
    out.values(0, 0) = model.dirichlet_left->rate(t);
}

} // namespace detail

/// Semi-discrete right-hand side of the model at state z.
inline GridFunction eval_rhs(const FomModel& model, double t, const GridFunction& z) {
    if (!(z.grid == model.grid) || z.components() != model.components)
        throw DimensionError("eval_rhs: state does not match the model");
    GridFunction out(model.grid, model.components);
    switch (model.kind) {
    case FomKind::Advection:
    case FomKind::AdvectionDiffusionPeriodic: {
        GridFunction dz = apply_diff(DiffOp(DiffOrder::D1_6th, model.grid), z);
        out.values = -model.c * dz.values;
        if (model.mu != 0.0) {
            GridFunction ddz = apply_diff(DiffOp(DiffOrder::D2_6th, model.grid), z);
            out.values += model.mu * ddz.values;
        }
        break;
    }
    case FomKind::AdvectionDiffusionDirichletNeumann:
        detail::nonperiodic_closure(model, t, z, out);
        break;
    case FomKind::LinearWave: {
        DiffOp d1(DiffOrder::D1_6th, model.grid);
        GridFunction rho(model.grid, z.values.row(0));
        GridFunction vel(model.grid, z.values.row(1));
        out.values.row(0) = -apply_diff(d1, vel).values.row(0);
        out.values.row(1) = -apply_diff(d1, rho).values.row(0);
        break;
    }
    case FomKind::Burgers: {
        GridFunction dz = apply_diff(DiffOp(DiffOrder::D1_6th, model.grid), z);
        GridFunction ddz = apply_diff(DiffOp(DiffOrder::D2_6th, model.grid), z);
        out.values = model.mu * ddz.values - z.values.cwiseProduct(dz.values);
        break;
    }
    }
    return out;
}

/// Dense matrix of the linear part acting on flattened states; the
/// Burgers model has none.
inline MatrixXd fom_linear_matrix(const FomModel& model) {
    const int n = model.grid.n;
    switch (model.kind) {
    case FomKind::Advection:
    case FomKind::AdvectionDiffusionPeriodic: {
        MatrixXd a = -model.c * diff_matrix(DiffOp(DiffOrder::D1_6th, model.grid));
        if (model.mu != 0.0) a += model.mu * diff_matrix(DiffOp(DiffOrder::D2_6th, model.grid));
        return a;
    }
    case FomKind::AdvectionDiffusionDirichletNeumann: {
        MatrixXd a = MatrixXd::Zero(n, n);
        const double h = model.grid.dxi();
        for (int k = 1; k + 1 < n; ++k) {
            a(k, k - 1) = model.c / (2.0 * h) + model.mu / (h * h);
            a(k, k) = -2.0 * model.mu / (h * h);
            a(k, k + 1) = -model.c / (2.0 * h) + model.mu / (h * h);
        }
        a(1, 0) = 0.0; // inflow value enters through the forcing instead
        a(n - 1, n - 2) = 2.0 * model.mu / (h * h);
        a(n - 1, n - 1) = -2.0 * model.mu / (h * h);
        return a;
    }
    case FomKind::LinearWave: {
        MatrixXd d1 = diff_matrix(DiffOp(DiffOrder::D1_6th, model.grid));
        MatrixXd a = MatrixXd::Zero(2 * n, 2 * n);
        a.topRightCorner(n, n) = -d1;
        a.bottomLeftCorner(n, n) = -d1;
        return a;
    }
    case FomKind::Burgers:
        throw Error("fom_linear_matrix: Burgers is not affine");
    }
    throw Error("unknown model kind");
}

inline MatrixXd burgers_jacobian(const FomModel& model, const GridFunction& z) {
    const int n = model.grid.n;
    MatrixXd d1 = diff_matrix(DiffOp(DiffOrder::D1_6th, model.grid));
    MatrixXd j = model.mu * diff_matrix(DiffOp(DiffOrder::D2_6th, model.grid));
    VectorXd dz = (d1 * z.values.row(0).transpose());
    for (int i = 0; i < n; ++i) {
        j.row(i) -= z.values(0, i) * d1.row(i);
        j(i, i) -= dz[i];
    }
    return j;
}

/// Wraps a model as a generic ODE on flattened states.
inline OdeSystem fom_ode_system(const FomModel& model) {
    OdeSystem sys;
    const FomModel m = model;
    sys.rhs = [m](double t, const VectorXd& x) {
        return eval_rhs(m, t, GridFunction::from_flat(m.grid, m.components, x)).flat();
    };
    if (model.kind == FomKind::Burgers) {
        sys.jacobian = [m](double, const VectorXd& x) {
            return burgers_jacobian(m, GridFunction::from_flat(m.grid, m.components, x));
        };
    } else {
        sys.affine = true;
        sys.linear_matrix = fom_linear_matrix(model);
        if (model.kind == FomKind::AdvectionDiffusionDirichletNeumann) {
            const auto rate = model.dirichlet_left->rate;
            const auto value = model.dirichlet_left->value;
            const int n = model.grid.n;
            const double h = model.grid.dxi();
            const double inflow_coeff = model.c / (2.0 * h) + model.mu / (h * h);
            sys.forcing = [rate, value, inflow_coeff, n](double t) {
                VectorXd b = VectorXd::Zero(n);
                b[0] = rate(t);
                b[1] = inflow_coeff * value(t);
                return b;
            };
            sys.post_step = [value](double t, VectorXd& x) { x[0] = value(t); };
        }
    }
    return sys;
}

struct FomResult {
    SnapshotSet snapshots;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

/// Integrates the model to t_end. Fixed-step runs sample at the step
/// grid; adaptive runs are resampled onto an equidistant grid of width
/// spec.tau while the accepted-step count is reported as-is.
inline FomResult integrate_fom(const FomModel& model, const IntegratorSpec& spec, double t_end) {
    model.validate();
    spec.validate();
    OdeSystem sys = fom_ode_system(model);
    OdeTrace tr = integrate(sys, model.initial_condition.flat(), 0.0, t_end, spec);

    FomResult res;
    res.accepted_steps = tr.accepted;
    res.rejected_steps = tr.rejected;
    SnapshotSet& s = res.snapshots;
    s.grid = model.grid;
    s.components = model.components;
    s.model_tag = model.tag();

    const int m_out = static_cast<int>(std::llround(t_end / spec.tau)) + 1;
    s.times = VectorXd::LinSpaced(m_out, 0.0, spec.tau * (m_out - 1));
    if (spec.scheme == Scheme::ImplicitTrapezoid &&
        static_cast<int>(tr.times.size()) == m_out) {
        s.data.resize(model.components * model.grid.n, m_out);
        for (int k = 0; k < m_out; ++k) s.data.col(k) = tr.states[k];
    } else {
        std::vector<double> ts(s.times.data(), s.times.data() + s.times.size());
        s.data = resample_trace(tr, ts);
    }
    return res;
}

/// Exact solution of the linear wave system with zero initial velocity:
/// two counter-propagating copies of rho0/2, realized with the periodic
/// shift so lattice times stay exact.
inline SnapshotSet analytic_wave_snapshots(const GridFunction& rho0, const Grid& grid,
                                           const VectorXd& times) {
    if (grid.topology != Topology::Periodic)
        throw DimensionError("analytic_wave_snapshots: grid must be periodic");
    if (!(rho0.grid == grid) || rho0.components() != 1)
        throw DimensionError("analytic_wave_snapshots: rho0 must be scalar on the same grid");
    TransformFamily shift = TransformFamily::periodic_shift(grid);
    GridFunction q(grid, (0.5 * rho0.values.row(0)).eval());

    SnapshotSet s;
    s.grid = grid;
    s.components = 2;
    s.times = times;
    s.model_tag = "linear_wave_analytic";
    s.data.resize(2 * grid.n, times.size());
    for (int k = 0; k < static_cast<int>(times.size()); ++k) {
        GridFunction right = transform(shift, times[k], q);
        GridFunction left = transform(shift, -times[k], q);
        GridFunction z(grid, 2);
        z.values.row(0) = right.values.row(0) + left.values.row(0);
        z.values.row(1) = right.values.row(0) - left.values.row(0);
        s.set(k, z);
    }
    return s;
}

} // namespace tramor

#endif

#ifndef TRAMOR_INTEGRATORS_HPP
#define TRAMOR_INTEGRATORS_HPP

#include <Eigen/Dense>
#include <functional>
#include <sstream>
#include <vector>

#include "tramor/errors.hpp"

namespace tramor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Scheme { ImplicitTrapezoid, AdaptiveRK45, AdaptiveRK23 };

struct NewtonSpec {
    int max_iter = 25;
    double tol = 1e-10; // infinity norm of the step residual
};

struct IntegratorSpec {
    Scheme scheme = Scheme::ImplicitTrapezoid;
    double tau = 5e-3;
    double rel_tol = 1e-3;
    double abs_tol = 1e-6;
    NewtonSpec newton;

    void validate() const {
        if (tau <= 0.0) throw ConfigError("integrator.tau must be positive");
        if (rel_tol <= 0.0 || abs_tol <= 0.0)
            throw ConfigError("integrator tolerances must be positive");
        if (newton.tol <= 0.0 || newton.max_iter < 1)
            throw ConfigError("integrator.newton settings invalid");
    }
};

/// Generic first-order system dx/dt = rhs(t, x).
struct OdeSystem {
    std::function<VectorXd(double, const VectorXd&)> rhs;
    /// Optional analytic Jacobian of rhs; finite differences otherwise.
    std::function<MatrixXd(double, const VectorXd&)> jacobian;
    /// Affine systems rhs = A x + b(t) get a pre-factored trapezoid solve.
    bool affine = false;
    MatrixXd linear_matrix;
    std::function<VectorXd(double)> forcing; // may be empty for b == 0
    /// Applied to every accepted state (boundary overwrites).
    std::function<void(double, VectorXd&)> post_step;
};

struct OdeTrace {
    std::vector<double> times;
    std::vector<VectorXd> states;
    std::vector<VectorXd> derivs; // rhs at each stored state
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

namespace detail {

inline MatrixXd fd_jacobian(const OdeSystem& sys, double t, const VectorXd& x,
                            const VectorXd& fx) {
    const int d = static_cast<int>(x.size());
    MatrixXd j(d, d);
    VectorXd xp = x;
    for (int i = 0; i < d; ++i) {
        const double h = 1e-7 * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        j.col(i) = (sys.rhs(t, xp) - fx) / h;
        xp[i] = x[i];
    }
    return j;
}

inline void trace_push(OdeTrace& tr, const OdeSystem& sys, double t, const VectorXd& x,
                       const VectorXd& f) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.derivs.push_back(f);
    (void)sys;
}

} // namespace detail

/// Implicit trapezoidal rule with constant stepsize. Nonlinear systems
/// use Newton on the step residual; affine systems solve directly with a
/// factorization reused across steps.
inline OdeTrace integrate_trapezoid(const OdeSystem& sys, const VectorXd& x0, double t0,
                                    double t_end, const IntegratorSpec& spec) {
    spec.validate();
    const double tau = spec.tau;
    OdeTrace tr;
    VectorXd x = x0;
    if (sys.post_step) sys.post_step(t0, x);
    detail::trace_push(tr, sys, t0, x, sys.rhs(t0, x));

    const int d = static_cast<int>(x.size());
    Eigen::PartialPivLU<MatrixXd> lu;
    double lu_tau = -1.0;

    double t = t0;
    while (t < t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
        const double h = std::min(tau, t_end - t);
        const double t_new = t + h;
        VectorXd f_old = tr.derivs.back();

        VectorXd x_new;
        if (sys.affine) {
            if (h != lu_tau) {
                lu.compute(MatrixXd::Identity(d, d) - 0.5 * h * sys.linear_matrix);
                lu_tau = h;
            }
            VectorXd rhs = x + 0.5 * h * f_old;
            if (sys.forcing) rhs += 0.5 * h * sys.forcing(t_new);
            x_new = lu.solve(rhs);
        } else {
            x_new = x + h * f_old; // explicit Euler predictor
            bool converged = false;
            for (int it = 0; it < spec.newton.max_iter; ++it) {
                VectorXd f_new = sys.rhs(t_new, x_new);
                VectorXd g = x_new - x - 0.5 * h * (f_old + f_new);
                if (g.lpNorm<Eigen::Infinity>() <= spec.newton.tol) {
                    converged = true;
                    break;
                }
                MatrixXd jf = sys.jacobian ? sys.jacobian(t_new, x_new)
                                           : detail::fd_jacobian(sys, t_new, x_new, f_new);
                MatrixXd jg = MatrixXd::Identity(d, d) - 0.5 * h * jf;
                x_new -= jg.partialPivLu().solve(g);
            }
            if (!converged) {
                std::ostringstream msg;
                msg << "implicit trapezoid: Newton did not converge within "
                    << spec.newton.max_iter << " iterations at t=" << t_new;
                throw StepFailureError(msg.str(), t_new);
            }
        }
        if (sys.post_step) sys.post_step(t_new, x_new);
        t = t_new;
        x = x_new;
        ++tr.accepted;
        detail::trace_push(tr, sys, t, x, sys.rhs(t, x));
    }
    return tr;
}

namespace detail {

struct ButcherPair {
    int stages;
    int order; // of the propagated solution
    std::vector<double> c;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    std::vector<double> e; // b - b_hat, error estimator weights
    bool fsal;
};

inline const ButcherPair& dormand_prince_5() {
    static const ButcherPair tab{
        7,
        5,
        {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0},
        {{},
         {1.0 / 5},
         {3.0 / 40, 9.0 / 40},
         {44.0 / 45, -56.0 / 15, 32.0 / 9},
         {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
         {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
         {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}},
        {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0},
        {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525,
         -1.0 / 40},
        true};
    return tab;
}

inline const ButcherPair& bogacki_shampine_3() {
    static const ButcherPair tab{
        4,
        3,
        {0.0, 1.0 / 2, 3.0 / 4, 1.0},
        {{}, {1.0 / 2}, {0.0, 3.0 / 4}, {2.0 / 9, 1.0 / 3, 4.0 / 9}},
        {2.0 / 9, 1.0 / 3, 4.0 / 9, 0.0},
        {2.0 / 9 - 7.0 / 24, 1.0 / 3 - 1.0 / 4, 4.0 / 9 - 1.0 / 3, -1.0 / 8},
        true};
    return tab;
}

} // namespace detail

/// Embedded Runge-Kutta pair with PI step control. Initial step 1e-4,
/// safety 0.9, step-ratio clamp [0.2, 5].
inline OdeTrace integrate_adaptive(const OdeSystem& sys, const VectorXd& x0, double t0,
                                   double t_end, const IntegratorSpec& spec) {
    spec.validate();
    const detail::ButcherPair& tab = (spec.scheme == Scheme::AdaptiveRK23)
                                         ? detail::bogacki_shampine_3()
                                         : detail::dormand_prince_5();
    const double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
    const double alpha = 0.7 / tab.order, beta = 0.4 / tab.order;

    OdeTrace tr;
    VectorXd x = x0;
    if (sys.post_step) sys.post_step(t0, x);
    VectorXd k1 = sys.rhs(t0, x);
    detail::trace_push(tr, sys, t0, x, k1);

    double t = t0;
    double h = std::min(1e-4, t_end - t0);
    double err_prev = 1.0;
    std::vector<VectorXd> k(tab.stages);
    const int max_total_steps = 2000000;
    int total = 0;

    while (t < t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
        if (++total > max_total_steps)
            throw StepFailureError("adaptive integrator exceeded the step budget", t);
        h = std::min(h, t_end - t);

        k[0] = k1;
        for (int s = 1; s < tab.stages; ++s) {
            VectorXd xs = x;
            for (int j = 0; j < s; ++j)
                if (tab.a[s][j] != 0.0) xs += (h * tab.a[s][j]) * k[j];
            k[s] = sys.rhs(t + tab.c[s] * h, xs);
        }
        VectorXd x_new = x;
        for (int s = 0; s < tab.stages; ++s)
            if (tab.b[s] != 0.0) x_new += (h * tab.b[s]) * k[s];
        VectorXd err_vec = VectorXd::Zero(x.size());
        for (int s = 0; s < tab.stages; ++s)
            if (tab.e[s] != 0.0) err_vec += (h * tab.e[s]) * k[s];

        double err = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double scale =
                spec.abs_tol + spec.rel_tol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            err = std::max(err, std::abs(err_vec[i]) / scale);
        }

        if (err <= 1.0) {
            t += h;
            x = x_new;
            if (sys.post_step) sys.post_step(t, x);
            k1 = (tab.fsal && !sys.post_step) ? k[tab.stages - 1] : sys.rhs(t, x);
            ++tr.accepted;
            detail::trace_push(tr, sys, t, x, k1);
            const double e = std::max(err, 1e-10);
            double fac = safety * std::pow(e, -alpha) * std::pow(err_prev, beta);
            h *= std::min(fac_max, std::max(fac_min, fac));
            err_prev = e;
        } else {
            ++tr.rejected;
            double fac = safety * std::pow(err, -1.0 / tab.order);
            h *= std::max(fac_min, std::min(1.0, fac));
            if (h < 1e-14)
                throw StepFailureError("adaptive integrator step size underflow", t);
        }
    }
    return tr;
}

inline OdeTrace integrate(const OdeSystem& sys, const VectorXd& x0, double t0, double t_end,
                          const IntegratorSpec& spec) {
    return spec.scheme == Scheme::ImplicitTrapezoid
               ? integrate_trapezoid(sys, x0, t0, t_end, spec)
               : integrate_adaptive(sys, x0, t0, t_end, spec);
}

/// Cubic Hermite resampling of a trace onto arbitrary times within range.
inline MatrixXd resample_trace(const OdeTrace& tr, const std::vector<double>& times) {
    const int d = static_cast<int>(tr.states.front().size());
    MatrixXd out(d, times.size());
    std::size_t seg = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double t = times[j];
        if (t < tr.times.front() - 1e-10 || t > tr.times.back() + 1e-10)
            throw Error("resample_trace: time outside the integrated range");
        while (seg + 2 < tr.times.size() && tr.times[seg + 1] < t) ++seg;
        const double ta = tr.times[seg], tb = tr.times[seg + 1];
        const double hseg = tb - ta;
        const double s = std::min(1.0, std::max(0.0, (t - ta) / hseg));
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        out.col(j) = h00 * tr.states[seg] + (h10 * hseg) * tr.derivs[seg] +
                     h01 * tr.states[seg + 1] + (h11 * hseg) * tr.derivs[seg + 1];
    }
    return out;
}

} // namespace tramor

#endif

#ifndef TRAMOR_ROM_HPP
#define TRAMOR_ROM_HPP

#include <Eigen/Eigenvalues>
#include <optional>

#include "tramor/fom.hpp"
#include "tramor/offline.hpp"

namespace tramor {

enum class PhaseCondition { Residual, Freeze, FreezeReduced };

/// Path-independent contractions for single-frame equivariant models.
/// gram_* follow the usual naming; the model-specific blocks let the
/// advection and diffusion terms scale independently with c and mu.
struct PrecomputedOperators {
    MatrixXd gram_modes;      // <phi_i, phi_j>
    MatrixXd gram_mode_dmode; // <phi_i, d_xi phi_j>
    MatrixXd gram_dmodes;     // <d_xi phi_i, d_xi phi_j>
    MatrixXd d2_mode;         // <phi_i, D2 phi_j>
    MatrixXd d2_dmode;        // <d_xi phi_i, D2 phi_j>
    MatrixXd wave_mode;       // <phi_i, L phi_j>, L the wave coupling
    MatrixXd wave_dmode;      // <d_xi phi_i, L phi_j>
    MatrixXd quad_mode;       // r x r^2: <phi_i, phi_j d_xi phi_k>
    MatrixXd quad_dmode;      // r x r^2: <d_xi phi_i, phi_j d_xi phi_k>
};

struct RomFrame {
    TransformFamily transform;
    std::vector<GridFunction> modes;
    int rank() const { return static_cast<int>(modes.size()); }
    bool has_path() const { return transform.kind != TransformKind::Identity; }
};

struct RomState {
    double t = 0.0;
    VectorXd alpha;
    VectorXd p; // one entry per frame with a path degree of freedom
};

struct RomSystemOptions {
    PhaseCondition phase = PhaseCondition::Residual;
    double regularization = 0.0; // 0 errors out on degeneracy; >0 opt-in floor
    bool auto_regularization = false;
    bool use_shortcuts = true;
    bool per_mode_paths = false; // split every mode into its own frame
    double latent_weight = 1e-4; // virtual-frame initial projection
};

struct RomSystem {
    FomModel model;
    std::vector<RomFrame> frames;
    PhaseCondition phase = PhaseCondition::Residual;
    double regularization = 0.0;
    bool auto_regularization = false;
    bool use_shortcuts = true;
    double latent_weight = 1e-4;

    // Derived layout.
    std::vector<std::pair<int, int>> mode_layout; // global index -> (frame, local)
    std::vector<int> path_column;                 // frame -> path column or -1
    int r = 0;
    int q = 0;
    std::optional<PrecomputedOperators> ops;

    bool single_frame() const { return frames.size() == 1; }
};

namespace detail {

inline bool fast_path_applies(const RomSystem& sys) {
    if (!sys.use_shortcuts || sys.frames.size() != 1) return false;
    const TransformKind k = sys.frames[0].transform.kind;
    if (k == TransformKind::VirtualDomainShift) return false;
    switch (sys.model.kind) {
    case FomKind::Advection:
    case FomKind::AdvectionDiffusionPeriodic:
    case FomKind::LinearWave:
    case FomKind::Burgers:
        return true;
    default:
        return false;
    }
}

inline PrecomputedOperators precompute_operators(const RomSystem& sys) {
    const RomFrame& frame = sys.frames[0];
    const int r = frame.rank();
    const Grid& g = sys.model.grid;
    DiffOp d1(DiffOrder::D1_6th, g);
    DiffOp d2(DiffOrder::D2_6th, g);

    std::vector<GridFunction> dphi(r), ddphi(r), lphi(r);
    for (int i = 0; i < r; ++i) {
        dphi[i] = apply_diff(d1, frame.modes[i]);
        ddphi[i] = apply_diff(d2, frame.modes[i]);
        if (sys.model.kind == FomKind::LinearWave) {
            GridFunction rho(g, frame.modes[i].values.row(0));
            GridFunction vel(g, frame.modes[i].values.row(1));
            GridFunction l(g, 2);
            l.values.row(0) = -apply_diff(d1, vel).values.row(0);
            l.values.row(1) = -apply_diff(d1, rho).values.row(0);
            lphi[i] = l;
        }
    }

    PrecomputedOperators ops;
    ops.gram_modes.resize(r, r);
    ops.gram_mode_dmode.resize(r, r);
    ops.gram_dmodes.resize(r, r);
    ops.d2_mode.resize(r, r);
    ops.d2_dmode.resize(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            ops.gram_modes(i, j) = inner_product(frame.modes[i], frame.modes[j]);
            ops.gram_mode_dmode(i, j) = inner_product(frame.modes[i], dphi[j]);
            ops.gram_dmodes(i, j) = inner_product(dphi[i], dphi[j]);
            ops.d2_mode(i, j) = inner_product(frame.modes[i], ddphi[j]);
            ops.d2_dmode(i, j) = inner_product(dphi[i], ddphi[j]);
        }
    if (sys.model.kind == FomKind::LinearWave) {
        ops.wave_mode.resize(r, r);
        ops.wave_dmode.resize(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                ops.wave_mode(i, j) = inner_product(frame.modes[i], lphi[j]);
                GridFunction dli(g, (-dphi[i].values).eval());
                ops.wave_dmode(i, j) = inner_product(dli, lphi[j]);
            }
    }
    if (sys.model.kind == FomKind::Burgers) {
        ops.quad_mode.resize(r, r * r);
        ops.quad_dmode.resize(r, r * r);
        for (int j = 0; j < r; ++j)
            for (int k = 0; k < r; ++k) {
                GridFunction w(g, frame.modes[j].values.cwiseProduct(dphi[k].values));
                for (int i = 0; i < r; ++i) {
                    ops.quad_mode(i, j * r + k) = inner_product(frame.modes[i], w);
                    ops.quad_dmode(i, j * r + k) = inner_product(dphi[i], w);
                }
            }
    }
    return ops;
}

} // namespace detail

/// Assembles a reduced system from an offline decomposition.
inline RomSystem build_rom_system(const FomModel& model, const Decomposition& dec,
                                  const RomSystemOptions& options = {}) {
    RomSystem sys;
    sys.model = model;
    sys.phase = options.phase;
    sys.regularization = options.regularization;
    sys.auto_regularization = options.auto_regularization;
    sys.use_shortcuts = options.use_shortcuts;
    sys.latent_weight = options.latent_weight;

    for (const Frame& f : dec.frames) {
        if (options.per_mode_paths && f.transform.kind != TransformKind::Identity) {
            // One frame (and thus one path variable) per mode. Flagged:
            // the grouped layout is the robust default.
            for (const GridFunction& mode : f.modes) {
                RomFrame rf;
                rf.transform = f.transform;
                rf.modes.push_back(mode);
                sys.frames.push_back(std::move(rf));
            }
        } else {
            RomFrame rf;
            rf.transform = f.transform;
            rf.modes = f.modes;
            sys.frames.push_back(std::move(rf));
        }
    }

    for (int fi = 0; fi < static_cast<int>(sys.frames.size()); ++fi) {
        const RomFrame& rf = sys.frames[fi];
        for (int i = 0; i < rf.rank(); ++i) sys.mode_layout.emplace_back(fi, i);
        sys.path_column.push_back(rf.has_path() ? sys.q++ : -1);
        sys.r += rf.rank();
    }
    if (detail::fast_path_applies(sys)) sys.ops = detail::precompute_operators(sys);
    return sys;
}

/// Same reduced space, different model parameters; the precomputed
/// contractions are parameter-separable so nothing is reassembled.
inline RomSystem with_parameters(const RomSystem& base, double c, double mu) {
    RomSystem sys = base;
    sys.model.c = c;
    sys.model.mu = mu;
    return sys;
}

struct MassBlocks {
    MatrixXd m_alpha; // r x r
    MatrixXd n;       // r x r, one derivative column per mode
    MatrixXd m_p;     // r x r
};

namespace detail {

struct AssembledFields {
    std::vector<GridFunction> g; // transformed modes
    std::vector<GridFunction> d; // transformed derivative directions
};

inline AssembledFields assemble_fields(const RomSystem& sys, const VectorXd& p) {
    AssembledFields out;
    out.g.reserve(sys.r);
    out.d.reserve(sys.r);
    for (const auto& [fi, li] : sys.mode_layout) {
        const RomFrame& f = sys.frames[fi];
        const double pf = sys.path_column[fi] >= 0 ? p[sys.path_column[fi]] : 0.0;
        out.g.push_back(transform(f.transform, pf, f.modes[li]));
        out.d.push_back(transform_derivative(f.transform, pf, f.modes[li]));
    }
    return out;
}

inline MassBlocks blocks_from_fields(const AssembledFields& f) {
    const int r = static_cast<int>(f.g.size());
    MassBlocks b;
    b.m_alpha.resize(r, r);
    b.n.resize(r, r);
    b.m_p.resize(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            b.m_alpha(i, j) = inner_product(f.g[i], f.g[j]);
            b.n(i, j) = inner_product(f.g[i], f.d[j]);
            b.m_p(i, j) = inner_product(f.d[i], f.d[j]);
        }
    return b;
}

/// Grouped scaling matrix: column per path variable, alpha_i in the row
/// of every mode belonging to that frame.
inline MatrixXd grouped_scaling(const RomSystem& sys, const VectorXd& alpha) {
    MatrixXd d = MatrixXd::Zero(sys.r, std::max(sys.q, 1));
    for (int i = 0; i < sys.r; ++i) {
        const int col = sys.path_column[sys.mode_layout[i].first];
        if (col >= 0) d(i, col) = alpha[i];
    }
    return d;
}

} // namespace detail

/// Blocks of the reduced mass matrix at path values p. With shortcuts
/// active on a single isometric shift frame, the blocks do not depend on
/// the path and come from the precomputed grams.
inline MassBlocks assemble_mass_blocks(const RomSystem& sys, const VectorXd& p) {
    if (sys.ops && sys.frames[0].transform.kind != TransformKind::Identity) {
        MassBlocks b;
        b.m_alpha = sys.ops->gram_modes;
        b.n = -sys.ops->gram_mode_dmode;
        b.m_p = sys.ops->gram_dmodes;
        return b;
    }
    if (sys.ops) { // identity frame: derivative directions vanish
        MassBlocks b;
        b.m_alpha = sys.ops->gram_modes;
        b.n = MatrixXd::Zero(sys.r, sys.r);
        b.m_p = MatrixXd::Zero(sys.r, sys.r);
        return b;
    }
    return detail::blocks_from_fields(detail::assemble_fields(sys, p));
}

struct RomRhs {
    VectorXd f_alpha; // r
    VectorXd f_p;     // r, tested with the per-mode derivative directions
};

namespace detail {

inline RomRhs fast_rhs(const RomSystem& sys, const VectorXd& alpha) {
    const PrecomputedOperators& ops = *sys.ops;
    const double c = sys.model.c, mu = sys.model.mu;
    RomRhs out;
    switch (sys.model.kind) {
    case FomKind::Advection:
    case FomKind::AdvectionDiffusionPeriodic:
        out.f_alpha = -c * (ops.gram_mode_dmode * alpha) + mu * (ops.d2_mode * alpha);
        out.f_p = c * (ops.gram_dmodes * alpha) - mu * (ops.d2_dmode * alpha);
        break;
    case FomKind::LinearWave:
        out.f_alpha = ops.wave_mode * alpha;
        out.f_p = ops.wave_dmode * alpha;
        break;
    case FomKind::Burgers: {
        VectorXd kron(sys.r * sys.r);
        for (int j = 0; j < sys.r; ++j)
            for (int k = 0; k < sys.r; ++k) kron[j * sys.r + k] = alpha[j] * alpha[k];
        out.f_alpha = mu * (ops.d2_mode * alpha) - ops.quad_mode * kron;
        out.f_p = -mu * (ops.d2_dmode * alpha) + ops.quad_dmode * kron;
        break;
    }
    default:
        throw Error("fast_rhs: unsupported model");
    }
    if (!sys.frames[0].has_path()) out.f_p.setZero();
    return out;
}

inline GridFunction lift_state(const RomSystem& sys, const AssembledFields& fields,
                               const VectorXd& alpha) {
    GridFunction z(sys.model.grid, sys.model.components);
    for (int i = 0; i < sys.r; ++i) z.values += alpha[i] * fields.g[i].values;
    return z;
}

inline RomRhs full_rhs(const RomSystem& sys, const AssembledFields& fields, double t,
                       const VectorXd& alpha) {
    GridFunction z = lift_state(sys, fields, alpha);
    GridFunction f = eval_rhs(sys.model, t, z);
    RomRhs out;
    out.f_alpha.resize(sys.r);
    out.f_p.resize(sys.r);
    for (int i = 0; i < sys.r; ++i) {
        out.f_alpha[i] = inner_product(fields.g[i], f);
        out.f_p[i] = inner_product(fields.d[i], f);
    }
    return out;
}

} // namespace detail

/// Reduced right-hand sides tested with the transformed modes and their
/// derivative directions. Equivariant single-frame systems use the
/// precomputed tensor contractions; everything else evaluates the model
/// in the full space.
inline RomRhs assemble_rhs(const RomSystem& sys, const RomState& state) {
    if (sys.ops) return detail::fast_rhs(sys, state.alpha);
    detail::AssembledFields fields = detail::assemble_fields(sys, state.p);
    return detail::full_rhs(sys, fields, state.t, state.alpha);
}

struct RomVelocity {
    VectorXd alpha_dot;
    VectorXd p_dot;
    bool degenerate = false;
    double sigma_min = 0.0;
};

namespace detail {

struct SolveReport {
    VectorXd x;
    bool degenerate = false;
    double sigma_min = 0.0;
};

/// Solves the phase-closed velocity system with condition monitoring;
/// on degeneracy adds lambda to the path-path block or fails. The
/// residual-minimizing closure has Gram structure and gets a symmetric
/// factorization; the freezing closures are nonsymmetric.
inline SolveReport solve_velocity_system(const RomSystem& sys, const MatrixXd& a,
                                         const VectorXd& rhs, const MatrixXd& m_p,
                                         const VectorXd& p, bool symmetric) {
    const int dim = static_cast<int>(a.rows());
    const int q = sys.q;
    Eigen::JacobiSVD<MatrixXd> svd(a);
    const double smax = svd.singularValues()[0];
    const double smin = svd.singularValues()[dim - 1];

    SolveReport rep;
    rep.sigma_min = smin;
    MatrixXd m = a;
    if (!(smin > 1e-12 * smax)) {
        double lambda = sys.regularization;
        if (sys.auto_regularization)
            lambda = std::max(lambda, 1e-10 * m_p.trace() / std::max(1, sys.r));
        if (lambda <= 0.0) {
            std::ostringstream msg;
            msg << "degenerate reduced mass matrix (sigma_min=" << smin << ", sigma_max=" << smax
                << ") at p=[";
            for (int i = 0; i < p.size(); ++i) msg << (i ? ", " : "") << p[i];
            msg << "]; enable regularization or restart from a different state";
            throw DegenerateMassError(msg.str(), smin);
        }
        m.bottomRightCorner(q, q) += lambda * MatrixXd::Identity(q, q);
        rep.degenerate = true;
    }
    if (symmetric)
        rep.x = m.ldlt().solve(rhs);
    else
        rep.x = m.partialPivLu().solve(rhs);
    return rep;
}

} // namespace detail

/// Velocities (alpha_dot, p_dot) from the phase-closed reduced system.
/// The residual-minimizing closure solves the symmetric scaled system;
/// the freezing variants replace the path rows accordingly.
inline RomVelocity rom_velocity(const RomSystem& sys, const RomState& state) {
    MassBlocks blocks = assemble_mass_blocks(sys, state.p);
    RomRhs rhs = assemble_rhs(sys, state);

    RomVelocity out;
    if (sys.q == 0) {
        out.alpha_dot = blocks.m_alpha.ldlt().solve(rhs.f_alpha);
        out.p_dot = VectorXd::Zero(0);
        return out;
    }

    const MatrixXd dsc = detail::grouped_scaling(sys, state.alpha);
    const MatrixXd nd = blocks.n * dsc;                          // r x q
    const MatrixXd mpd = dsc.transpose() * blocks.m_p * dsc;     // q x q
    const VectorXd fpd = dsc.transpose() * rhs.f_p;              // q

    const int dim = sys.r + sys.q;
    MatrixXd a(dim, dim);
    VectorXd b(dim);
    a.topLeftCorner(sys.r, sys.r) = blocks.m_alpha;
    a.topRightCorner(sys.r, sys.q) = nd;
    b.head(sys.r) = rhs.f_alpha;
    switch (sys.phase) {
    case PhaseCondition::Residual:
        a.bottomLeftCorner(sys.q, sys.r) = nd.transpose();
        a.bottomRightCorner(sys.q, sys.q) = mpd;
        b.tail(sys.q) = fpd;
        break;
    case PhaseCondition::Freeze:
        a.bottomLeftCorner(sys.q, sys.r).setZero();
        a.bottomRightCorner(sys.q, sys.q) = mpd;
        b.tail(sys.q) = fpd;
        break;
    case PhaseCondition::FreezeReduced:
        a.bottomLeftCorner(sys.q, sys.r) = nd.transpose();
        a.bottomRightCorner(sys.q, sys.q).setZero();
        b.tail(sys.q).setZero();
        break;
    }

    detail::SolveReport rep = detail::solve_velocity_system(
        sys, a, b, blocks.m_p, state.p, sys.phase == PhaseCondition::Residual);
    out.alpha_dot = rep.x.head(sys.r);
    out.p_dot = rep.x.tail(sys.q);
    out.degenerate = rep.degenerate;
    out.sigma_min = rep.sigma_min;
    return out;
}

/// Full-space norm of the residual at the given state and velocities.
inline double residual_norm(const RomSystem& sys, const RomState& state,
                            const VectorXd& alpha_dot, const VectorXd& p_dot) {
    detail::AssembledFields fields = detail::assemble_fields(sys, state.p);
    GridFunction z = detail::lift_state(sys, fields, state.alpha);
    GridFunction f = eval_rhs(sys.model, state.t, z);
    GridFunction res(sys.model.grid, sys.model.components);
    res.values = -f.values;
    for (int i = 0; i < sys.r; ++i) {
        res.values += alpha_dot[i] * fields.g[i].values;
        const int col = sys.path_column[sys.mode_layout[i].first];
        if (col >= 0) res.values += state.alpha[i] * p_dot[col] * fields.d[i].values;
    }
    return norm(res);
}

struct InitialProjection {
    RomState state;
    double j_iv = 0.0; // norm of the unrepresented part of z0
};

/// Projects the initial condition onto the transformed modes at p0:
/// M_alpha(p0) alpha0 = [<z0, T_i(p0) phi_i>]. Virtual-domain frames
/// project through the zero-extended pull-back instead, which picks the
/// minimal latent-energy coefficients (the restricted projection is
/// ill-posed in the latent directions). Optional damped Gauss-Newton
/// refinement of p0 (off by default).
inline InitialProjection project_initial_condition(const RomSystem& sys, const GridFunction& z0,
                                                   const VectorXd& p0, bool refine_p0 = false) {
    const bool has_virtual =
        std::any_of(sys.frames.begin(), sys.frames.end(), [](const RomFrame& f) {
            return f.transform.kind == TransformKind::VirtualDomainShift;
        });

    auto project_at = [&](const VectorXd& p) {
        detail::AssembledFields fields = detail::assemble_fields(sys, p);
        VectorXd alpha;
        if (has_virtual) {
            if (sys.frames.size() != 1)
                throw UnsupportedConfigurationError(
                    "initial projection supports a single virtual-domain frame");
            const RomFrame& f = sys.frames[0];
            const Grid& vg = *f.transform.virtual_grid;
            const VectorXd wv = flat_weights(vg, sys.model.components);
            MatrixXd modes(wv.size(), sys.r);
            for (int i = 0; i < sys.r; ++i) modes.col(i) = f.modes[i].flat();
            MatrixXd col(wv.size(), 1);
            VectorXd mask(vg.n);
            detail::scatter_to_virtual(f.transform, p[0], z0, col, mask);
            VectorXd u(wv.size());
            for (int ci = 0; ci < sys.model.components; ++ci)
                for (int j = 0; j < vg.n; ++j)
                    u[ci * vg.n + j] = wv[ci * vg.n + j] *
                                       (mask[j] != 0.0 ? 1.0 : sys.latent_weight);
            MatrixXd gram = modes.transpose() * (u.asDiagonal() * modes);
            alpha = gram.ldlt().solve(modes.transpose() * (u.asDiagonal() * col));
        } else {
            MatrixXd m_alpha(sys.r, sys.r);
            VectorXd b(sys.r);
            for (int i = 0; i < sys.r; ++i) {
                b[i] = inner_product(z0, fields.g[i]);
                for (int j = 0; j < sys.r; ++j)
                    m_alpha(i, j) = inner_product(fields.g[i], fields.g[j]);
            }
            Eigen::JacobiSVD<MatrixXd> svd(m_alpha);
            const double smin = svd.singularValues()[sys.r - 1];
            if (!(smin > 1e-12 * svd.singularValues()[0]))
                throw DegenerateMassError(
                    "initial projection: transformed modes are linearly dependent at the "
                    "requested p0; choose a different p0",
                    smin);
            alpha = m_alpha.ldlt().solve(b);
        }
        GridFunction recon(sys.model.grid, sys.model.components);
        for (int i = 0; i < sys.r; ++i) recon.values += alpha[i] * fields.g[i].values;
        GridFunction err(sys.model.grid, (z0.values - recon.values).eval());
        return std::make_pair(alpha, norm(err));
    };

    VectorXd p = p0;
    auto [alpha, jiv] = project_at(p);
    if (refine_p0 && sys.q > 0) {
        for (int it = 0; it < 12; ++it) {
            VectorXd grad(sys.q);
            const double h = 1e-6;
            for (int k = 0; k < sys.q; ++k) {
                VectorXd pp = p;
                pp[k] += h;
                grad[k] = (project_at(pp).second - jiv) / h;
            }
            if (grad.norm() < 1e-12) break;
            double step = 1.0;
            bool improved = false;
            for (int ls = 0; ls < 8; ++ls) {
                VectorXd pn = p - step * grad;
                auto [an, jn] = project_at(pn);
                if (jn < jiv) {
                    p = pn;
                    alpha = an;
                    jiv = jn;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) break;
        }
    }

    InitialProjection out;
    out.state.t = 0.0;
    out.state.alpha = alpha;
    out.state.p = p;
    out.j_iv = jiv;
    return out;
}

struct RomTrajectory {
    VectorXd times;
    MatrixXd alphas;         // r x m
    MatrixXd paths;          // q x m
    VectorXd residual_norms; // per stored state
    std::size_t step_count = 0;
    std::size_t rejected_steps = 0;
    std::size_t degenerate_steps = 0;
};

namespace detail {

inline RomState unpack_state(const RomSystem& sys, double t, const VectorXd& x) {
    RomState s;
    s.t = t;
    s.alpha = x.head(sys.r);
    s.p = x.tail(sys.q);
    return s;
}

} // namespace detail

/// Advances (alpha, p) with the chosen scheme; velocities come from the
/// phase-closed linear solve at every evaluation. Residual norms are
/// recorded along the accepted states.
inline RomTrajectory integrate_rom(const RomSystem& sys, const RomState& state0,
                                   const IntegratorSpec& spec, double t_end) {
    std::size_t degenerate_count = 0;
    OdeSystem ode;
    ode.rhs = [&sys, &degenerate_count](double t, const VectorXd& x) {
        RomState s = detail::unpack_state(sys, t, x);
        RomVelocity v = rom_velocity(sys, s);
        if (v.degenerate) ++degenerate_count;
        VectorXd out(sys.r + sys.q);
        out.head(sys.r) = v.alpha_dot;
        out.tail(sys.q) = v.p_dot;
        return out;
    };

    VectorXd x0(sys.r + sys.q);
    x0.head(sys.r) = state0.alpha;
    x0.tail(sys.q) = state0.p;

    OdeTrace tr;
    try {
        tr = integrate(ode, x0, state0.t, t_end, spec);
    } catch (const DegenerateMassError& e) {
        throw StepFailureError(std::string(e.what()) +
                                   "; restart the reduced model from the last healthy state",
                               t_end);
    }

    RomTrajectory out;
    const int m = static_cast<int>(tr.times.size());
    out.times.resize(m);
    out.alphas.resize(sys.r, m);
    out.paths.resize(sys.q, m);
    out.residual_norms.resize(m);
    for (int k = 0; k < m; ++k) {
        out.times[k] = tr.times[k];
        out.alphas.col(k) = tr.states[k].head(sys.r);
        out.paths.col(k) = tr.states[k].tail(sys.q);
        RomState s = detail::unpack_state(sys, tr.times[k], tr.states[k]);
        out.residual_norms[k] =
            residual_norm(sys, s, tr.derivs[k].head(sys.r), tr.derivs[k].tail(sys.q));
    }
    out.step_count = tr.accepted;
    out.rejected_steps = tr.rejected;
    out.degenerate_steps = degenerate_count;
    return out;
}

struct PhaseConditionValues {
    VectorXd psi_res;            // residual-minimizing defect
    VectorXd psi_freeze;         // freezing defect
    VectorXd psi_freeze_reduced; // reduced freezing defect
};

/// Defects of the three phase conditions at the supplied velocities
/// (single-frame comparison setting).
inline PhaseConditionValues phase_condition_values(const RomSystem& sys, const RomState& state,
                                                   const VectorXd& alpha_dot,
                                                   const VectorXd& p_dot) {
    if (!sys.single_frame() || sys.q != 1)
        throw UnsupportedConfigurationError(
            "phase_condition_values supports single-frame systems with one path");
    MassBlocks blocks = assemble_mass_blocks(sys, state.p);
    RomRhs rhs = assemble_rhs(sys, state);
    const MatrixXd dsc = detail::grouped_scaling(sys, state.alpha);

    PhaseConditionValues out;
    out.psi_freeze =
        dsc.transpose() * (blocks.m_p * dsc * p_dot - rhs.f_p);
    out.psi_freeze_reduced = -dsc.transpose() * (blocks.n.transpose() * alpha_dot);
    out.psi_res = dsc.transpose() *
                  (blocks.n.transpose() * alpha_dot + blocks.m_p * dsc * p_dot - rhs.f_p);
    return out;
}

/// Time-differentiable prescribed path.
struct PrescribedPath {
    std::function<double(double)> value;
    std::function<double(double)> rate;

    static PrescribedPath affine(double p0, double slope) {
        return {[p0, slope](double t) { return p0 + slope * t; },
                [slope](double) { return slope; }};
    }

    /// Sampled path with central-difference rates on the sample grid.
    static PrescribedPath sampled(const VectorXd& times, const VectorXd& values) {
        const int m = static_cast<int>(times.size());
        auto interp = [times, values, m](double t) {
            int seg = 0;
            while (seg + 2 < m && times[seg + 1] < t) ++seg;
            const double w = (t - times[seg]) / (times[seg + 1] - times[seg]);
            return (1.0 - w) * values[seg] + w * values[seg + 1];
        };
        VectorXd rates(m);
        for (int k = 0; k < m; ++k) {
            const int a = std::max(0, k - 1), b = std::min(m - 1, k + 1);
            rates[k] = (values[b] - values[a]) / (times[b] - times[a]);
        }
        auto rate = [times, rates, m](double t) {
            int seg = 0;
            while (seg + 2 < m && times[seg + 1] < t) ++seg;
            const double w = (t - times[seg]) / (times[seg + 1] - times[seg]);
            return (1.0 - w) * rates[seg] + w * rates[seg + 1];
        };
        return {interp, rate};
    }
};

/// Reduced velocity of the alpha rows under a prescribed path rate:
/// M_alpha(p) alpha_dot = F_alpha - N D(alpha) p_dot.
inline VectorXd rom_alpha_velocity(const RomSystem& sys, const RomState& state,
                                   const VectorXd& p_dot) {
    MassBlocks blocks = assemble_mass_blocks(sys, state.p);
    RomRhs rhs = assemble_rhs(sys, state);
    const MatrixXd dsc = detail::grouped_scaling(sys, state.alpha);
    return blocks.m_alpha.ldlt().solve(rhs.f_alpha - blocks.n * (dsc * p_dot));
}

/// Reference-frame ROM with a prescribed path: for orthonormal modes and
/// an isometric single frame, alpha_dot = F_hat(alpha) - p_dot * N0 alpha
/// with path-independent operators evaluated in the frame at p = 0.
inline RomTrajectory integrate_frozen_rom(const RomSystem& sys, const RomState& state0,
                                          const PrescribedPath& path, const IntegratorSpec& spec,
                                          double t_end) {
    if (!sys.single_frame() || sys.q != 1)
        throw UnsupportedConfigurationError(
            "integrate_frozen_rom needs a single frame with one path variable");
    if (sys.frames[0].transform.kind == TransformKind::VirtualDomainShift)
        throw UnsupportedConfigurationError("integrate_frozen_rom needs an isometric frame");
    MassBlocks ref = assemble_mass_blocks(sys, VectorXd::Zero(1));
    if ((ref.m_alpha - MatrixXd::Identity(sys.r, sys.r)).cwiseAbs().maxCoeff() > 1e-8)
        throw UnsupportedConfigurationError("integrate_frozen_rom needs orthonormal modes");

    // Frame at p = 0: reduced rhs and shift coupling are path-independent.
    RomSystem frozen = sys;
    const MatrixXd n0 = ref.n;
    OdeSystem ode;
    ode.rhs = [&frozen, &n0, &path](double t, const VectorXd& alpha) {
        RomState s;
        s.t = t;
        s.alpha = alpha;
        s.p = VectorXd::Zero(1);
        RomRhs rhs = assemble_rhs(frozen, s);
        return (rhs.f_alpha - path.rate(t) * (n0 * alpha)).eval();
    };

    OdeTrace tr = integrate(ode, state0.alpha, state0.t, t_end, spec);

    RomTrajectory out;
    const int m = static_cast<int>(tr.times.size());
    out.times.resize(m);
    out.alphas.resize(sys.r, m);
    out.paths.resize(1, m);
    out.residual_norms = VectorXd::Zero(m);
    for (int k = 0; k < m; ++k) {
        out.times[k] = tr.times[k];
        out.alphas.col(k) = tr.states[k];
        out.paths(0, k) = path.value(tr.times[k]);
        RomState s = detail::unpack_state(frozen, tr.times[k], tr.states[k]);
        s.p = out.paths.col(k);
        VectorXd pd(1);
        pd[0] = path.rate(tr.times[k]);
        out.residual_norms[k] = residual_norm(sys, s, tr.derivs[k], pd);
    }
    out.step_count = tr.accepted;
    out.rejected_steps = tr.rejected;
    return out;
}

/// CSV trajectory export: t, alpha_1..alpha_r, p_1..p_q, residual_norm.
inline void export_trajectory_csv(const RomTrajectory& tr, const std::string& path,
                                  bool gnuplot = false) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    const char sep = gnuplot ? ' ' : ',';
    if (!gnuplot) {
        os << "t";
        for (int i = 0; i < tr.alphas.rows(); ++i) os << sep << "alpha_" << i + 1;
        for (int i = 0; i < tr.paths.rows(); ++i) os << sep << "p_" << i + 1;
        os << sep << "residual_norm\n";
    }
    for (int k = 0; k < tr.times.size(); ++k) {
        os << io::format_double(tr.times[k]);
        for (int i = 0; i < tr.alphas.rows(); ++i)
            os << sep << io::format_double(tr.alphas(i, k));
        for (int i = 0; i < tr.paths.rows(); ++i) os << sep << io::format_double(tr.paths(i, k));
        os << sep << io::format_double(tr.residual_norms[k]) << "\n";
    }
}

/// Lifts a reduced trajectory back to grid functions at the given times.
inline SnapshotSet reconstruct(const RomSystem& sys, const RomTrajectory& tr,
                               const VectorXd& times) {
    Decomposition dec;
    dec.grid = sys.model.grid;
    dec.components = sys.model.components;
    dec.times = tr.times;
    for (std::size_t fi = 0; fi < sys.frames.size(); ++fi) {
        Frame f;
        f.transform = sys.frames[fi].transform;
        f.modes = sys.frames[fi].modes;
        const int col = sys.path_column[fi];
        f.path = col >= 0 ? tr.paths.row(col).transpose().eval()
                          : VectorXd::Zero(tr.times.size()).eval();
        f.coefficients.resize(sys.frames[fi].rank(), tr.times.size());
        int base = 0;
        for (std::size_t gj = 0; gj < fi; ++gj) base += sys.frames[gj].rank();
        f.coefficients = tr.alphas.middleRows(base, sys.frames[fi].rank());
        dec.frames.push_back(std::move(f));
    }
    return reconstruct(dec, times);
}

} // namespace tramor

#endif

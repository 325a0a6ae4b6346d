#ifndef TRAMOR_OFFLINE_HPP
#define TRAMOR_OFFLINE_HPP

#include <Eigen/SVD>
#include <vector>

#include "tramor/snapshots.hpp"
#include "tramor/transform.hpp"

namespace tramor {

/// A group of modes sharing one transformation family and one path.
struct Frame {
    TransformFamily transform;
    VectorXd path;                   // sampled p(t_k)
    std::vector<GridFunction> modes; // unit discrete-L2 norm, on mode_grid()
    MatrixXd coefficients;           // rank x m

    int rank() const { return static_cast<int>(modes.size()); }
};

struct Decomposition {
    std::vector<Frame> frames;
    Grid grid; // physical grid of the approximated data
    int components = 1;
    VectorXd times;
    double offline_error = 0.0;
    VectorXd singular_values;           // decay diagnostics of the last SVD
    std::vector<double> sweep_errors;   // per-sweep history (multi-frame)
    // Boundedness diagnostics of the admissible set: the bound is not
    // enforced, these let a user check it after the fact.
    double max_coefficient_norm = 0.0;
    double max_mode_derivative_norm = 0.0;
};

namespace detail {

struct WeightedSvd {
    MatrixXd modes;  // (c*n) x r, orthonormal in the weighted inner product
    VectorXd sigma;  // leading r singular values
    MatrixXd coeffs; // r x m
    VectorXd all_sigma;
};

/// POD of a data matrix under a diagonal spatial weight: SVD of
/// W^(1/2) Z, modes pulled back by W^(-1/2). Mode signs are fixed so the
/// largest-magnitude entry is positive.
inline WeightedSvd weighted_pod(const MatrixXd& data, const VectorXd& weights, int r) {
    const Eigen::Index nrows = data.rows(), m = data.cols();
    const VectorXd sqw = weights.cwiseSqrt();
    MatrixXd a = sqw.asDiagonal() * data;
    Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();

    const int max_rank = static_cast<int>(std::min(nrows, m));
    int attainable = 0;
    const double cutoff = sv.size() ? sv[0] * 1e-12 : 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++attainable;
    if (r > max_rank || r > attainable) {
        const int have = std::min(attainable, max_rank);
        throw RankDeficiencyError("requested rank " + std::to_string(r) +
                                      " exceeds the attainable rank " + std::to_string(have),
                                  have);
    }

    WeightedSvd out;
    out.all_sigma = sv;
    out.sigma = sv.head(r);
    out.modes.resize(nrows, r);
    out.coeffs.resize(r, m);
    const VectorXd inv_sqw = sqw.cwiseInverse();
    for (int i = 0; i < r; ++i) {
        VectorXd mode = inv_sqw.cwiseProduct(svd.matrixU().col(i));
        Eigen::Index argmax = 0;
        mode.cwiseAbs().maxCoeff(&argmax);
        const double sign = mode[argmax] < 0.0 ? -1.0 : 1.0;
        out.modes.col(i) = sign * mode;
        out.coeffs.row(i) = sign * sv[i] * svd.matrixV().col(i).transpose();
    }
    return out;
}

/// Zero-extended pull-back of a physical field onto the virtual grid:
/// node eta carries the physical value at eta + p where that point lies
/// inside the physical domain, and zero (masked out) elsewhere.
inline void scatter_to_virtual(const TransformFamily& fam, double p, const GridFunction& phys,
                               MatrixXd& out_col, VectorXd& mask) {
    const Grid& vg = *fam.virtual_grid;
    const Grid& pg = fam.grid;
    const double h = pg.dxi();
    const int c = phys.components();
    for (int j = 0; j < vg.n; ++j) {
        const double xi = vg.node(j) + p;
        const double u = (xi - pg.xi0) / h;
        if (u < -detail::kLatticeSnap || u > pg.n - 1 + detail::kLatticeSnap) {
            for (int ci = 0; ci < c; ++ci) out_col(ci * vg.n + j, 0) = 0.0;
            mask[j] = 0.0;
            continue;
        }
        mask[j] = 1.0;
        const double u_round = std::round(u);
        if (std::abs(u - u_round) < detail::kLatticeSnap) {
            const int src = std::min(std::max(static_cast<int>(u_round), 0), pg.n - 1);
            for (int ci = 0; ci < c; ++ci) out_col(ci * vg.n + j, 0) = phys.values(ci, src);
            continue;
        }
        int j0 = static_cast<int>(std::floor(u)) - 1;
        j0 = std::min(std::max(j0, 0), pg.n - 4);
        const auto w = detail::cubic_weights_generic(u - j0);
        for (int ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (int q = 0; q < 4; ++q) acc += w[q] * phys.values(ci, j0 + q);
            out_col(ci * vg.n + j, 0) = acc;
        }
    }
}

} // namespace detail

/// Transformed mode i of a frame at snapshot index k.
inline GridFunction frame_mode_at(const Frame& f, int mode_idx, double p) {
    return transform(f.transform, p, f.modes[mode_idx]);
}

/// Reconstruction of a decomposition at its own snapshot index.
inline GridFunction reconstruct_at_index(const Decomposition& dec, int k) {
    GridFunction acc(dec.grid, dec.components);
    for (const Frame& f : dec.frames)
        for (int i = 0; i < f.rank(); ++i) {
            GridFunction m = frame_mode_at(f, i, f.path[k]);
            acc.values += f.coefficients(i, k) * m.values;
        }
    return acc;
}

/// Reconstruction at arbitrary times inside the sampled range; the
/// coefficients and paths are interpolated linearly between samples.
inline SnapshotSet reconstruct(const Decomposition& dec, const VectorXd& times) {
    SnapshotSet out;
    out.grid = dec.grid;
    out.components = dec.components;
    out.times = times;
    out.model_tag = "reconstruction";
    out.data.resize(static_cast<Eigen::Index>(dec.components) * dec.grid.n, times.size());

    const VectorXd& ts = dec.times;
    const int m = static_cast<int>(ts.size());
    for (int j = 0; j < static_cast<int>(times.size()); ++j) {
        const double t = times[j];
        const double span = std::max(1.0, std::abs(ts[m - 1]));
        if (t < ts[0] - 1e-10 * span || t > ts[m - 1] + 1e-10 * span)
            throw Error("reconstruct: requested time outside the sampled range");
        int seg = static_cast<int>(std::upper_bound(ts.data(), ts.data() + m, t) - ts.data()) - 1;
        seg = std::min(std::max(seg, 0), m - 2);
        const double w1 = (t - ts[seg]) / (ts[seg + 1] - ts[seg]);
        const double w0 = 1.0 - w1;

        GridFunction acc(dec.grid, dec.components);
        for (const Frame& f : dec.frames) {
            const double p = w0 * f.path[seg] + w1 * f.path[seg + 1];
            for (int i = 0; i < f.rank(); ++i) {
                const double a = w0 * f.coefficients(i, seg) + w1 * f.coefficients(i, seg + 1);
                GridFunction mode = frame_mode_at(f, i, p);
                acc.values += a * mode.values;
            }
        }
        out.data.col(j) = acc.flat();
    }
    return out;
}

inline void record_boundedness_diagnostics(Decomposition& dec) {
    dec.max_coefficient_norm = 0.0;
    dec.max_mode_derivative_norm = 0.0;
    for (const Frame& f : dec.frames) {
        for (int i = 0; i < f.rank(); ++i) {
            dec.max_coefficient_norm =
                std::max(dec.max_coefficient_norm, f.coefficients.row(i).norm());
            DiffOp d1(f.transform.d1_order, f.transform.mode_grid());
            dec.max_mode_derivative_norm =
                std::max(dec.max_mode_derivative_norm, norm(apply_diff(d1, f.modes[i])));
        }
    }
}

inline double decomposition_error(const Decomposition& dec, const SnapshotSet& snapshots) {
    SnapshotSet recon;
    recon.grid = dec.grid;
    recon.components = dec.components;
    recon.times = snapshots.times;
    recon.model_tag = "reconstruction";
    recon.data.resize(snapshots.data.rows(), snapshots.m());
    for (int k = 0; k < snapshots.m(); ++k) recon.data.col(k) = reconstruct_at_index(dec, k).flat();
    return relative_error(snapshots, recon);
}

/// Classical POD: leading r modes of the weighted snapshot matrix
/// (method of snapshots / thin SVD), stored as a single identity frame.
inline Decomposition compute_pod(const SnapshotSet& snapshots, int r) {
    const VectorXd w = flat_weights(snapshots.grid, snapshots.components);
    detail::WeightedSvd svd = detail::weighted_pod(snapshots.data, w, r);

    Decomposition dec;
    dec.grid = snapshots.grid;
    dec.components = snapshots.components;
    dec.times = snapshots.times;
    dec.singular_values = svd.all_sigma;

    Frame f;
    f.transform = TransformFamily::identity(snapshots.grid);
    f.path = VectorXd::Zero(snapshots.m());
    f.coefficients = svd.coeffs;
    for (int i = 0; i < r; ++i)
        f.modes.push_back(
            GridFunction::from_flat(snapshots.grid, snapshots.components, svd.modes.col(i)));
    dec.frames.push_back(std::move(f));
    dec.offline_error = decomposition_error(dec, snapshots);
    record_boundedness_diagnostics(dec);
    return dec;
}

/// Shifted POD with one isometric transformation for all modes: plain POD
/// of the back-transformed data, with the given path attached.
inline Decomposition compute_spod_single_frame(const SnapshotSet& snapshots, const VectorXd& path,
                                               const TransformFamily& fam, int r) {
    if (fam.kind == TransformKind::VirtualDomainShift)
        throw UnsupportedConfigurationError(
            "compute_spod_single_frame requires an isometric family; "
            "use compute_spod_multi_frame for virtual-domain shifts");
    if (path.size() != snapshots.m())
        throw DimensionError("compute_spod_single_frame: path length != snapshot count");

    SnapshotSet back = snapshots;
    for (int k = 0; k < snapshots.m(); ++k)
        back.set(k, transform(fam, -path[k], snapshots.at(k)));

    Decomposition dec = compute_pod(back, r);
    Frame& f = dec.frames.front();
    f.transform = fam;
    f.path = path;
    dec.offline_error = decomposition_error(dec, snapshots);
    record_boundedness_diagnostics(dec);
    return dec;
}

struct FrameSpec {
    TransformFamily family;
    VectorXd path;
    int rank = 1;
    double latent_weight = 1e-4; // virtual-domain frames only
};

namespace detail {

inline MatrixXd frame_reconstruction(const Frame& f, const Grid& grid, int components,
                                     int m) {
    MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(components) * grid.n, m);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < f.rank(); ++i)
            out.col(k) += f.coefficients(i, k) * frame_mode_at(f, i, f.path[k]).flat();
    return out;
}

/// Coefficients of a virtual frame under entry weights: weight one on
/// nodes inside the window, latent_weight (toward zero) outside. The
/// small latent weight keeps the part of the reconstruction hiding
/// outside the window from carrying arbitrary amplitudes, which the
/// purely restricted least squares cannot control.
inline MatrixXd masked_frame_coefficients(const Frame& f, int components, const MatrixXd& moved,
                                          const MatrixXd& masks, double latent_weight) {
    const Grid& vg = *f.transform.virtual_grid;
    const int r = f.rank();
    const int m = static_cast<int>(f.path.size());
    const VectorXd wv = flat_weights(vg, components);
    MatrixXd modes(moved.rows(), r);
    for (int i = 0; i < r; ++i) modes.col(i) = f.modes[i].flat();

    MatrixXd coeffs(r, m);
    VectorXd u(moved.rows());
    for (int k = 0; k < m; ++k) {
        for (int ci = 0; ci < components; ++ci)
            for (int j = 0; j < vg.n; ++j) {
                const double mw = masks(j, k) != 0.0 ? 1.0 : latent_weight;
                u[ci * vg.n + j] = wv[ci * vg.n + j] * mw;
            }
        MatrixXd gram = modes.transpose() * (u.asDiagonal() * modes);
        coeffs.col(k) = gram.ldlt().solve(modes.transpose() * (u.asDiagonal() * moved.col(k)));
    }
    return coeffs;
}

/// Virtual-frame block update: zero-extended pull-back of the residual,
/// then one pass of weighted alternating least squares on the masked
/// low-rank problem (seeded by the weighted SVD of the pull-back).
inline void virtual_frame_update(Frame& f, const Grid& grid, int components,
                                 const MatrixXd& target, double latent_weight,
                                 VectorXd& singular_values) {
    const Grid& vg = *f.transform.virtual_grid;
    const int m = static_cast<int>(f.path.size());
    const int r = f.rank();
    const Eigen::Index vrows = static_cast<Eigen::Index>(components) * vg.n;

    MatrixXd moved(vrows, m);
    MatrixXd masks(vg.n, m);
    {
        MatrixXd col(vrows, 1);
        VectorXd mask(vg.n);
        for (int k = 0; k < m; ++k) {
            GridFunction phys = GridFunction::from_flat(grid, components, target.col(k));
            scatter_to_virtual(f.transform, f.path[k], phys, col, mask);
            moved.col(k) = col;
            masks.col(k) = mask;
        }
    }

    const bool seeded = f.coefficients.size() > 0 && f.coefficients.cwiseAbs().maxCoeff() != 0.0;
    if (!seeded) {
        WeightedSvd svd = weighted_pod(moved, flat_weights(vg, components), r);
        for (int i = 0; i < r; ++i)
            f.modes[i] = GridFunction::from_flat(vg, components, svd.modes.col(i));
        singular_values = svd.all_sigma;
    } else {
        // Mode refresh: per-node weighted regression against the current
        // coefficients, then orthonormalization (span preserving).
        const MatrixXd alpha = f.coefficients;
        MatrixXd new_modes(vrows, r);
        for (int ci = 0; ci < components; ++ci)
            for (int j = 0; j < vg.n; ++j) {
                MatrixXd gram = MatrixXd::Zero(r, r);
                VectorXd rhs = VectorXd::Zero(r);
                for (int k = 0; k < m; ++k) {
                    const double u = masks(j, k) != 0.0 ? 1.0 : latent_weight;
                    gram.noalias() += u * (alpha.col(k) * alpha.col(k).transpose());
                    rhs.noalias() += (u * moved(ci * vg.n + j, k)) * alpha.col(k);
                }
                const double damp = std::max(gram.trace(), 1e-300) * 1e-12;
                new_modes.row(ci * vg.n + j) =
                    (gram + damp * MatrixXd::Identity(r, r)).ldlt().solve(rhs).transpose();
            }
        const VectorXd wv = flat_weights(vg, components);
        const VectorXd sqw = wv.cwiseSqrt();
        Eigen::HouseholderQR<MatrixXd> qr((sqw.asDiagonal() * new_modes).eval());
        MatrixXd onb = sqw.cwiseInverse().asDiagonal() *
                       (qr.householderQ() * MatrixXd::Identity(vrows, r));
        for (int i = 0; i < r; ++i) {
            Eigen::Index argmax = 0;
            onb.col(i).cwiseAbs().maxCoeff(&argmax);
            if (onb(argmax, i) < 0.0) onb.col(i) *= -1.0;
            f.modes[i] = GridFunction::from_flat(vg, components, onb.col(i));
        }
    }
    f.coefficients = masked_frame_coefficients(f, components, moved, masks, latent_weight);
}

} // namespace detail

/// Multi-frame shifted POD by block-coordinate descent: per sweep and
/// frame, the cross-frame residual is pulled back into the frame and
/// truncated by an SVD (isometric frames) or refined by a masked
/// alternating least-squares pass (virtual-domain frames). Terminates
/// after `sweeps` passes or when the error improves by less than 1e-10.
inline Decomposition compute_spod_multi_frame(const SnapshotSet& snapshots,
                                              const std::vector<FrameSpec>& specs, int sweeps) {
    if (sweeps < 1) throw ConfigError("compute_spod_multi_frame: sweeps must be >= 1");
    const int m = snapshots.m();
    const Eigen::Index rows = snapshots.data.rows();

    Decomposition dec;
    dec.grid = snapshots.grid;
    dec.components = snapshots.components;
    dec.times = snapshots.times;

    for (const FrameSpec& spec : specs) {
        if (spec.path.size() != m)
            throw DimensionError("compute_spod_multi_frame: path length != snapshot count");
        Frame f;
        f.transform = spec.family;
        f.path = spec.path;
        f.coefficients = MatrixXd::Zero(spec.rank, m);
        const Grid& mg = spec.family.mode_grid();
        for (int i = 0; i < spec.rank; ++i)
            f.modes.emplace_back(mg, snapshots.components);
        dec.frames.push_back(std::move(f));
    }

    std::vector<MatrixXd> recon(dec.frames.size(), MatrixXd::Zero(rows, m));
    double prev_err = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t fi = 0; fi < dec.frames.size(); ++fi) {
            Frame& f = dec.frames[fi];
            MatrixXd residual = snapshots.data;
            for (std::size_t gi = 0; gi < dec.frames.size(); ++gi)
                if (gi != fi) residual -= recon[gi];

            if (f.transform.kind == TransformKind::VirtualDomainShift) {
                detail::virtual_frame_update(f, dec.grid, dec.components, residual,
                                             specs[fi].latent_weight, dec.singular_values);
            } else {
                MatrixXd back(rows, m);
                for (int k = 0; k < m; ++k) {
                    GridFunction res_k =
                        GridFunction::from_flat(dec.grid, dec.components, residual.col(k));
                    back.col(k) = transform(f.transform, -f.path[k], res_k).flat();
                }
                detail::WeightedSvd svd = detail::weighted_pod(
                    back, flat_weights(dec.grid, dec.components), f.rank());
                for (int i = 0; i < f.rank(); ++i)
                    f.modes[i] = GridFunction::from_flat(dec.grid, dec.components, svd.modes.col(i));
                f.coefficients = svd.coeffs;
                dec.singular_values = svd.all_sigma;
            }
            recon[fi] = detail::frame_reconstruction(f, dec.grid, dec.components, m);
        }
        dec.offline_error = decomposition_error(dec, snapshots);
        dec.sweep_errors.push_back(dec.offline_error);
        if (prev_err - dec.offline_error < 1e-10) break;
        prev_err = dec.offline_error;
    }
    record_boundedness_diagnostics(dec);
    return dec;
}

namespace io {

constexpr std::uint32_t kDecompositionMagic = 0x54524d44; // "TRMD"

} // namespace io

/// Binary layout: header {magic, version, frame count, components, grid,
/// times}, then per frame {transform kind, derivative order, r_f, m, mode
/// grid, path, modes, coefficients}.
inline void save_decomposition(const Decomposition& dec, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    io::write_u32(os, io::kDecompositionMagic);
    io::write_u32(os, io::kFormatVersion);
    io::write_u32(os, static_cast<std::uint32_t>(dec.frames.size()));
    io::write_u32(os, static_cast<std::uint32_t>(dec.components));
    io::write_grid(os, dec.grid);
    io::write_u32(os, static_cast<std::uint32_t>(dec.times.size()));
    os.write(reinterpret_cast<const char*>(dec.times.data()),
             static_cast<std::streamsize>(sizeof(double) * dec.times.size()));
    io::write_f64(os, dec.offline_error);
    for (const Frame& f : dec.frames) {
        io::write_u32(os, static_cast<std::uint32_t>(f.transform.kind));
        io::write_u32(os, static_cast<std::uint32_t>(f.transform.d1_order));
        io::write_u32(os, static_cast<std::uint32_t>(f.rank()));
        io::write_u32(os, static_cast<std::uint32_t>(f.path.size()));
        io::write_grid(os, f.transform.mode_grid());
        os.write(reinterpret_cast<const char*>(f.path.data()),
                 static_cast<std::streamsize>(sizeof(double) * f.path.size()));
        for (const GridFunction& mode : f.modes)
            os.write(reinterpret_cast<const char*>(mode.values.data()),
                     static_cast<std::streamsize>(sizeof(double) * mode.values.size()));
        os.write(reinterpret_cast<const char*>(f.coefficients.data()),
                 static_cast<std::streamsize>(sizeof(double) * f.coefficients.size()));
    }
}

inline Decomposition load_decomposition(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    if (io::read_u32(is) != io::kDecompositionMagic)
        throw Error(path + ": not a decomposition file");
    if (io::read_u32(is) != io::kFormatVersion) throw Error(path + ": unsupported version");
    Decomposition dec;
    const int n_frames = static_cast<int>(io::read_u32(is));
    dec.components = static_cast<int>(io::read_u32(is));
    dec.grid = io::read_grid(is);
    const int m = static_cast<int>(io::read_u32(is));
    dec.times.resize(m);
    is.read(reinterpret_cast<char*>(dec.times.data()),
            static_cast<std::streamsize>(sizeof(double) * m));
    dec.offline_error = io::read_f64(is);
    for (int fi = 0; fi < n_frames; ++fi) {
        Frame f;
        const auto kind = static_cast<TransformKind>(io::read_u32(is));
        const auto d1 = static_cast<DiffOrder>(io::read_u32(is));
        const int r = static_cast<int>(io::read_u32(is));
        const int fm = static_cast<int>(io::read_u32(is));
        const Grid mode_grid = io::read_grid(is);
        switch (kind) {
        case TransformKind::PeriodicShift:
            f.transform = TransformFamily::periodic_shift(dec.grid, d1);
            break;
        case TransformKind::Identity:
            f.transform = TransformFamily::identity(dec.grid);
            break;
        case TransformKind::VirtualDomainShift: {
            TransformFamily fam;
            fam.kind = TransformKind::VirtualDomainShift;
            fam.grid = dec.grid;
            fam.virtual_grid = mode_grid;
            fam.d1_order = d1;
            f.transform = fam;
            break;
        }
        }
        f.path.resize(fm);
        is.read(reinterpret_cast<char*>(f.path.data()),
                static_cast<std::streamsize>(sizeof(double) * fm));
        for (int i = 0; i < r; ++i) {
            GridFunction mode(mode_grid, dec.components);
            is.read(reinterpret_cast<char*>(mode.values.data()),
                    static_cast<std::streamsize>(sizeof(double) * mode.values.size()));
            f.modes.push_back(std::move(mode));
        }
        f.coefficients.resize(r, fm);
        is.read(reinterpret_cast<char*>(f.coefficients.data()),
                static_cast<std::streamsize>(sizeof(double) * f.coefficients.size()));
        dec.frames.push_back(std::move(f));
    }
    if (!is) throw Error(path + ": truncated decomposition payload");
    return dec;
}

/// CSV export of the singular-value decay recorded by the last SVD.
inline void export_singular_values_csv(const Decomposition& dec, const std::string& path,
                                       bool gnuplot = false) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    const char sep = gnuplot ? ' ' : ',';
    if (!gnuplot) os << "index" << sep << "sigma\n";
    for (Eigen::Index i = 0; i < dec.singular_values.size(); ++i)
        os << i + 1 << sep << io::format_double(dec.singular_values[i]) << "\n";
}

struct PathEstimate {
    VectorXd path;
    bool flat_correlation = false;
};

/// Incremental path estimation by circular cross-correlation between
/// consecutive snapshots, refined to sub-grid accuracy by a quadratic
/// fit through the correlation peak.
inline PathEstimate estimate_path(const SnapshotSet& snapshots) {
    if (snapshots.components != 1 || snapshots.grid.topology != Topology::Periodic)
        throw UnsupportedConfigurationError(
            "estimate_path expects single-component snapshots on a periodic grid");
    const int n = snapshots.grid.n;
    const int m = snapshots.m();
    const double h = snapshots.grid.dxi();

    PathEstimate out;
    out.path = VectorXd::Zero(m);
    VectorXd corr(n);
    for (int k = 0; k + 1 < m; ++k) {
        const auto za = snapshots.data.col(k);
        const auto zb = snapshots.data.col(k + 1);
        for (int d = 0; d < n; ++d) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                int src = j - d;
                if (src < 0) src += n;
                acc += zb[j] * za[src];
            }
            corr[d] = acc;
        }
        int peak = 0;
        const double cmax = corr.maxCoeff(&peak);
        const double cmin = corr.minCoeff();
        if (cmax - cmin <= 1e-13 * std::max(1.0, std::abs(cmax))) {
            out.flat_correlation = true;
            out.path[k + 1] = out.path[k];
            continue;
        }
        const double cm = corr[(peak - 1 + n) % n];
        const double cp = corr[(peak + 1) % n];
        double frac = 0.0;
        const double denom = cm - 2.0 * cmax + cp;
        if (denom < 0.0) frac = 0.5 * (cm - cp) / denom;
        double delta = peak + frac;
        if (delta > n / 2.0) delta -= n; // smallest signed increment
        out.path[k + 1] = out.path[k] + delta * h;
    }
    return out;
}

} // namespace tramor

#endif

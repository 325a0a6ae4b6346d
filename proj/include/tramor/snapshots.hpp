#ifndef TRAMOR_SNAPSHOTS_HPP
#define TRAMOR_SNAPSHOTS_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tramor/grid.hpp"

namespace tramor {

/// Trajectory samples on an equidistant time grid. Column k of data is
/// the flattened (component-blocked) state at times[k].
struct SnapshotSet {
    Grid grid;
    int components = 1;
    VectorXd times;  // length m, equidistant with step tau
    MatrixXd data;   // (components*n) x m
    std::string model_tag;

    int m() const { return static_cast<int>(times.size()); }
    double tau() const { return m() > 1 ? times[1] - times[0] : 0.0; }

    GridFunction at(int k) const {
        return GridFunction::from_flat(grid, components, data.col(k));
    }
    void set(int k, const GridFunction& u) { data.col(k) = u.flat(); }
};

/// Trapezoid-in-time weights for a time grid.
inline VectorXd time_weights(const VectorXd& times) {
    const int m = static_cast<int>(times.size());
    VectorXd w = VectorXd::Zero(m);
    if (m == 1) {
        w[0] = 1.0;
        return w;
    }
    for (int k = 0; k + 1 < m; ++k) {
        const double h = times[k + 1] - times[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    return w;
}

/// Space-time L2 norm: trapezoid in time of the discrete spatial norm.
inline double space_time_norm(const SnapshotSet& s) {
    const VectorXd wt = time_weights(s.times);
    long double acc = 0.0L;
    for (int k = 0; k < s.m(); ++k) {
        const GridFunction u = s.at(k);
        acc += static_cast<long double>(wt[k]) * inner_product(u, u);
    }
    return std::sqrt(static_cast<double>(std::max(0.0L, acc)));
}

/// Relative space-time error ||truth - approx|| / ||truth||.
inline double relative_error(const SnapshotSet& truth, const SnapshotSet& approx) {
    if (!(truth.grid == approx.grid) || truth.components != approx.components)
        throw DimensionError("relative_error: snapshot sets live on different grids");
    if (truth.m() != approx.m() || (truth.times - approx.times).lpNorm<Eigen::Infinity>() >
                                       1e-10 * std::max(1.0, truth.times.cwiseAbs().maxCoeff()))
        throw DimensionError("relative_error: mismatched time sampling");
    SnapshotSet diff = truth;
    diff.data = truth.data - approx.data;
    const double denom = space_time_norm(truth);
    if (denom == 0.0) throw Error("relative_error: zero reference trajectory");
    return space_time_norm(diff) / denom;
}

namespace io {

constexpr std::uint32_t kSnapshotMagic = 0x54524d53; // "TRMS"
constexpr std::uint32_t kFormatVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::istream& is) {
    const std::uint32_t len = read_u32(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    return s;
}
inline void write_grid(std::ostream& os, const Grid& g) {
    write_u32(os, static_cast<std::uint32_t>(g.n));
    write_f64(os, g.xi0);
    write_f64(os, g.length);
    write_u32(os, g.topology == Topology::Periodic ? 0u : 1u);
}
inline Grid read_grid(std::istream& is) {
    const int n = static_cast<int>(read_u32(is));
    const double xi0 = read_f64(is);
    const double length = read_f64(is);
    const Topology topo = read_u32(is) == 0 ? Topology::Periodic : Topology::Bounded;
    return Grid(n, xi0, length, topo);
}

} // namespace io

/// Binary layout: header {magic, version, c, n, m, dxi, tau, model_tag}
/// followed by column-major c*n*m doubles.
inline void save_snapshots(const SnapshotSet& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    io::write_u32(os, io::kSnapshotMagic);
    io::write_u32(os, io::kFormatVersion);
    io::write_u32(os, static_cast<std::uint32_t>(s.components));
    io::write_u32(os, static_cast<std::uint32_t>(s.grid.n));
    io::write_u32(os, static_cast<std::uint32_t>(s.m()));
    io::write_f64(os, s.grid.dxi());
    io::write_f64(os, s.tau());
    io::write_string(os, s.model_tag);
    io::write_grid(os, s.grid);
    io::write_f64(os, s.times.size() ? s.times[0] : 0.0);
    os.write(reinterpret_cast<const char*>(s.data.data()),
             static_cast<std::streamsize>(sizeof(double) * s.data.size()));
}

inline SnapshotSet load_snapshots(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    if (io::read_u32(is) != io::kSnapshotMagic) throw Error(path + ": not a snapshot file");
    if (io::read_u32(is) != io::kFormatVersion) throw Error(path + ": unsupported version");
    SnapshotSet s;
    s.components = static_cast<int>(io::read_u32(is));
    const int n = static_cast<int>(io::read_u32(is));
    const int m = static_cast<int>(io::read_u32(is));
    (void)io::read_f64(is); // dxi, reconstructed from the grid block
    const double tau = io::read_f64(is);
    s.model_tag = io::read_string(is);
    s.grid = io::read_grid(is);
    if (s.grid.n != n) throw Error(path + ": inconsistent grid header");
    const double t0 = io::read_f64(is);
    s.times = VectorXd::LinSpaced(m, t0, t0 + tau * (m - 1));
    s.data.resize(static_cast<Eigen::Index>(s.components) * n, m);
    is.read(reinterpret_cast<char*>(s.data.data()),
            static_cast<std::streamsize>(sizeof(double) * s.data.size()));
    if (!is) throw Error(path + ": truncated snapshot payload");
    return s;
}

namespace io {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace io

/// CSV export: one row per time, first column t, then all c*n values.
inline void export_snapshots_csv(const SnapshotSet& s, const std::string& path,
                                 bool gnuplot = false) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    const char sep = gnuplot ? ' ' : ',';
    if (!gnuplot) {
        os << "t";
        for (int ci = 0; ci < s.components; ++ci)
            for (int k = 0; k < s.grid.n; ++k) os << sep << "c" << ci << "_x" << k;
        os << "\n";
    }
    for (int j = 0; j < s.m(); ++j) {
        os << io::format_double(s.times[j]);
        for (Eigen::Index i = 0; i < s.data.rows(); ++i)
            os << sep << io::format_double(s.data(i, j));
        os << "\n";
    }
}

} // namespace tramor

#endif

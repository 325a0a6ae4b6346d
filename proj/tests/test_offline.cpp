#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <filesystem>
#include <random>

#include "tramor/fom.hpp"
#include "tramor/offline.hpp"

using namespace tramor;

namespace {

constexpr double kPi = 3.14159265358979323846;

Grid unit_periodic(int n) { return Grid(n, 0.0, 1.0, Topology::Periodic); }

// Exact transport snapshots z(t_k) = T(c t_k) z0 on lattice times.
SnapshotSet transport_snapshots(const GridFunction& z0, double c, int m) {
    const Grid& g = z0.grid;
    TransformFamily shift = TransformFamily::periodic_shift(g);
    SnapshotSet s;
    s.grid = g;
    s.components = 1;
    s.times = VectorXd::LinSpaced(m, 0.0, (m - 1) * g.dxi() / std::abs(c));
    s.model_tag = "transport";
    s.data.resize(g.n, m);
    for (int k = 0; k < m; ++k) s.set(k, transform(shift, c * s.times[k], z0));
    return s;
}

double mode_norm(const Frame& f, int i) { return norm(f.modes[i]); }

} // namespace

TEST_CASE("POD of time-constant snapshots is the normalized state") {
    Grid g = unit_periodic(200);
    GridFunction phi = gaussian_field(g, 0.5, 0.1);
    SnapshotSet s;
    s.grid = g;
    s.components = 1;
    s.times = VectorXd::LinSpaced(20, 0.0, 1.0);
    s.data = phi.flat() * Eigen::RowVectorXd::Ones(20);

    Decomposition dec = compute_pod(s, 1);
    CHECK(dec.offline_error < 1e-12);
    const double nphi = norm(phi);
    GridFunction mode = dec.frames[0].modes[0];
    CHECK((mode.values - phi.values / nphi).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 20; ++k)
        CHECK(dec.frames[0].coefficients(0, k) == Catch::Approx(nphi).epsilon(1e-12));
}

TEST_CASE("POD modes of transported data concentrate on single Fourier pairs") {
    Grid g = unit_periodic(200);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 200);
    Decomposition dec = compute_pod(s, 5);

    for (const GridFunction& mode : dec.frames[0].modes) {
        // brute-force DFT oracle
        const int n = g.n;
        std::vector<double> pair_energy(n / 2 + 1, 0.0);
        double total = 0.0;
        for (int k = 0; k <= n / 2; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (int j = 0; j < n; ++j)
                acc += mode.values(0, j) *
                       std::exp(std::complex<double>(0.0, -2.0 * kPi * k * j / n));
            double e = std::norm(acc);
            if (k != 0 && 2 * k != n) e *= 2.0; // fold the conjugate pair
            pair_energy[k] = e;
            total += e;
        }
        const double best = *std::max_element(pair_energy.begin(), pair_energy.end());
        CHECK(best >= 0.99 * total);
    }
}

TEST_CASE("POD modes form an orthonormal set") {
    FomModel m;
    m.kind = FomKind::AdvectionDiffusionPeriodic;
    m.c = 1.0;
    m.mu = 0.002;
    m.grid = unit_periodic(200);
    m.components = 1;
    m.initial_condition = gaussian_field(m.grid, 0.5, 0.1);
    IntegratorSpec spec;
    SnapshotSet s = integrate_fom(m, spec, 1.0).snapshots;

    Decomposition dec = compute_pod(s, 6);
    const auto& modes = dec.frames[0].modes;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            CHECK(inner_product(modes[i], modes[j]) == Catch::Approx(expected).margin(1e-10));
        }
}

TEST_CASE("requesting more modes than the data carries fails with the attainable rank") {
    Grid g = unit_periodic(64);
    GridFunction phi = gaussian_field(g, 0.5, 0.1);
    SnapshotSet s;
    s.grid = g;
    s.components = 1;
    s.times = VectorXd::LinSpaced(10, 0.0, 1.0);
    s.data = phi.flat() * Eigen::RowVectorXd::Ones(10); // rank one
    try {
        compute_pod(s, 3);
        FAIL("expected RankDeficiencyError");
    } catch (const RankDeficiencyError& e) {
        CHECK(e.attainable_rank == 1);
    }
}

TEST_CASE("POD beats random orthonormal bases of the same rank") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 128);
    const int r = 4;
    Decomposition dec = compute_pod(s, r);

    const VectorXd w = flat_weights(g, 1);
    auto projection_error = [&](const MatrixXd& basis) {
        MatrixXd coeff = basis.transpose() * (w.asDiagonal() * s.data);
        MatrixXd resid = s.data - basis * coeff;
        double acc = 0.0;
        for (int k = 0; k < s.m(); ++k)
            acc += resid.col(k).dot(w.asDiagonal() * resid.col(k));
        return acc;
    };

    MatrixXd pod_basis(g.n, r);
    for (int i = 0; i < r; ++i) pod_basis.col(i) = dec.frames[0].modes[i].flat();
    const double pod_err = projection_error(pod_basis);

    std::mt19937 rng(1234);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const VectorXd sqw = w.cwiseSqrt();
    for (int trial = 0; trial < 20; ++trial) {
        MatrixXd random(g.n, r);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < r; ++j) random(i, j) = gauss(rng);
        Eigen::HouseholderQR<MatrixXd> qr(sqw.asDiagonal() * random);
        MatrixXd basis =
            sqw.cwiseInverse().asDiagonal() * (qr.householderQ() * MatrixXd::Identity(g.n, r));
        CHECK(pod_err <= projection_error(basis) + 1e-12);
    }
}

TEST_CASE("single-frame shifted POD of exact transport needs one mode") {
    Grid g = unit_periodic(200);
    GridFunction z0 = gaussian_field(g, 0.5, 0.1);
    SnapshotSet s = transport_snapshots(z0, 1.0, 200); // lattice-aligned times
    TransformFamily fam = TransformFamily::periodic_shift(g);

    Decomposition dec = compute_spod_single_frame(s, s.times, fam, 1);
    CHECK(dec.offline_error < 1e-12); // lattice-aligned: exact

    // Off-lattice sampling: interpolation error only.
    SnapshotSet s2;
    s2.grid = g;
    s2.components = 1;
    s2.times = VectorXd::LinSpaced(150, 0.0, 0.997);
    s2.model_tag = "transport";
    s2.data.resize(g.n, 150);
    for (int k = 0; k < 150; ++k) s2.set(k, transform(fam, s2.times[k], z0));
    Decomposition dec2 = compute_spod_single_frame(s2, s2.times, fam, 1);
    CHECK(dec2.offline_error < 1e-3);
}

TEST_CASE("shifted POD with zero path reduces to plain POD") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.4, 0.12), 1.0, 100);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    Decomposition spod = compute_spod_single_frame(s, VectorXd::Zero(100), fam, 3);
    Decomposition pod = compute_pod(s, 3);
    for (int i = 0; i < 3; ++i)
        CHECK(spod.frames[0].modes[i].values == pod.frames[0].modes[i].values);
    CHECK(spod.frames[0].coefficients == pod.frames[0].coefficients);
}

TEST_CASE("single-frame shifted POD equals POD of back-transformed data bit for bit") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.08), 1.0, 100);
    VectorXd path(100);
    for (int k = 0; k < 100; ++k) path[k] = 0.7 * s.times[k] + 0.01 * std::sin(3.0 * k);
    TransformFamily fam = TransformFamily::periodic_shift(g);

    Decomposition spod = compute_spod_single_frame(s, path, fam, 4);

    SnapshotSet back = s;
    for (int k = 0; k < 100; ++k) back.set(k, transform(fam, -path[k], s.at(k)));
    Decomposition pod = compute_pod(back, 4);

    for (int i = 0; i < 4; ++i)
        CHECK(spod.frames[0].modes[i].values == pod.frames[0].modes[i].values);
    CHECK(spod.frames[0].coefficients == pod.frames[0].coefficients);
}

TEST_CASE("two counter-propagating frames reconstruct the wave exactly") {
    Grid g = unit_periodic(200);
    GridFunction rho0 = gaussian_field(g, 0.5, 0.1);
    VectorXd times = VectorXd::LinSpaced(201, 0.0, 1.0); // lattice-aligned
    SnapshotSet s = analytic_wave_snapshots(rho0, g, times);

    TransformFamily fam = TransformFamily::periodic_shift(g);
    std::vector<FrameSpec> specs;
    specs.push_back({fam, times, 1});
    specs.push_back({fam, (-times).eval(), 1});
    Decomposition dec = compute_spod_multi_frame(s, specs, 40);

    CHECK(dec.offline_error <= 1e-10);
    for (const Frame& f : dec.frames)
        for (int i = 0; i < f.rank(); ++i)
            CHECK(mode_norm(f, i) == Catch::Approx(1.0).margin(1e-12));

    // Error history is monotone non-increasing.
    for (std::size_t i = 1; i < dec.sweep_errors.size(); ++i)
        CHECK(dec.sweep_errors[i] <= dec.sweep_errors[i - 1] + 1e-14);
}

TEST_CASE("multi-frame with one frame matches the single-frame computation") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 100);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    VectorXd path = 0.8 * s.times; // inexact path keeps the residual rich
    Decomposition multi = compute_spod_multi_frame(s, {{fam, path, 2}}, 1);
    Decomposition single = compute_spod_single_frame(s, path, fam, 2);
    for (int i = 0; i < 2; ++i)
        CHECK(multi.frames[0].modes[i].values == single.frames[0].modes[i].values);
}

TEST_CASE("reconstruction reproduces the stored offline error") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 100);
    Decomposition dec = compute_pod(s, 3);
    CHECK(decomposition_error(dec, s) == Catch::Approx(dec.offline_error).margin(1e-12));

    SnapshotSet recon = reconstruct(dec, s.times);
    CHECK(relative_error(s, recon) == Catch::Approx(dec.offline_error).margin(1e-12));

    VectorXd outside(1);
    outside[0] = s.times[s.m() - 1] + 1.0;
    CHECK_THROWS_AS(reconstruct(dec, outside), Error);
}

TEST_CASE("virtual-domain frame recovers a moving pulse on a bounded domain") {
    Grid g(201, 0.0, 1.0, Topology::Bounded);
    const int m = 101;
    VectorXd times = VectorXd::LinSpaced(m, 0.0, 0.5); // lattice: dt = dxi
    TransformFamily fam = TransformFamily::virtual_domain_shift(g, 0.0, 0.5);

    SnapshotSet s;
    s.grid = g;
    s.components = 1;
    s.times = times;
    s.model_tag = "moving_pulse";
    s.data.resize(g.n, m);
    for (int k = 0; k < m; ++k)
        s.set(k, gaussian_field(g, 0.2 + times[k], 0.05));

    Decomposition dec = compute_spod_multi_frame(s, {{fam, times, 1}}, 4);
    CHECK(dec.offline_error < 1e-6);
    CHECK(mode_norm(dec.frames[0], 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("path estimation recovers transport speeds to sub-grid accuracy") {
    Grid g = unit_periodic(200);
    for (double c : {1.0, -0.6}) {
        SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), c, 120);
        PathEstimate est = estimate_path(s);
        CHECK(!est.flat_correlation);
        for (int k = 0; k < s.m(); k += 17)
            CHECK(std::abs(est.path[k] - c * s.times[k]) < 0.1 * g.dxi());
    }
}

TEST_CASE("path estimation rejects unsupported snapshot layouts") {
    Grid gb(64, 0.0, 1.0, Topology::Bounded);
    SnapshotSet sb;
    sb.grid = gb;
    sb.components = 1;
    sb.times = VectorXd::LinSpaced(5, 0.0, 1.0);
    sb.data = MatrixXd::Zero(gb.n, 5);
    CHECK_THROWS_AS(estimate_path(sb), UnsupportedConfigurationError);
}

TEST_CASE("path estimation flags flat correlations") {
    Grid g = unit_periodic(64);
    SnapshotSet s;
    s.grid = g;
    s.components = 1;
    s.times = VectorXd::LinSpaced(10, 0.0, 1.0);
    s.data = MatrixXd::Constant(g.n, 10, 0.3);
    PathEstimate est = estimate_path(s);
    CHECK(est.flat_correlation);
    CHECK(est.path.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Burgers path is increasing and visibly nonlinear") {
    FomModel m;
    m.kind = FomKind::Burgers;
    m.mu = 2e-3;
    m.grid = unit_periodic(200);
    m.components = 1;
    m.initial_condition = gaussian_field(m.grid, 0.5, 0.1);
    IntegratorSpec spec;
    SnapshotSet s = integrate_fom(m, spec, 1.0).snapshots;

    PathEstimate est = estimate_path(s);
    for (int k = 1; k < s.m(); ++k) CHECK(est.path[k] > est.path[k - 1] - 1e-12);
    const double p_end = est.path[s.m() - 1];
    double max_dev = 0.0;
    for (int k = 0; k < s.m(); ++k)
        max_dev = std::max(max_dev, std::abs(est.path[k] - s.times[k] * p_end));
    CHECK(max_dev > 0.01);
}

TEST_CASE("decomposition files round-trip") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 80);
    Decomposition dec = compute_spod_single_frame(s, (0.8 * s.times).eval(),
                                                  TransformFamily::periodic_shift(g), 2);
    const std::string path = "test_decomposition.bin";
    save_decomposition(dec, path);
    Decomposition loaded = load_decomposition(path);
    CHECK(loaded.frames.size() == dec.frames.size());
    CHECK(loaded.frames[0].coefficients == dec.frames[0].coefficients);
    CHECK(loaded.frames[0].path == dec.frames[0].path);
    for (int i = 0; i < 2; ++i)
        CHECK(loaded.frames[0].modes[i].values == dec.frames[0].modes[i].values);
    CHECK(loaded.offline_error == dec.offline_error);
    std::filesystem::remove(path);
}

TEST_CASE("decompositions record boundedness diagnostics") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 80);
    Decomposition dec = compute_pod(s, 3);
    CHECK(dec.max_coefficient_norm > 0.0);
    CHECK(dec.max_mode_derivative_norm > 0.0);
}

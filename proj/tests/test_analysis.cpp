#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "tramor/experiment.hpp"

using namespace tramor;

namespace {

Grid unit_periodic(int n) { return Grid(n, 0.0, 1.0, Topology::Periodic); }

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

} // namespace

TEST_CASE("error bound envelope closed forms") {
    VectorXd times = VectorXd::LinSpaced(11, 0.0, 1.0);
    VectorXd zero = VectorXd::Zero(11);
    CHECK(error_bound(0.0, zero, times, 1.0, 0.0).cwiseAbs().maxCoeff() == 0.0);

    const double rho = 0.37, jiv = 0.05;
    VectorXd constant = VectorXd::Constant(11, rho);
    VectorXd bound = error_bound(jiv, constant, times, 1.0, 0.0);
    for (int k = 0; k < 11; ++k)
        CHECK(bound[k] == Catch::Approx(jiv + times[k] * rho).margin(1e-15));

    // Monotone non-decreasing for omega >= 0 and j_iv >= 0.
    VectorXd wobbly(11);
    for (int k = 0; k < 11; ++k) wobbly[k] = 0.1 + 0.05 * std::sin(3.0 * k);
    VectorXd b2 = error_bound(0.01, wobbly, times, 1.5, 0.3);
    for (int k = 1; k < 11; ++k) CHECK(b2[k] >= b2[k - 1] - 1e-15);

    CHECK_THROWS_AS(error_bound(0.0, zero, times, 0.5, 0.0), ConfigError);
    CHECK_THROWS_AS(error_bound(0.0, zero, times, 1.0, -0.1), ConfigError);
}

TEST_CASE("certified envelope dominates the actual error on the periodic run") {
    AdeReproResult r = run_repro_ade(recipe_ade());
    REQUIRE(r.shared.error_curve.size() == r.shared.bound_curve.size());
    for (int k = 0; k < r.shared.error_curve.size(); ++k)
        CHECK(r.shared.error_curve[k] <= r.shared.bound_curve[k]);
}

TEST_CASE("reconstruction special cases") {
    Grid g = unit_periodic(128);
    SnapshotSet s = transport_snapshots(gaussian_field(g, 0.5, 0.1), 1.0, 64);
    Decomposition dec = compute_pod(s, 3);

    // Identity frame: reconstruction is the plain modes-times-coefficients product.
    SnapshotSet recon = reconstruct(dec, s.times);
    MatrixXd basis(g.n, 3);
    for (int i = 0; i < 3; ++i) basis.col(i) = dec.frames[0].modes[i].flat();
    MatrixXd direct = basis * dec.frames[0].coefficients;
    CHECK((recon.data - direct).cwiseAbs().maxCoeff() < 1e-13);

    // Exact one-frame transport decomposition reproduces the truth.
    TransformFamily fam = TransformFamily::periodic_shift(g);
    Decomposition spod = compute_spod_single_frame(s, s.times, fam, 1);
    SnapshotSet recon2 = reconstruct(spod, s.times);
    CHECK(relative_error(s, recon2) < 1e-6);

    // Zero coefficients give the zero field.
    Decomposition zero = dec;
    zero.frames[0].coefficients.setZero();
    CHECK(reconstruct(zero, s.times).data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("step-count study is deterministic") {
    ExperimentConfig cfg = recipe_wave();
    cfg.analysis.steps_pod_rank = 8; // small rank keeps the check fast
    StepsStageResult a = run_steps_stage(cfg);
    StepsStageResult b = run_steps_stage(cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].accepted_steps == b.rows[i].accepted_steps);
        CHECK(a.rows[i].ratio_to_fom == b.rows[i].ratio_to_fom);
    }
    // The full model is integrated once per scheme, two reduced variants each.
    CHECK(a.rows.size() == 6);
}

TEST_CASE("sweep entries are reproducible and parallel-safe") {
    ExperimentConfig cfg = recipe_ade();
    cfg.analysis.sweep_from = -1.0;
    cfg.analysis.sweep_to = 1.0;
    cfg.analysis.sweep_step = 0.5;
    cfg.jobs = 1;
    SweepStageResult serial = run_sweep_stage(cfg);
    cfg.jobs = 3;
    SweepStageResult parallel = run_sweep_stage(cfg);
    REQUIRE(serial.entries.size() == parallel.entries.size());
    for (std::size_t i = 0; i < serial.entries.size(); ++i) {
        CHECK(serial.entries[i].c == parallel.entries[i].c);
        CHECK(serial.entries[i].spod_error == parallel.entries[i].spod_error);
        CHECK(serial.entries[i].pod_small_error == parallel.entries[i].pod_small_error);
        CHECK(serial.entries[i].pod_large_error == parallel.entries[i].pod_large_error);
    }
}

TEST_CASE("table writer: csv header and gnuplot variant") {
    const std::string base = "test_table";
    write_table_csv(base + ".csv", {"a", "b"}, {{"1", "2"}, {"3", "4"}}, false);
    write_table_csv(base + ".dat", {"a", "b"}, {{"1", "2"}, {"3", "4"}}, true);
    std::ifstream csv(base + ".csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "a,b");
    std::getline(csv, line);
    CHECK(line == "1,2");
    std::ifstream dat(base + ".dat");
    std::getline(dat, line);
    CHECK(line == "1 2");
    std::filesystem::remove(base + ".csv");
    std::filesystem::remove(base + ".dat");
}

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "tramor/fom.hpp"

using namespace tramor;

namespace {

constexpr double kPi = 3.14159265358979323846;

Grid unit_periodic(int n) { return Grid(n, 0.0, 1.0, Topology::Periodic); }

FomModel advection_diffusion(double c, double mu, int n = 200) {
    FomModel m;
    m.kind = mu == 0.0 ? FomKind::Advection : FomKind::AdvectionDiffusionPeriodic;
    m.c = c;
    m.mu = mu;
    m.grid = unit_periodic(n);
    m.components = 1;
    m.initial_condition = gaussian_field(m.grid, 0.5, 0.1);
    return m;
}

FomModel wave_model(int n = 200) {
    FomModel m;
    m.kind = FomKind::LinearWave;
    m.c = 1.0;
    m.mu = 0.0;
    m.grid = unit_periodic(n);
    m.components = 2;
    GridFunction ic(m.grid, 2);
    ic.values.row(0) = gaussian_field(m.grid, 0.5, 0.1).values.row(0);
    m.initial_condition = ic;
    return m;
}

FomModel burgers_model(double mu = 2e-3, int n = 200) {
    FomModel m;
    m.kind = FomKind::Burgers;
    m.mu = mu;
    m.grid = unit_periodic(n);
    m.components = 1;
    m.initial_condition = gaussian_field(m.grid, 0.5, 0.1);
    return m;
}

IntegratorSpec trapezoid(double tau = 5e-3) {
    IntegratorSpec s;
    s.scheme = Scheme::ImplicitTrapezoid;
    s.tau = tau;
    return s;
}

double spatial_mean(const GridFunction& u) {
    GridFunction one(u.grid, MatrixXd::Ones(u.components(), u.grid.n));
    return inner_product(u, one) / u.grid.length;
}

} // namespace

TEST_CASE("right-hand sides at simple states") {
    FomModel adv = advection_diffusion(1.0, 0.0);
    GridFunction c(adv.grid, MatrixXd::Constant(1, adv.grid.n, 0.7));
    CHECK(eval_rhs(adv, 0.0, c).values.cwiseAbs().maxCoeff() < 1e-11);

    FomModel wave = wave_model();
    GridFunction z(wave.grid, 2);
    for (int k = 0; k < wave.grid.n; ++k) z.values(0, k) = std::sin(2 * kPi * wave.grid.node(k));
    GridFunction r = eval_rhs(wave, 0.0, z);
    CHECK(r.values.row(0).cwiseAbs().maxCoeff() < 1e-11);
    for (int k = 0; k < wave.grid.n; ++k)
        CHECK(r.values(1, k) ==
              Catch::Approx(-2 * kPi * std::cos(2 * kPi * wave.grid.node(k))).margin(1e-8));

    FomModel bur = burgers_model();
    GridFunction cb(bur.grid, MatrixXd::Constant(1, bur.grid.n, 1.3));
    CHECK(eval_rhs(bur, 0.0, cb).values.cwiseAbs().maxCoeff() < 1e-10);

    GridFunction wrong(adv.grid, 2);
    CHECK_THROWS_AS(eval_rhs(adv, 0.0, wrong), DimensionError);
}

TEST_CASE("pure advection returns to the initial condition after one period") {
    FomModel adv = advection_diffusion(1.0, 0.0);
    FomResult res = integrate_fom(adv, trapezoid(), 1.0);
    GridFunction final_state = res.snapshots.at(res.snapshots.m() - 1);
    GridFunction diff(adv.grid, final_state.values - adv.initial_condition.values);
    CHECK(norm(diff) / norm(adv.initial_condition) < 0.02);
}

TEST_CASE("periodic advection-diffusion conserves the spatial mean") {
    FomModel m = advection_diffusion(1.0, 0.002);
    FomResult res = integrate_fom(m, trapezoid(), 1.0);
    const double mean0 = spatial_mean(res.snapshots.at(0));
    for (int k = 0; k < res.snapshots.m(); k += 20)
        CHECK(std::abs(spatial_mean(res.snapshots.at(k)) - mean0) < 1e-10);
}

TEST_CASE("implicit trapezoid preserves the wave energy") {
    FomModel m = wave_model();
    FomResult res = integrate_fom(m, trapezoid(), 1.0);
    GridFunction z0 = res.snapshots.at(0);
    const double e0 = inner_product(z0, z0);
    for (int k = 0; k < res.snapshots.m(); k += 25) {
        GridFunction z = res.snapshots.at(k);
        CHECK(std::abs(inner_product(z, z) - e0) < 1e-8);
    }
}

TEST_CASE("adaptive integrators reproduce the fixed-step trajectory") {
    FomModel m = advection_diffusion(1.0, 0.002);
    FomResult fixed = integrate_fom(m, trapezoid(), 1.0);
    for (Scheme scheme : {Scheme::AdaptiveRK45, Scheme::AdaptiveRK23}) {
        IntegratorSpec spec;
        spec.scheme = scheme;
        spec.tau = 5e-3; // output sampling
        FomResult adaptive = integrate_fom(m, spec, 1.0);
        CHECK(relative_error(fixed.snapshots, adaptive.snapshots) < 10.0 * spec.rel_tol);
        CHECK(adaptive.accepted_steps > 0);
    }
}

TEST_CASE("adaptive step counts are deterministic") {
    FomModel m = wave_model();
    IntegratorSpec spec;
    spec.scheme = Scheme::AdaptiveRK45;
    FomResult a = integrate_fom(m, spec, 1.0);
    FomResult b = integrate_fom(m, spec, 1.0);
    CHECK(a.accepted_steps == b.accepted_steps);
    CHECK(a.snapshots.data == b.snapshots.data);
}

TEST_CASE("Newton failure carries a time stamp") {
    FomModel m = burgers_model();
    IntegratorSpec spec = trapezoid(0.25);
    spec.newton.max_iter = 1;
    spec.newton.tol = 1e-15;
    CHECK_THROWS_AS(integrate_fom(m, spec, 1.0), StepFailureError);
}

TEST_CASE("analytic wave solution: initial data, symmetry, conservation") {
    Grid g = unit_periodic(200);
    GridFunction rho0 = gaussian_field(g, 0.5, 0.1);
    VectorXd times = VectorXd::LinSpaced(201, 0.0, 1.0);
    SnapshotSet s = analytic_wave_snapshots(rho0, g, times);

    GridFunction z0 = s.at(0);
    CHECK((z0.values.row(0) - rho0.values.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(z0.values.row(1).cwiseAbs().maxCoeff() == 0.0);

    // Half-period symmetry: rho(1/2, xi) = rho0(xi + 1/2) for one-periodic data.
    GridFunction zh = s.at(100);
    TransformFamily shift = TransformFamily::periodic_shift(g);
    GridFunction expected = transform(shift, -0.5, rho0);
    CHECK((zh.values.row(0) - expected.values.row(0)).cwiseAbs().maxCoeff() < 1e-13);

    GridFunction one(g, MatrixXd::Ones(1, g.n));
    GridFunction rho_t(g, zh.values.row(0));
    CHECK(std::abs(inner_product(rho_t, one) - inner_product(rho0, one)) < 1e-12);
}

TEST_CASE("relative space-time error basics") {
    FomModel m = advection_diffusion(1.0, 0.002);
    FomResult res = integrate_fom(m, trapezoid(), 0.2);
    const SnapshotSet& truth = res.snapshots;

    CHECK(relative_error(truth, truth) == 0.0);

    SnapshotSet zero = truth;
    zero.data.setZero();
    CHECK(relative_error(truth, zero) == Catch::Approx(1.0).margin(1e-13));

    SnapshotSet scaled = truth;
    scaled.data = truth.data * (1.0 + 1e-3);
    CHECK(relative_error(truth, scaled) == Catch::Approx(1e-3).margin(1e-12));

    SnapshotSet offgrid = truth;
    offgrid.times = truth.times.array() + 0.1;
    CHECK_THROWS_AS(relative_error(truth, offgrid), DimensionError);
}

TEST_CASE("snapshot files round-trip bit for bit") {
    FomModel m = advection_diffusion(1.0, 0.002);
    FomResult res = integrate_fom(m, trapezoid(), 0.1);
    const std::string path = "test_snapshots.bin";
    save_snapshots(res.snapshots, path);
    SnapshotSet loaded = load_snapshots(path);
    CHECK(loaded.data == res.snapshots.data);
    CHECK(loaded.model_tag == res.snapshots.model_tag);
    CHECK(loaded.components == res.snapshots.components);
    CHECK((loaded.times - res.snapshots.times).cwiseAbs().maxCoeff() < 1e-15);
    std::filesystem::remove(path);
}

TEST_CASE("Dirichlet-Neumann model honors its boundary data") {
    const int n = 201;
    FomModel m;
    m.kind = FomKind::AdvectionDiffusionDirichletNeumann;
    m.c = 1.0;
    m.mu = 0.001;
    m.grid = Grid(n, 0.0, 1.0, Topology::Bounded);
    m.components = 1;
    m.initial_condition = gaussian_field(m.grid, 0.5, 0.02, 0.5);
    auto g = [](double t) {
        const double s = (t - 0.2) / 0.03;
        return 0.5 * std::exp(-s * s);
    };
    auto gdot = [g](double t) {
        const double s = (t - 0.2) / 0.03;
        return g(t) * (-2.0 * s / 0.03);
    };
    m.dirichlet_left = BoundaryData{g, gdot};

    FomResult res = integrate_fom(m, trapezoid(), 0.6);
    for (int k = 0; k < res.snapshots.m(); k += 12) {
        const double t = res.snapshots.times[k];
        CHECK(res.snapshots.at(k).values(0, 0) == Catch::Approx(g(t)).margin(1e-12));
    }
    // The inflow pulse has entered the domain and is transported right.
    GridFunction last = res.snapshots.at(res.snapshots.m() - 1);
    int argmax = 0;
    last.values.row(0).maxCoeff(&argmax);
    CHECK(m.grid.node(argmax) > 0.2);
    CHECK(last.values.row(0).maxCoeff() > 0.2);
}

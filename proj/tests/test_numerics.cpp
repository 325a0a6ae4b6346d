#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tramor/diff_ops.hpp"
#include "tramor/grid.hpp"
#include "tramor/transform.hpp"

using namespace tramor;

namespace {

constexpr double kPi = 3.14159265358979323846;

Grid unit_periodic(int n) { return Grid(n, 0.0, 1.0, Topology::Periodic); }

GridFunction gaussian(const Grid& g, double center, double width) {
    return GridFunction::sample(g, [=](double xi) {
        const double s = (xi - center) / width;
        return std::exp(-s * s);
    });
}

// Trapezoid quadrature of f*g on a refined grid, used as the
// independent oracle for the discrete inner product.
double refined_trapezoid(const std::function<double(double)>& f, int n_fine, double length) {
    const double h = length / n_fine; // periodic: no duplicated endpoint
    double acc = 0.0;
    for (int k = 0; k < n_fine; ++k) acc += f(k * h);
    return acc * h;
}

} // namespace

TEST_CASE("inner product of constants equals the domain length") {
    Grid g = unit_periodic(200);
    GridFunction one(g, MatrixXd::Ones(1, g.n));
    CHECK(inner_product(one, one) == Catch::Approx(1.0).margin(1e-14));

    Grid gb(101, 0.0, 2.0, Topology::Bounded);
    GridFunction oneb(gb, MatrixXd::Ones(1, gb.n));
    CHECK(inner_product(oneb, oneb) == Catch::Approx(2.0).margin(1e-13));
}

TEST_CASE("discrete Fourier modes are orthogonal on equidistant periodic grids") {
    Grid g = unit_periodic(200);
    GridFunction u = GridFunction::sample(g, [](double xi) { return std::sin(2 * kPi * xi); });
    GridFunction v = GridFunction::sample(g, [](double xi) { return std::cos(2 * kPi * xi); });
    CHECK(std::abs(inner_product(u, v)) < 1e-12);
}

TEST_CASE("Gaussian norm matches a 10x-refined trapezoid oracle") {
    Grid g = unit_periodic(200);
    GridFunction u = gaussian(g, 0.5, 0.1);
    const double oracle = refined_trapezoid(
        [](double xi) {
            const double s = (xi - 0.5) / 0.1;
            return std::exp(-2.0 * s * s);
        },
        2000, 1.0);
    CHECK(inner_product(u, u) == Catch::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("inner product rejects mismatched grids") {
    GridFunction a(unit_periodic(200), 1);
    GridFunction b(unit_periodic(100), 1);
    CHECK_THROWS_AS(inner_product(a, b), DimensionError);
    GridFunction c2(unit_periodic(200), 2);
    CHECK_THROWS_AS(inner_product(a, c2), DimensionError);
}

TEST_CASE("sixth-order first derivative: accuracy and observed order") {
    auto max_err = [](int n) {
        Grid g = unit_periodic(n);
        GridFunction u =
            GridFunction::sample(g, [](double xi) { return std::sin(2 * kPi * xi); });
        GridFunction du = apply_diff(DiffOp(DiffOrder::D1_6th, g), u);
        double e = 0.0;
        for (int k = 0; k < n; ++k)
            e = std::max(e, std::abs(du.values(0, k) - 2 * kPi * std::cos(2 * kPi * g.node(k))));
        return e;
    };
    CHECK(max_err(200) < 1e-9);
    // Richardson pair chosen well above the roundoff floor.
    const double order = std::log2(max_err(64) / max_err(128));
    CHECK(order >= 5.8);
}

TEST_CASE("sixth-order second derivative: observed order and constants") {
    auto max_err = [](int n) {
        Grid g = unit_periodic(n);
        GridFunction u =
            GridFunction::sample(g, [](double xi) { return std::sin(2 * kPi * xi); });
        GridFunction ddu = apply_diff(DiffOp(DiffOrder::D2_6th, g), u);
        double e = 0.0;
        for (int k = 0; k < n; ++k)
            e = std::max(e, std::abs(ddu.values(0, k) +
                                     4 * kPi * kPi * std::sin(2 * kPi * g.node(k))));
        return e;
    };
    const double order = std::log2(max_err(64) / max_err(128));
    CHECK(order >= 5.8);

    Grid g = unit_periodic(64);
    GridFunction c(g, MatrixXd::Constant(1, g.n, 3.7));
    GridFunction ddc = apply_diff(DiffOp(DiffOrder::D2_6th, g), c);
    CHECK(ddc.values.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("second-order one-sided closure is exact for linear fields") {
    Grid g(50, 0.0, 1.0, Topology::Bounded);
    GridFunction u = GridFunction::sample(g, [](double xi) { return 3.0 * xi + 0.25; });
    GridFunction du = apply_diff(DiffOp(DiffOrder::D1_2nd, g), u);
    for (int k = 0; k < g.n; ++k)
        CHECK(du.values(0, k) == Catch::Approx(3.0).margin(1e-11));
    GridFunction ddu = apply_diff(DiffOp(DiffOrder::D2_2nd, g), u);
    CHECK(ddu.values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("periodic D1 is antisymmetric in the discrete inner product") {
    Grid g = unit_periodic(200);
    GridFunction u = gaussian(g, 0.3, 0.08);
    GridFunction v = GridFunction::sample(g, [](double xi) { return std::cos(6 * kPi * xi); });
    DiffOp d1(DiffOrder::D1_6th, g);
    const double lhs = inner_product(apply_diff(d1, u), v);
    const double rhs = -inner_product(u, apply_diff(d1, v));
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
}

TEST_CASE("shift by zero is the identity, bit for bit") {
    Grid g = unit_periodic(200);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    GridFunction phi = gaussian(g, 0.5, 0.1);
    GridFunction shifted = transform(fam, 0.0, phi);
    CHECK(shifted.values == phi.values);
}

TEST_CASE("lattice shifts rotate indices exactly and form a group") {
    Grid g = unit_periodic(200);
    const double h = g.dxi();
    TransformFamily fam = TransformFamily::periodic_shift(g);
    GridFunction phi = gaussian(g, 0.5, 0.1);

    GridFunction s7 = transform(fam, 7 * h, phi);
    for (int k = 0; k < g.n; ++k)
        CHECK(s7.values(0, k) == phi.values(0, (k - 7 + g.n) % g.n));

    GridFunction ab = transform(fam, 5 * h, transform(fam, 12 * h, phi));
    GridFunction sum = transform(fam, 17 * h, phi);
    CHECK(ab.values == sum.values);

    // Exact isometry on the lattice.
    CHECK(inner_product(s7, s7) == inner_product(phi, phi));
}

TEST_CASE("sub-grid shifts are isometric up to interpolation error") {
    Grid g = unit_periodic(200);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    GridFunction phi = gaussian(g, 0.5, 5.0 * g.dxi());
    const double nrm2 = inner_product(phi, phi);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double eta = dist(rng);
        GridFunction s = transform(fam, eta, phi);
        CHECK(std::abs(inner_product(s, s) - nrm2) <= 1e-3 * nrm2);
    }
}

TEST_CASE("transform derivative matches the analytic derivative of a shifted sine") {
    Grid g = unit_periodic(200);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    GridFunction phi = GridFunction::sample(g, [](double xi) { return std::sin(2 * kPi * xi); });
    const double eta = 0.1234;
    GridFunction d = transform_derivative(fam, eta, phi);
    for (int k = 0; k < g.n; ++k) {
        const double expected = -2 * kPi * std::cos(2 * kPi * (g.node(k) - eta));
        CHECK(d.values(0, k) == Catch::Approx(expected).margin(1e-6));
    }

    GridFunction c(g, MatrixXd::Constant(1, g.n, 2.0));
    CHECK(transform_derivative(fam, eta, c).values.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("transform derivative agrees with central differences in eta") {
    Grid g = unit_periodic(200);
    TransformFamily fam = TransformFamily::periodic_shift(g);
    GridFunction phi = gaussian(g, 0.4, 0.1);
    const double eta = 0.31, delta = 1e-4;
    GridFunction d = transform_derivative(fam, eta, phi);
    GridFunction plus = transform(fam, eta + delta, phi);
    GridFunction minus = transform(fam, eta - delta, phi);
    MatrixXd fd = (plus.values - minus.values) / (2.0 * delta);
    // Bound: O(delta^2) plus the cubic-interpolation error of the shift.
    CHECK((d.values - fd).cwiseAbs().maxCoeff() < 2e-4);
}

TEST_CASE("virtual-domain shift restricts the stored field and guards its hull") {
    Grid g(201, 0.0, 1.0, Topology::Bounded);
    TransformFamily fam = TransformFamily::virtual_domain_shift(g, 0.0, 0.5, DiffOrder::D1_2nd);
    const Grid& vg = fam.mode_grid();
    REQUIRE(vg.xi0 < -0.5 + 1e-12);

    GridFunction phi = GridFunction::sample(vg, [](double xi) {
        const double s = (xi - 0.2) / 0.05;
        return std::exp(-s * s);
    });
    GridFunction moved = transform(fam, 0.3, phi);
    for (int k = 0; k < g.n; k += 10) {
        const double s = (g.node(k) - 0.3 - 0.2) / 0.05;
        CHECK(moved.values(0, k) == Catch::Approx(std::exp(-s * s)).margin(1e-5));
    }

    CHECK_THROWS_AS(transform(fam, 5.0, phi), DomainExceededError);
}

TEST_CASE("identity family transforms trivially and has zero derivative") {
    Grid g = unit_periodic(64);
    TransformFamily fam = TransformFamily::identity(g);
    GridFunction phi = gaussian(g, 0.5, 0.2);
    CHECK(transform(fam, 3.0, phi).values == phi.values);
    CHECK(transform_derivative(fam, 3.0, phi).values.cwiseAbs().maxCoeff() == 0.0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "chb/grid.hpp"

using namespace chb;

namespace {

ScalarField random_field(const GridSpec& g, unsigned seed, double amp = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    ScalarField f(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = u(rng);
    return f;
}

FaceField random_interior_facefield(const GridSpec& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FaceField F(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) F.x(i, j) = u(rng);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) F.y(i, j) = u(rng);
    return F;
}

// Dense application of the same gradient stencil, built independently.
void dense_gradient_x(const ScalarField& f, std::vector<double>& gx) {
    const GridSpec& g = f.grid();
    gx.assign((std::size_t)(g.nx + 1) * g.ny, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            gx[(std::size_t)j * (g.nx + 1) + i] = (f(i, j) - f(i - 1, j)) / g.hx;
}

} // namespace

TEST_CASE("GridSpec validates sizes") {
    CHECK_THROWS_AS(GridSpec(2, 8, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(GridSpec(8, 8, -1.0, 1.0), ConfigError);
    GridSpec g(8, 16, 2.0, 1.0);
    CHECK(g.hx == doctest::Approx(0.25));
    CHECK(g.hy == doctest::Approx(1.0 / 16));
}

TEST_CASE("gradient of a constant field vanishes") {
    GridSpec g(16, 16, 1.0, 1.0);
    ScalarField f(g, 3.7);
    FaceField gr = gradient(f);
    CHECK(max_abs(gr) == 0.0);
}

TEST_CASE("gradient of a linear field is exact, boundary faces zero") {
    GridSpec g(16, 12, 1.0, 1.0);
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f(i, j) = g.xc(i);
    FaceField gr = gradient(f);
    for (int j = 0; j < g.ny; ++j) {
        CHECK(gr.x(0, j) == 0.0);
        CHECK(gr.x(g.nx, j) == 0.0);
        for (int i = 1; i < g.nx; ++i) CHECK(gr.x(i, j) == doctest::Approx(1.0).epsilon(1e-13));
    }
    CHECK(gr.normal_boundary_is_zero());
}

TEST_CASE("gradient matches an independent dense stencil on cos(pi x)") {
    GridSpec g(64, 8, 1.0, 1.0);
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f(i, j) = std::cos(M_PI * g.xc(i));
    FaceField gr = gradient(f);
    std::vector<double> oracle;
    dense_gradient_x(f, oracle);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            CHECK(gr.x(i, j) == oracle[(std::size_t)j * (g.nx + 1) + i]);
    // and the stencil itself is O(h^2)-accurate against the analytic derivative
    double max_err = 0.0;
    for (int i = 1; i < g.nx; ++i) {
        const double xf = i * g.hx;
        max_err = std::max(max_err, std::fabs(gr.x(i, 3) + M_PI * std::sin(M_PI * xf)));
    }
    CHECK(max_err < 2.0 * M_PI * M_PI * g.hx * g.hx);
}

TEST_CASE("divergence: zero on zero field, telescoping sum vanishes") {
    GridSpec g(24, 18, 1.0, 2.0);
    FaceField zero(g);
    CHECK(max_abs(divergence(zero)) == 0.0);

    FaceField F = random_interior_facefield(g, 11);
    ScalarField d = divergence(F);
    CHECK(std::fabs(integral(d)) < 1e-12);
}

TEST_CASE("divergence is the negative adjoint of gradient") {
    GridSpec g(20, 28, 1.5, 0.7);
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        FaceField F = random_interior_facefield(g, 100 + trial);
        ScalarField v = random_field(g, 200 + trial);
        const double lhs = inner_product(divergence(F), v);
        const double rhs = -inner_product(F, gradient(v));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("laplacian: conservation, sign, and eigenfunction") {
    GridSpec g(64, 64, 1.0, 1.0);
    ScalarField f = random_field(g, 13);
    ScalarField lap = laplacian_neumann(f);
    CHECK(std::fabs(integral(lap)) < 1e-10);
    CHECK(inner_product(lap, f) <= 0.0);

    // cos(pi x) is a discrete eigenfunction with eigenvalue
    // -(2 - 2 cos(pi/nx))/hx^2
    ScalarField c(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) c(i, j) = std::cos(M_PI * g.xc(i));
    const double lam = -(2.0 - 2.0 * std::cos(M_PI / g.nx)) / (g.hx * g.hx);
    ScalarField lc = laplacian_neumann(c);
    for (int i = 0; i < g.nx; ++i)
        CHECK(lc(i, 31) == doctest::Approx(lam * c(i, 31)).epsilon(1e-10));
}

TEST_CASE("bilaplacian: factorization identity <lap2 f, f> = ||lap f||^2") {
    GridSpec g(32, 24, 1.0, 1.0);
    ScalarField c(g);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.0;
    CHECK(max_abs(bilaplacian_neumann(ScalarField(g, 2.0))) == 0.0);

    ScalarField f = random_field(g, 14);
    ScalarField b = bilaplacian_neumann(f);
    ScalarField lap = laplacian_neumann(f);
    const double lhs = inner_product(b, f);
    const double rhs = inner_product(lap, lap);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs >= 0.0);

    // eigenfunction squares its eigenvalue
    ScalarField cx(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) cx(i, j) = std::cos(M_PI * g.xc(i));
    const double lam = (2.0 - 2.0 * std::cos(M_PI / g.nx)) / (g.hx * g.hx);
    ScalarField bc = bilaplacian_neumann(cx);
    for (int i = 0; i < g.nx; ++i)
        CHECK(bc(i, 5) == doctest::Approx(lam * lam * cx(i, 5)).epsilon(1e-9));
}

TEST_CASE("quadrature: mean and symmetry") {
    GridSpec g(32, 32, 1.0, 1.0);
    CHECK(mean(ScalarField(g, 4.25)) == doctest::Approx(4.25).epsilon(1e-15));

    ScalarField f = random_field(g, 15), h = random_field(g, 16);
    CHECK(inner_product(f, h) == inner_product(h, f));

    ScalarField c2(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) c2(i, j) = std::cos(2.0 * M_PI * g.xc(i));
    CHECK(std::fabs(mean(c2)) < 1e-14);

    GridSpec other(16, 16, 1.0, 1.0);
    ScalarField wrong(other);
    CHECK_THROWS_AS(inner_product(f, wrong), ConfigError);
}

TEST_CASE("field snapshots: binary round-trip is bit-exact") {
    GridSpec g(17, 9, 2.0, 0.5);
    ScalarField f = random_field(g, 17);
    f(3, 4) = 1.0 / 3.0;
    f(0, 0) = -0.0;

    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_field(ss, f, "phi", 0.375, true);
    FieldSnapshot snap = read_field(ss);
    CHECK(snap.name == "phi");
    CHECK(snap.time == 0.375);
    CHECK(snap.field.grid() == g);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double a = f[k], b = snap.field[k];
        CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
}

TEST_CASE("field snapshots: ascii round-trip to near machine precision") {
    GridSpec g(8, 8, 1.0, 1.0);
    ScalarField f = random_field(g, 18);
    std::stringstream ss;
    write_field(ss, f, "sigma", 1.25, false);
    FieldSnapshot snap = read_field(ss);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(snap.field[k] == f[k]);  // %.17g exact
}

TEST_CASE("snapshot rejects whitespace names and bad headers") {
    GridSpec g(8, 8, 1.0, 1.0);
    ScalarField f(g);
    std::stringstream ss;
    CHECK_THROWS_AS(write_field(ss, f, "two words", 0.0, false), ConfigError);
    std::stringstream bad("NOT-A-FIELD v1 8 8 1 1 x 0 ascii\n");
    CHECK_THROWS_AS(read_field(bad), ConfigError);
}

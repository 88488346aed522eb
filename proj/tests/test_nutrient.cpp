#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chb/flow.hpp"
#include "chb/nutrient.hpp"

using namespace chb;

namespace {

ModelParams base_params(double chi = 1.0, double p = 2.0) {
    ModelParams mp;
    mp.chi = chi;
    mp.ell = 1.0;
    mp.lambda = 0.0;
    mp.p = p;
    mp.exact_log = true;
    return mp;
}

ScalarField noise_field(const GridSpec& g, double amp, unsigned seed, double mean = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    ScalarField f(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = mean + u(rng);
    return f;
}

SourceSpec zero_src() { return builtin_sources("zero", SourceConstants{}); }

} // namespace

TEST_CASE("cross_flux: uniform state carries no flux") {
    GridSpec g(16, 16, 1.0, 1.0);
    ScalarField sigma(g, 1.0), phi(g, 0.4);
    SensitivityParams sp{1.5, 1.0};
    for (auto rule : {MobilityFaceRule::UpwindByDrivingForce, MobilityFaceRule::HarmonicMean,
                      MobilityFaceRule::ChordEntropy})
        CHECK(max_abs(cross_flux(sigma, phi, sp, rule)) == 0.0);
}

TEST_CASE("cross_flux with chi=0 and chord mean reduces to grad sigma exactly") {
    GridSpec g(32, 24, 1.0, 1.0);
    ScalarField sigma(g), phi(g, 0.2);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            sigma(i, j) = 1.0 + 0.5 * std::cos(M_PI * g.xc(i)) * std::cos(M_PI * g.yc(j));
    for (double p : {1.2, 1.5, 2.0}) {
        SensitivityParams sp{p, 0.0};
        FaceField flux = cross_flux(sigma, phi, sp, MobilityFaceRule::ChordEntropy);
        FaceField gs = gradient(sigma);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                CHECK(flux.x(i, j) == doctest::Approx(gs.x(i, j)).epsilon(1e-10));
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                CHECK(flux.y(i, j) == doctest::Approx(gs.y(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("cross_flux: faces fed by a sigma=0 donor carry zero flux (upwind)") {
    GridSpec g(8, 8, 1.0, 1.0);
    ScalarField sigma(g, 1.0), phi(g, 0.0);
    sigma(4, 4) = 0.0;  // dead cell
    SensitivityParams sp{1.5, 1.0};
    FaceField flux = cross_flux(sigma, phi, sp, MobilityFaceRule::UpwindByDrivingForce);
    // w at the dead cell is -inf-like, so the driving force points away from
    // every neighbor toward it; the donors are the neighbors (sigma=1), and
    // the faces where the dead cell is the donor are exactly those where the
    // potential difference points outward: with phi constant, gamma(0) is the
    // minimum, so the flux INTO the dead cell comes from alpha(1) > 0 faces,
    // while any face whose donor is the dead cell carries alpha(0) = 0.
    // Chord mean: all four faces adjacent to the dead cell vanish.
    FaceField chord = cross_flux(sigma, phi, sp, MobilityFaceRule::ChordEntropy);
    CHECK(chord.x(4, 4) == 0.0);
    CHECK(chord.x(5, 4) == 0.0);
    CHECK(chord.y(4, 4) == 0.0);
    CHECK(chord.y(4, 5) == 0.0);
    // upwind: donor of the face between (3,4) and (4,4) is the high-w cell
    // (3,4) with alpha(1) = 0.5 > 0; flux flows into the dead cell.
    CHECK(flux.x(4, 4) != 0.0);
    // reverse situation: a hot dead-cell that would donate carries zero
    ScalarField sigma2(g, 0.0), phi2(g, 0.0);
    sigma2(4, 4) = 0.0;
    sigma2(3, 4) = 0.0;
    FaceField f2 = cross_flux(sigma2, phi2, sp, MobilityFaceRule::UpwindByDrivingForce);
    CHECK(f2.x(4, 4) == 0.0);  // both sides dead: alpha_f = 0
}

TEST_CASE("sigma_step: uniform stationary state stays put") {
    GridSpec g(16, 16, 1.0, 1.0);
    ModelParams mp = base_params(1.0);
    NutrientStepParams sp;
    sp.dt = 1e-2;
    ScalarField sigma(g, 1.0), phi(g, 0.3);
    FaceField u(g);
    ScalarField s = sigma;
    for (int step = 0; step < 20; ++step) {
        SigmaStepResult r = sigma_step(s, phi, u, zero_src(), mp, sp);
        s = r.sigma;
    }
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigma_step: b = 1 - sigma drives the closed-form relaxation") {
    GridSpec g(8, 8, 1.0, 1.0);
    ModelParams mp = base_params(0.0);
    SourceConstants sc;
    sc.b0 = 1.0;
    sc.b_inf = 1.0;
    const SourceSpec src = combine_sources("zero", "linear_b", sc);
    FaceField u(g);
    ScalarField phi(g, 0.0);

    // sigma(t) = 1 - 0.5 exp(-t); first-order convergence to 0.8160603 at t=1
    const double exact = 1.0 - 0.5 * std::exp(-1.0);
    double prev_err = 1e300;
    for (double dt : {2e-2, 1e-2, 5e-3}) {
        NutrientStepParams sp;
        sp.dt = dt;
        ScalarField s(g, 0.5);
        const int steps = (int)std::llround(1.0 / dt);
        for (int k = 0; k < steps; ++k) s = sigma_step(s, phi, u, src, mp, sp).sigma;
        const double err = std::fabs(mean(s) - exact);
        CHECK(err < 0.5 * dt);
        CHECK(err < prev_err);
        prev_err = err;
        // spatially uniform throughout
        CHECK(max_abs(s) - std::fabs(mean(s)) < 1e-12);
    }
}

TEST_CASE("sigma_step: positivity under rough phi and bump touching zero") {
    GridSpec g(32, 32, 1.0, 1.0);
    ModelParams mp = base_params(1.0, 1.5);
    ScalarField phi = noise_field(g, 0.8, 31);
    ScalarField sigma(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double dx = g.xc(i) - 0.5, dy = g.yc(j) - 0.5;
            const double r2 = dx * dx + dy * dy;
            sigma(i, j) = std::max(0.0, 1.0 - 25.0 * r2);  // compact bump, touches zero
        }
    REQUIRE(min_value(sigma) == 0.0);

    NutrientStepParams sp;
    sp.dt = 0.5 * cross_diffusion_dt_bound(phi, mp);
    FaceField u(g);
    ScalarField s = sigma;
    for (int step = 0; step < 200; ++step) {
        SigmaStepResult r = sigma_step(s, phi, u, zero_src(), mp, sp);
        s = r.sigma;
        CHECK(min_value(s) >= 0.0);
    }
}

TEST_CASE("sigma_step: conservation modulo sources") {
    GridSpec g(24, 24, 1.0, 1.0);
    ModelParams mp = base_params(0.8, 1.4);
    SourceConstants sc;
    sc.b0 = 1.0;
    sc.b_inf = 0.8;
    const SourceSpec src = combine_sources("zero", "logistic_b", sc);
    ScalarField phi = noise_field(g, 0.5, 32);
    ScalarField s = noise_field(g, 0.4, 33, 1.0);

    std::vector<double> psi((std::size_t)(g.nx + 1) * (g.ny + 1));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            const double x = i * g.hx, y = j * g.hy;
            const double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
            psi[(std::size_t)j * (g.nx + 1) + i] = 0.05 * sx * sx * sy * sy;
        }
    const FaceField u = velocity_from_stream(g, psi);

    NutrientStepParams sp;
    sp.dt = std::min(0.5 * cross_diffusion_dt_bound(phi, mp), 1e-3);
    sp.cg_tol = 1e-13;
    for (int step = 0; step < 20; ++step) {
        SigmaStepResult r = sigma_step(s, phi, u, src, mp, sp);
        // <sigma+> - <sigma> = dt <b_plus - sigma+ b_minus>
        double bal = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k)
            bal += src.b_plus(s[k], phi[k]) - r.sigma[k] * src.b_minus(s[k], phi[k]);
        bal *= g.cell_volume() / g.area();
        const double defect = (mean(r.sigma) - mean(s)) - sp.dt * bal;
        CHECK(std::fabs(defect) <= 1e-11 * std::max(1.0, mean(r.sigma)));
        s = r.sigma;
    }
}

TEST_CASE("sigma_step with chi=0 is exactly the implicit heat step") {
    GridSpec g(16, 16, 1.0, 1.0);
    ModelParams mp = base_params(0.0);
    ScalarField phi = noise_field(g, 0.5, 34);
    ScalarField s = noise_field(g, 0.3, 35, 1.2);
    NutrientStepParams sp;
    sp.dt = 1e-2;
    sp.cg_tol = 1e-14;
    SigmaStepResult r = sigma_step(s, phi, FaceField(g), zero_src(), mp, sp);
    // residual of (1/dt) sigma+ - lap sigma+ = (1/dt) sigma
    ScalarField lap = laplacian_neumann(r.sigma);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double resid = (r.sigma[k] - s[k]) / sp.dt - lap[k];
        CHECK(std::fabs(resid) < 1e-8);  // cg_tol * operator scale
    }
}

TEST_CASE("sigma_step guards: cross-diffusion CFL and advective CFL") {
    GridSpec g(16, 16, 1.0, 1.0);
    ModelParams mp = base_params(1.0);
    ScalarField phi = noise_field(g, 0.9, 36);
    ScalarField s(g, 1.0);
    NutrientStepParams sp;
    sp.dt = 10.0 * cross_diffusion_dt_bound(phi, mp);
    CHECK_THROWS_AS(sigma_step(s, phi, FaceField(g), zero_src(), mp, sp), StepError);

    ModelParams mp0 = base_params(0.0);
    FaceField u(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) u.x(i, j) = 2.0;
    NutrientStepParams sp2;
    sp2.dt = 1.0;
    CHECK_THROWS_AS(sigma_step(s, phi, u, zero_src(), mp0, sp2), StepError);
}

TEST_CASE("sigma_step rejects negative input and the chord rule") {
    GridSpec g(8, 8, 1.0, 1.0);
    ModelParams mp = base_params(0.0);
    ScalarField s(g, 1.0);
    NutrientStepParams sp;
    sp.mobility_rule = MobilityFaceRule::ChordEntropy;
    CHECK_THROWS_AS(sigma_step(s, ScalarField(g, 0.0), FaceField(g), zero_src(), mp, sp),
                    ConfigError);
    ScalarField neg(g, 1.0);
    neg(2, 2) = -1e-3;
    NutrientStepParams sp2;
    CHECK_THROWS_AS(sigma_step(neg, ScalarField(g, 0.0), FaceField(g), zero_src(), mp, sp2),
                    DomainError);
}

TEST_CASE("entropy report: uniform state") {
    GridSpec g(16, 16, 2.0, 1.0);
    SensitivityParams sp{1.5, 1.0};
    EntropyReport rep = entropy_pair_report(ScalarField(g, 1.0), sp, 2.0);
    CHECK(rep.grad_sigma_p2_sq == 0.0);
    CHECK(rep.grad_sigma_q2_sq == 0.0);
    CHECK(rep.grad_ln_sigma_sq == 0.0);
    CHECK(rep.gamma_hat_integral == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rep.sigma_p_integral == doctest::Approx(g.area()).epsilon(1e-13));
    CHECK(rep.ln_sigma_L1 == 0.0);
}

TEST_CASE("entropy report: cosine profile integrates exactly at p = 2") {
    GridSpec g(64, 8, 1.0, 1.0);
    ScalarField s(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) s(i, j) = 1.0 + 0.5 * std::cos(2.0 * M_PI * g.xc(i));
    SensitivityParams sp{2.0, 1.0};
    EntropyReport rep = entropy_pair_report(s, sp, 2.0);
    // int (1 + 0.5 cos)^2 = |Omega| (1 + 0.125); midpoint rule exact for
    // full periods
    CHECK(rep.sigma_p_integral == doctest::Approx(g.area() * 1.125).epsilon(1e-13));
}

TEST_CASE("H norm is finite and zero only for equilibria") {
    GridSpec g(16, 16, 1.0, 1.0);
    SensitivityParams sp{1.5, 0.7};
    ScalarField s = noise_field(g, 0.3, 37, 1.0);
    ScalarField phi = noise_field(g, 0.2, 38);
    const double h2 = cross_H_norm_sq(s, phi, sp, MobilityFaceRule::UpwindByDrivingForce);
    CHECK(h2 > 0.0);
    CHECK(std::isfinite(h2));
    CHECK(cross_H_norm_sq(ScalarField(g, 1.0), ScalarField(g, 0.5), sp,
                          MobilityFaceRule::HarmonicMean) == 0.0);
}

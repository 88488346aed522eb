#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chb/simulation.hpp"

using namespace chb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

SimConfig base_config(const std::string& out) {
    SimConfig c;
    c.grid = GridSpec(16, 16, 1.0, 1.0);
    c.mp.chi = 0.0;
    c.mp.ell = 1.0;
    c.mp.lambda = 0.0;
    c.mp.p = 2.0;
    c.mp.flow = FlowMode::Off;
    c.mp.exact_log = true;
    c.h_name = "zero";
    c.b_name = "zero";
    c.phi_init = PhiInit::ConstantMean;
    c.phi_mean = 0.0;
    c.phi_noise = 0.05;
    c.sigma_init = SigmaInit::Constant;
    c.sigma_value = 1.0;
    c.seed = 11;
    c.dt = 1e-3;
    c.t_end = 1e-2;
    c.out_dir = out;
    return c;
}

} // namespace

TEST_CASE("ini parser: sections, comments, errors") {
    IniMap m = parse_ini("# comment\n[grid]\nnx = 32 ; trailing\n\n[model]\nchi= 0.5\n");
    CHECK(m.at("grid.nx") == "32");
    CHECK(m.at("model.chi") == "0.5");
    CHECK_THROWS_AS(parse_ini("[unterminated\n"), ConfigError);
    CHECK_THROWS_AS(parse_ini("novalue\n"), ConfigError);
}

TEST_CASE("config echo round-trips through the parser") {
    SimConfig c = base_config("unused");
    c.mp.chi = 0.75;
    c.mp.flow = FlowMode::Brinkman;
    c.mp.epsilon = 0.01;
    c.seed = 1234;
    SimConfig c2 = config_from_ini(parse_ini(config_echo(c)));
    CHECK(c2.mp.chi == c.mp.chi);
    CHECK(c2.mp.epsilon == c.mp.epsilon);
    CHECK(c2.mp.flow == FlowMode::Brinkman);
    CHECK(c2.seed == c.seed);
    CHECK(c2.grid.nx == c.grid.nx);
    CHECK(c2.dt == c.dt);

    // from_file initial data round-trips its paths
    c.phi_init = PhiInit::FromFile;
    c.phi_file = "/some/path/phi.chb";
    c.sigma_init = SigmaInit::FromFile;
    c.sigma_file = "/some/path/sigma.chb";
    SimConfig c3 = config_from_ini(parse_ini(config_echo(c)));
    CHECK(c3.phi_file == c.phi_file);
    CHECK(c3.sigma_file == c.sigma_file);
}

TEST_CASE("config rejects unknown keys") {
    SimConfig c = base_config("unused");
    IniMap m = parse_ini(config_echo(c));
    m["output.snapshot_evry"] = "3";  // typo
    CHECK_THROWS_AS(config_from_ini(m), ConfigError);
}

TEST_CASE("config requires explicit physical constants") {
    // missing model.ell
    const char* txt =
        "[grid]\nnx=16\nny=16\nlx=1\nly=1\n"
        "[model]\nchi=0\nlambda=0\np=2\nflow=off\nregularization=exact\n"
        "[sources]\nh=zero\nb=zero\n"
        "[initial]\nphi=constant_mean\nphi_mean=0\nphi_noise=0.05\nsigma=constant\nsigma_value=1\n"
        "[time]\ndt=1e-3\nt_end=1e-2\n";
    CHECK_THROWS_AS(config_from_ini(parse_ini(txt)), ConfigError);
}

TEST_CASE("validators: bad source compatibility, bad means, sigma touching zero") {
    SimConfig c = base_config("unused");
    InitialState init = make_initial_state(c);
    CHECK(validate_config(c, init).pass);

    SimConfig bad_h = c;
    bad_h.h_name = "logistic_h_saturating";
    bad_h.source_constants.H = 1.5;  // H/ell = 1.5
    ValidationReport r = validate_config(bad_h, init);
    CHECK_FALSE(r.pass);
    bool mentions = false;
    for (const auto& f : r.failures) mentions = mentions || f.find("H/ell") != std::string::npos;
    CHECK(mentions);

    SimConfig bad_mean = c;
    bad_mean.phi_init = PhiInit::ConstantMean;
    bad_mean.phi_mean = 1.2;
    bad_mean.phi_noise = 0.0;
    InitialState init2 = make_initial_state(bad_mean);
    CHECK_FALSE(validate_config(bad_mean, init2).pass);

    SimConfig bad_sigma = c;
    bad_sigma.sigma_init = SigmaInit::Bump;
    bad_sigma.sigma_bump_base = 0.0;  // ln(sigma0) not integrable
    InitialState init3 = make_initial_state(bad_sigma);
    CHECK_FALSE(validate_config(bad_sigma, init3).pass);
}

TEST_CASE("initial state: seeded determinism") {
    SimConfig c = base_config("unused");
    InitialState a = make_initial_state(c);
    InitialState b = make_initial_state(c);
    for (std::size_t k = 0; k < a.phi.size(); ++k) CHECK(a.phi[k] == b.phi[k]);
    c.seed = 12;
    InitialState d = make_initial_state(c);
    bool differs = false;
    for (std::size_t k = 0; k < a.phi.size(); ++k) differs = differs || a.phi[k] != d.phi[k];
    CHECK(differs);
}

TEST_CASE("run: stationary configuration keeps every residual at zero") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_stat").string());
    c.mp.chi = 0.8;
    c.phi_noise = 0.0;  // phi identically 0
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    for (const auto& rec : r.history) {
        CHECK(std::fabs(rec.energy_residual) < 1e-9);
        CHECK(std::fabs(rec.mass_phi) < 1e-12);
        CHECK(rec.min_sigma >= 0.0);
    }
    CHECK(r.max_mass_mismatch < 1e-12);
}

TEST_CASE("run: zero-source chi=0 relaxation has monotone energy and exact mass ODE") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_relax").string());
    c.t_end = 5e-2;
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    for (std::size_t k = 1; k < r.history.size(); ++k)
        CHECK(r.history[k].energy <=
              r.history[k - 1].energy + 1e-13 * std::max(1.0, std::fabs(r.history[k].energy)));
    CHECK(r.max_mass_mismatch < 1e-9);
    CHECK(r.min_sigma_overall >= 0.0);
    CHECK(r.max_abs_phi_overall < 1.0);
}

TEST_CASE("run artifacts: csv, config echo, validator report, summary, determinism") {
    const fs::path dir = fs::temp_directory_path() / "chb_artifacts";
    fs::remove_all(dir);
    SimConfig c = base_config(dir.string());
    c.snapshot_every = 5;
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir / "diagnostics.csv"));
    CHECK(fs::exists(dir / "config_echo.ini"));
    CHECK(fs::exists(dir / "validator_report.txt"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "version.txt"));
    CHECK(fs::exists(dir / "phi_000005.chb"));
    FieldSnapshot snap = read_field((dir / "phi_000005.chb").string());
    CHECK(snap.name == "phi");
    CHECK(snap.field.grid() == c.grid);

    const std::string csv1 = slurp(dir / "diagnostics.csv");
    // identical config + seed => bitwise-identical CSV
    RunResult r2 = run(c);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "diagnostics.csv") == csv1);

    // csv row count: header + initial + steps
    const std::size_t rows = (std::size_t)std::count(csv1.begin(), csv1.end(), '\n');
    CHECK(rows == (std::size_t)r.steps + 2);
}

TEST_CASE("run: validator failure returns exit code 2") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_bad").string());
    c.h_name = "logistic_h_saturating";
    c.source_constants.H = 1.5;
    RunResult r = run(c);
    CHECK(r.exit_code == 2);
    CHECK(r.message.find("H/ell") != std::string::npos);
}

TEST_CASE("run: exhausted dt halvings exit with code 4") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_halvings").string());
    c.mp.chi = 1.0;  // a persistent interface keeps the cross guard far below dt
    c.phi_init = PhiInit::TanhBlob;
    c.phi_blob_amplitude = 0.9;
    c.dt = 0.1;      // needs far more than max_dt_halvings halvings
    c.t_end = 0.2;
    c.csv_every = 0;
    RunResult r = run(c, false);
    CHECK(r.exit_code == 4);
    CHECK(r.dt_halvings == c.max_dt_halvings);
}

TEST_CASE("run: coupled darcy flow smoke stays structurally sound") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_darcy").string());
    c.mp.chi = 0.5;
    c.mp.flow = FlowMode::Darcy;
    c.mp.lambda = 6.0;
    c.grid = GridSpec(16, 16, 4.0, 4.0);
    c.phi_noise = 0.2;
    c.b_name = "linear_b";
    c.source_constants.b0 = 1.0;
    c.source_constants.b_inf = 1.0;
    c.dt = 2e-3;
    c.t_end = 2e-2;
    RunResult r = run(c);
    REQUIRE(r.exit_code == 0);
    CHECK(r.min_sigma_overall >= 0.0);
    CHECK(r.max_abs_phi_overall < 1.0);
    CHECK(r.norms.all_finite);
}

TEST_CASE("mms experiment over coarse grids reaches second order") {
    SimConfig c = base_config("unused");
    c.mp.chi = 0.5;
    c.mp.lambda = 0.5;
    c.dt = 4e-3;   // dt at the coarsest grid; scaled by (h/h0)^2 inside
    c.t_end = 2e-2;
    MmsResult m = experiment_mms(c, {16, 32});
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].err_phi > m.rows[1].err_phi);
    CHECK(m.observed_order_phi > 1.5);
    CHECK(m.observed_order_sigma > 1.5);
}

TEST_CASE("mms converges at second order in regularized mode too") {
    SimConfig c = base_config("unused");
    c.mp.chi = 0.5;
    c.mp.lambda = 0.5;
    c.mp.exact_log = false;
    c.mp.reg_n = 4;
    c.mp.q0 = 3.0;
    c.dt = 2e-3;
    c.t_end = 1e-2;
    MmsResult m = experiment_mms(c, {16, 32});
    CHECK(m.observed_order_phi > 1.6);
    CHECK(m.observed_order_sigma > 1.6);
}

TEST_CASE("darcy sweep: {0} degenerates to a single reference run") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_darcy0").string());
    c.mp.chi = 0.3;
    c.mp.flow = FlowMode::Darcy;
    c.t_end = 5e-3;
    c.csv_every = 0;
    DarcySweepResult t = experiment_darcy_sweep(c, {0.0});
    CHECK(t.complete);
    CHECK(t.rows.empty());
    CHECK_THROWS_AS(experiment_darcy_sweep(c, {1e-1, 1e-1}), ConfigError);
    CHECK_THROWS_AS(experiment_darcy_sweep(c, {1e-2, -1.0}), ConfigError);
}

TEST_CASE("sweep parallelism reads CHB_THREADS") {
    // default is sequential
    CHECK(sweep_parallelism() >= 1);
    setenv("CHB_THREADS", "3", 1);
    CHECK(sweep_parallelism() == 3);
    unsetenv("CHB_THREADS");
    CHECK(sweep_parallelism() == 1);
}

TEST_CASE("energy stays under a fit-and-frozen Gronwall envelope with sources") {
    SimConfig c = base_config((fs::temp_directory_path() / "chb_gronwall").string());
    c.grid = GridSpec(24, 24, 1.0, 1.0);
    c.mp.chi = 0.4;
    c.h_name = "logistic_h_saturating";
    c.b_name = "logistic_b";
    c.source_constants.H = 0.4;
    c.source_constants.b0 = 1.0;
    c.source_constants.b_inf = 1.0;
    c.phi_noise = 0.1;
    c.sigma_init = SigmaInit::Bump;
    c.sigma_bump_base = 0.5;
    c.sigma_bump_amplitude = 1.0;
    c.dt = 1e-3;
    c.t_end = 0.4;
    c.csv_every = 0;
    RunResult r = run(c, false);
    REQUIRE(r.exit_code == 0);

    // fit c1, c2 on the first quarter, freeze, verify the whole trajectory
    const std::size_t fit_end = r.history.size() / 4;
    const double e0 = r.history.front().energy;
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t k = 1; k <= fit_end; ++k) {
        const auto& a = r.history[k - 1];
        const auto& b = r.history[k];
        const double de = (b.energy - a.energy) / b.dt;
        c2 = std::max(c2, de / std::max(1.0, std::fabs(a.energy)));
        c1 = std::max(c1, de);
    }
    c1 = 1.5 * c1 + 1.0;
    c2 = 1.5 * c2 + 0.5;
    for (const auto& rec : r.history) {
        const double envelope = (e0 + c1 * rec.t) * std::exp(c2 * rec.t);
        CHECK(rec.energy <= envelope + 1e-12);
    }
    // the monitored entropy norm also stays under its own envelope
    double sq0 = std::sqrt(r.history.front().sigma_q_integral);
    for (const auto& rec : r.history)
        CHECK(std::sqrt(rec.sigma_q_integral) <=
              (sq0 + 1.0) * std::exp((1.0 + c.source_constants.b_inf) * rec.t));
}

TEST_CASE("theorem norms are finite and drift little under refinement") {
    const fs::path dir = fs::temp_directory_path() / "chb_refine";
    fs::create_directories(dir);
    const double t_end = 8e-3;
    auto run_at = [&](int n) {
        GridSpec g(n, n, 1.0, 1.0);
        // sample one fixed smooth profile on every grid
        ScalarField phi0(g), sig0(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double cx = std::cos(M_PI * g.xc(i)), cy = std::cos(M_PI * g.yc(j));
                phi0(i, j) = 0.4 * cx * cy;
                sig0(i, j) = 1.0 + 0.3 * cx * std::cos(2.0 * M_PI * g.yc(j));
            }
        const std::string pf = (dir / ("phi" + std::to_string(n) + ".chb")).string();
        const std::string sf = (dir / ("sig" + std::to_string(n) + ".chb")).string();
        write_field(pf, phi0, "phi0", 0.0, true);
        write_field(sf, sig0, "sigma0", 0.0, true);

        SimConfig c = base_config((dir / ("out" + std::to_string(n))).string());
        c.grid = g;
        c.mp.chi = 0.5;
        c.mp.p = 1.5;
        c.mp.q_monitor = 2.0;
        c.phi_init = PhiInit::FromFile;
        c.phi_file = pf;
        c.sigma_init = SigmaInit::FromFile;
        c.sigma_file = sf;
        c.csv_every = 0;
        // dt scaled with the cross-diffusion guard (itself ~h^2)
        c.dt = 0.5 * cross_diffusion_dt_bound(phi0, c.mp);
        c.t_end = t_end;
        RunResult r = run(c, false);
        REQUIRE(r.exit_code == 0);
        return r.norms;
    };
    TheoremNormReport a = run_at(32);
    TheoremNormReport b = run_at(64);
    CHECK(a.all_finite);
    CHECK(b.all_finite);
    auto drift = [](double x, double y) { return std::fabs(x - y) / std::max(1e-12, y); };
    CHECK(drift(a.phi_LinfV, b.phi_LinfV) < 0.10);
    CHECK(drift(a.sigma_Linf_Lq, b.sigma_Linf_Lq) < 0.10);
    CHECK(drift(a.mu_L2V, b.mu_L2V) < 0.10);
}

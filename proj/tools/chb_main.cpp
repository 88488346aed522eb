// chb: structure-preserving simulator for a Cahn-Hilliard-Brinkman system
// with degenerate chemotactic cross-diffusion.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "chb/simulation.hpp"

namespace {

using namespace chb;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const InvariantViolation*>(&e)) return 3;
    if (dynamic_cast<const DomainError*>(&e)) return 3;
    return 4;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int snapshot_every = -1;
    bool binary_fields = false;
};

SimConfig load_with_overrides(const CommonOpts& o) {
    SimConfig c = load_config(o.config_path);
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.seed_set) c.seed = o.seed;
    if (o.snapshot_every >= 0) c.snapshot_every = o.snapshot_every;
    if (o.binary_fields) c.binary_fields = true;
    return c;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "path to the run config")->required();
    cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", o.seed, "RNG seed (overrides config)")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--snapshot-every", o.snapshot_every, "field snapshot cadence in steps");
    cmd->add_flag("--binary-fields", o.binary_fields, "write binary field snapshots");
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back((int)std::llround(v));
    return out;
}

int cmd_run(const CommonOpts& o) {
    SimConfig c = load_with_overrides(o);
    RunResult r = run(c);
    std::cout << "run: exit=" << r.exit_code << " steps=" << r.steps << " t=" << r.t_final
              << " msg=" << r.message << "\n";
    if (r.exit_code == 0) {
        std::cout << "  min sigma " << r.min_sigma_overall << ", max|phi| "
                  << r.max_abs_phi_overall << ", max mass mismatch " << r.max_mass_mismatch
                  << "\n";
    }
    return r.exit_code;
}

int cmd_sweep_darcy(const CommonOpts& o, const std::string& eps_csv) {
    SimConfig c = load_with_overrides(o);
    std::vector<double> eps = eps_csv.empty()
        ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4} : parse_double_list(eps_csv);
    DarcySweepResult t = experiment_darcy_sweep(c, eps);
    std::printf("%12s %14s %14s %14s %6s\n", "epsilon", "u_gap_L2Q", "phi_gap", "sigma_gap", "exit");
    for (const auto& row : t.rows)
        std::printf("%12.4g %14.6g %14.6g %14.6g %6d\n", row.epsilon, row.u_gap_L2Q,
                    row.phi_gap_final, row.sigma_gap_final, row.exit_code);
    std::printf("complete=%d u_gap_monotone=%d\n", (int)t.complete, (int)t.u_gap_monotone);
    return t.complete && t.u_gap_monotone ? 0 : 4;
}

int cmd_sweep_n(const CommonOpts& o, const std::string& n_csv) {
    SimConfig c = load_with_overrides(o);
    std::vector<int> ns = n_csv.empty() ? std::vector<int>{4, 16, 64} : parse_int_list(n_csv);
    NSweepResult t = experiment_n_sweep(c, ns);
    std::printf("%8s %16s %16s %16s %6s\n", "n", "sup max|phi|", "final energy", "beta range", "exit");
    for (const auto& row : t.rows)
        std::printf("%8s %16.8g %16.8g %16.8g %6d\n",
                    row.n == 0 ? "exact" : std::to_string(row.n).c_str(),
                    row.sup_max_abs_phi, row.final_energy, row.beta_range, row.exit_code);
    return t.complete ? 0 : 4;
}

int cmd_sweep_p(const CommonOpts& o, const std::string& p_csv) {
    SimConfig c = load_with_overrides(o);
    std::vector<double> ps = p_csv.empty()
        ? std::vector<double>{1.2, 1.5, 2.0} : parse_double_list(p_csv);
    auto rows = experiment_p_sweep(c, ps);
    std::printf("%8s %8s %8s %8s %14s %14s %6s\n", "p", "P0", "S", "R", "min sigma",
                "int sigma^p", "exit");
    bool ok = true;
    for (const auto& row : rows) {
        std::printf("%8.3g %8.4g %8.4g %8.4g %14.6g %14.6g %6d\n", row.p, row.exponents.P0,
                    row.exponents.S, row.exponents.R, row.min_sigma, row.final_sigma_p,
                    row.exit_code);
        ok = ok && row.exit_code == 0;
    }
    return ok ? 0 : 4;
}

int cmd_mms(const CommonOpts& o, const std::string& grids_csv) {
    SimConfig c = load_with_overrides(o);
    std::vector<int> grids = grids_csv.empty()
        ? std::vector<int>{32, 64, 128} : parse_int_list(grids_csv);
    MmsResult t = experiment_mms(c, grids);
    std::printf("%8s %12s %14s %14s\n", "n", "dt", "err_phi", "err_sigma");
    for (const auto& row : t.rows)
        std::printf("%8d %12.4g %14.6g %14.6g\n", row.n, row.dt, row.err_phi, row.err_sigma);
    std::printf("observed order: phi %.3f, sigma %.3f\n", t.observed_order_phi,
                t.observed_order_sigma);
    if (!t.pass) {
        std::fprintf(stderr, "mms: observed order below 1.5, regression signal\n");
        return 4;
    }
    return 0;
}

int cmd_tabulate(const std::string& out_path, double p, double lambda, int n, double q0,
                 double smin, double smax, int count) {
    SensitivityParams sens{p, 1.0};
    PotentialParams prm;
    prm.lambda = lambda;
    prm.exact = false;
    prm.n = n;
    prm.q0 = q0;
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw ConfigError("cannot open " + out_path);
        os = &file;
    }
    (*os) << "s,alpha,gamma,gamma_hat,beta_n,F_n\n";
    char buf[256];
    for (int k = 0; k < count; ++k) {
        const double s = smin + (smax - smin) * k / (count - 1);
        const double a = s >= 0.0 ? alpha(s, sens) : std::nan("");
        const double gm = s > 0.0 ? gamma_entropy(s, sens) : std::nan("");
        const double gh = s >= 0.0 ? gamma_hat(s, sens) : std::nan("");
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s, a, gm, gh,
                      beta_n(s, prm), potential_F_n(s, prm));
        (*os) << buf;
    }
    return 0;
}

int cmd_validate(const CommonOpts& o) {
    SimConfig c = load_with_overrides(o);
    InitialState init = make_initial_state(c);
    ValidationReport rep = validate_config(c, init);
    std::cout << rep.text();
    return rep.pass ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structure-preserving Cahn-Hilliard-Brinkman-nutrient simulator"};
    app.require_subcommand(1);

    CommonOpts run_o, darcy_o, n_o, p_o, mms_o, val_o;
    std::string eps_csv, n_csv, p_csv, grids_csv;

    CLI::App* c_run = app.add_subcommand("run", "run one simulation");
    add_common(c_run, run_o);

    CLI::App* c_darcy = app.add_subcommand("sweep-darcy", "Brinkman->Darcy limit sweep");
    add_common(c_darcy, darcy_o);
    c_darcy->add_option("--eps", eps_csv, "comma-separated, strictly decreasing epsilons");

    CLI::App* c_n = app.add_subcommand("sweep-n", "regularization-index sweep");
    add_common(c_n, n_o);
    c_n->add_option("--n", n_csv, "comma-separated regularization indices");

    CLI::App* c_p = app.add_subcommand("sweep-p", "sensitivity-exponent sweep");
    add_common(c_p, p_o);
    c_p->add_option("--p", p_csv, "comma-separated p values in (1,2]");

    CLI::App* c_mms = app.add_subcommand("mms", "manufactured-solution convergence study");
    add_common(c_mms, mms_o);
    c_mms->add_option("--grids", grids_csv, "comma-separated grid sizes");

    CLI::App* c_tab = app.add_subcommand("tabulate-constitutive",
                                         "emit CSV of the constitutive functions");
    std::string tab_out;
    double tab_p = 1.5, tab_lambda = 0.0, tab_q0 = 3.0, tab_smin = -2.0, tab_smax = 5.0;
    int tab_n = 8, tab_count = 501;
    c_tab->add_option("--out", tab_out, "output CSV path (stdout if omitted)");
    c_tab->add_option("--p", tab_p, "sensitivity exponent");
    c_tab->add_option("--lambda", tab_lambda, "potential concavity");
    c_tab->add_option("--n", tab_n, "regularization index");
    c_tab->add_option("--q0", tab_q0, "penalty growth exponent");
    c_tab->add_option("--smin", tab_smin, "left end of the sample interval");
    c_tab->add_option("--smax", tab_smax, "right end of the sample interval");
    c_tab->add_option("--count", tab_count, "number of samples");

    CLI::App* c_val = app.add_subcommand("validate", "check config and assumption bounds");
    add_common(c_val, val_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_run->parsed()) return cmd_run(run_o);
        if (c_darcy->parsed()) return cmd_sweep_darcy(darcy_o, eps_csv);
        if (c_n->parsed()) return cmd_sweep_n(n_o, n_csv);
        if (c_p->parsed()) return cmd_sweep_p(p_o, p_csv);
        if (c_mms->parsed()) return cmd_mms(mms_o, grids_csv);
        if (c_tab->parsed())
            return cmd_tabulate(tab_out, tab_p, tab_lambda, tab_n, tab_q0, tab_smin, tab_smax,
                                tab_count);
        if (c_val->parsed()) return cmd_validate(val_o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 1;
}

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chb/cahn_hilliard.hpp"
#include "chb/diagnostics.hpp"
#include "chb/flow.hpp"
#include "chb/model.hpp"
#include "chb/nutrient.hpp"

namespace chb {

// Flat key-value config with [section] headers; keys are "section.key".
// Physical constants are required, numerics default.
using IniMap = std::map<std::string, std::string>;
IniMap parse_ini(const std::string& text);
IniMap load_ini(const std::string& path);

enum class PhiInit { ConstantMean, TanhBlob, FromFile };
enum class SigmaInit { Constant, Bump, FromFile };

struct SimConfig {
    GridSpec grid;
    ModelParams mp;
    SourceConstants source_constants;
    std::string h_name = "zero", b_name = "zero";

    PhiInit phi_init = PhiInit::ConstantMean;
    double phi_mean = 0.0, phi_noise = 0.05, phi_blob_amplitude = 0.9;
    std::string phi_file;
    SigmaInit sigma_init = SigmaInit::Constant;
    double sigma_value = 1.0, sigma_bump_base = 0.1, sigma_bump_amplitude = 1.0;
    std::string sigma_file;
    std::uint64_t seed = 1;

    double dt = 1e-3, t_end = 0.1;

    std::string out_dir = "out";
    int snapshot_every = 0;  // 0 disables snapshots
    int csv_every = 1;
    bool binary_fields = false;

    // numerics (defaults are fine for validation-scale runs)
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    double krylov_tol = 1e-10;
    MobilityFaceRule mobility_rule = MobilityFaceRule::UpwindByDrivingForce;
    AdvectionRule advection = AdvectionRule::Upwind;
    double sigma_floor = 0.0;
    int max_dt_halvings = 5;
};

SimConfig config_from_ini(const IniMap& ini);
SimConfig load_config(const std::string& path);
std::string config_echo(const SimConfig& c);

SourceSpec make_sources(const SimConfig& c);

struct ValidationReport {
    bool pass = false;
    std::vector<std::string> failures;
    std::string source_summary;
    double mean_phi0 = 0.0;
    double delta = 0.0;  // mean-bound margin when defined
    std::string text() const;
};

struct InitialState {
    ScalarField phi, sigma;
};
InitialState make_initial_state(const SimConfig& c);
ValidationReport validate_config(const SimConfig& c, const InitialState& init);

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 validator, 3 invariant, 4 numeric
    std::string message;
    int steps = 0;
    double t_final = 0.0;
    int dt_halvings = 0;
    std::vector<DiagnosticsRecord> history;
    ScalarField phi, sigma, mu;
    FaceField u;
    // overall invariant verdicts
    double min_sigma_overall = 0.0;
    double max_abs_phi_overall = 0.0;
    double max_mass_mismatch = 0.0;  // |mass_phi - mass_ode_ref| over the run
    TheoremNormReport norms;
};

// Called after every accepted step with the new state and the velocity the
// step used; lets experiments trace trajectories without storing them here.
using StepObserver = std::function<void(int step, const ScalarField& phi,
                                        const ScalarField& sigma, const FaceField& u)>;

// Orchestrated operator-split loop: flow solve -> ch_step -> sigma_step ->
// diagnostics. Writes CSV/snapshots/summary under c.out_dir unless
// write_artifacts is false.
RunResult run(const SimConfig& c, bool write_artifacts = true,
              const StepObserver* observer = nullptr);

// ---- experiments ----

struct DarcySweepRow {
    double epsilon = 0.0;
    double u_gap_L2Q = 0.0;
    double phi_gap_final = 0.0;
    double sigma_gap_final = 0.0;
    int exit_code = 0;
};
struct DarcySweepResult {
    std::vector<DarcySweepRow> rows;  // one per epsilon > 0, gaps vs the eps=0 run
    bool complete = false;
    bool u_gap_monotone = false;
};
DarcySweepResult experiment_darcy_sweep(const SimConfig& base, std::vector<double> eps_list);

struct NSweepRow {
    int n = 0;            // 0 marks the exact-log reference column
    double sup_max_abs_phi = 0.0;
    double final_energy = 0.0;
    double beta_range = 0.0;  // max - min of beta_n(phi) at the final state
    int exit_code = 0;
};
struct NSweepResult {
    std::vector<NSweepRow> rows;
    bool complete = false;
};
NSweepResult experiment_n_sweep(const SimConfig& base, const std::vector<int>& n_list,
                                bool include_exact_reference = true);

struct PSweepRow {
    double p = 0.0;
    TheoremExponents exponents;
    double min_sigma = 0.0;
    double final_sigma_p = 0.0;  // int sigma^p at t_end
    int exit_code = 0;
};
std::vector<PSweepRow> experiment_p_sweep(const SimConfig& base, const std::vector<double>& p_list);

struct MmsRow {
    int n = 0;
    double dt = 0.0;
    double err_phi = 0.0;
    double err_sigma = 0.0;
};
struct MmsResult {
    std::vector<MmsRow> rows;
    std::vector<double> order_phi;    // per refinement pair
    std::vector<double> order_sigma;
    double observed_order_phi = 0.0;  // finest pair
    double observed_order_sigma = 0.0;
    bool pass = false;  // observed orders >= 1.5
};
// Grids n_list (default {32,64,128}), dt scaled with h^2 from dt_coarse.
MmsResult experiment_mms(const SimConfig& base, std::vector<int> n_list = {32, 64, 128});

// Max simultaneous sweep members; reads CHB_THREADS (default 1).
int sweep_parallelism();

} // namespace chb

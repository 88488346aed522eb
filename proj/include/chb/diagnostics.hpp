#pragma once

#include <string>
#include <vector>

#include "chb/flow.hpp"
#include "chb/grid.hpp"
#include "chb/model.hpp"
#include "chb/nutrient.hpp"

namespace chb {

// Everything the structural audits need, one row per accepted step. The
// dissipation channels and the energy residual refer to the step that
// produced the row (zero on the initial row).
struct DiagnosticsRecord {
    int step = 0;
    double t = 0.0;
    double dt = 0.0;
    double energy = 0.0;
    double mass_phi = 0.0;
    double mass_ode_ref = 0.0;
    double min_sigma = 0.0;
    double max_abs_phi = 0.0;
    double grad_mu_sq = 0.0;   // ||grad mu||^2
    double H_norm_sq = 0.0;    // ||alpha^(1/2) grad(gamma(sigma) - chi phi)||^2
    double u_sq = 0.0;         // ||u||^2
    double eps_Du_sq = 0.0;    // eps ||D u||^2
    double energy_residual = 0.0;
    double source_pairing = 0.0;  // R-term paired with the residual
    // theorem-norm ingredients
    double phi_V = 0.0;     // ||phi||_V
    double phi_H2 = 0.0;    // (||phi||^2 + ||grad phi||^2 + ||lap phi||^2)^(1/2)
    double mu_V = 0.0;
    double sigma_Lq = 0.0;  // ||sigma||_{L^q}
    double sigma_q2_V = 0.0;  // ||sigma^(q/2)||_V
    double lnsigma_V = 0.0;
    // entropy report
    double gamma_hat_integral = 0.0;
    double sigma_p_integral = 0.0;
    double grad_sigma_p2_sq = 0.0;
    double grad_ln_sigma_sq = 0.0;
    double ln_sigma_L1 = 0.0;
    double sigma_q_integral = 0.0;
    double grad_sigma_q2_sq = 0.0;
    // solver bookkeeping
    int newton_iters = 0;
    double ch_residual = 0.0;
    double P0 = 0.0, S = 0.0, R = 0.0;
};

// E = 1/2 ||grad phi||^2 [+ 1/(2n) ||lap phi||^2] + int F(phi)
//     + int (gamma_hat(sigma) - chi sigma phi).
double total_energy(const ScalarField& phi, const ScalarField& sigma, const ModelParams& mp);

// r = (E_curr - E_prev)/dt + D_curr - R, with D the summed dissipation
// channels stored in curr. Zero sources and a stationary state give r = 0.
double energy_inequality_residual(const DiagnosticsRecord& prev, const DiagnosticsRecord& curr,
                                  double dt, double source_pairing);

// The R-term of the discrete energy identity: <b_eff, gamma(sigma+) - chi phi+>
// + <h - ell phi+, mu+> with the levels the steps actually used.
double energy_source_pairing(const ScalarField& phi_new, const ScalarField& mu_new,
                             const ScalarField& sigma_new, const ScalarField& h_field,
                             const ScalarField& b_eff_field, const ModelParams& mp,
                             double floor_eps = 1e-300);

// ||lap phi||^2 - [ -<grad f(phi), grad phi> + <grad phi, grad mu>
//                   + chi <grad phi, grad sigma> ];
// exactly zero (to roundoff) when mu comes from the discrete potential law.
double entropy_identity_residual(const ScalarField& phi, const ScalarField& mu,
                                 const ScalarField& sigma, const ModelParams& mp);

struct TheoremExponents {
    double P0 = 0.0, S = 0.0, R = 0.0;
};
// P0 = min{(18q - 6p)/(12 - 5p), 4}, S = min{6p/(12 - 5p), p}, R = max{4, p'}.
TheoremExponents theorem_exponents(double p, double q);

struct TheoremNormReport {
    TheoremExponents exponents;
    double phi_LinfV = 0.0;      // L^inf(0,T; V)
    double phi_LP0_H2 = 0.0;     // L^P0(0,T; H^2)
    double mu_L2V = 0.0;         // L^2(0,T; V)
    double sigma_q2_L2V = 0.0;   // L^2(0,T; V) of sigma^(q/2)
    double sigma_q2_LinfL2 = 0.0;
    double sigma_Linf_Lq = 0.0;  // L^inf(0,T; L^q)
    double u_L2Q = 0.0;          // L^2(Q)
    double H_L2Q = 0.0;          // L^2(Q) of the cross-diffusion flux
    double lnsigma_L2V = 0.0;    // L^2(0,T; V)
    bool all_finite = false;
};
// Right-endpoint Riemann sums over a completed run history.
TheoremNormReport theorem_norm_report(const std::vector<DiagnosticsRecord>& history,
                                      const ModelParams& mp);

// Fit-and-freeze coercivity envelope E >= kappa (||phi||_V^2 + int|F|)
// + kappa_p ||sigma||_p^p - c_p (constants fitted once on admissible states).
struct CoercivityEnvelope {
    double kappa = 0.0, kappa_p = 0.0, c_p = 0.0;
    bool holds(double energy, double phi_V_sq, double F_L1, double sigma_p_int) const {
        return energy >= kappa * (phi_V_sq + F_L1) + kappa_p * sigma_p_int - c_p;
    }
};

std::string diagnostics_csv_header();
std::string diagnostics_csv_row(const DiagnosticsRecord& r);

} // namespace chb

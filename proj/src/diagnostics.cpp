#include "chb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace chb {

double total_energy(const ScalarField& phi, const ScalarField& sigma, const ModelParams& mp) {
    const GridSpec& g = phi.grid();
    if (!(sigma.grid() == g)) throw ConfigError("total_energy: grid mismatch");
    const PotentialParams prm = mp.potential();
    const SensitivityParams sens = mp.sensitivity();

    double e = 0.5 * norm_sq(gradient(phi));
    if (!mp.exact_log)
        e += 0.5 / mp.reg_n * norm_sq(laplacian_neumann(phi));

    double cellwise = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        cellwise += potential(phi[k], prm);
        cellwise += gamma_hat(sigma[k], sens) - mp.chi * sigma[k] * phi[k];
    }
    return e + cellwise * g.cell_volume();
}

double energy_inequality_residual(const DiagnosticsRecord& prev, const DiagnosticsRecord& curr,
                                  double dt, double source_pairing) {
    const double dissipation =
        curr.grad_mu_sq + curr.H_norm_sq + curr.eps_Du_sq + curr.u_sq;
    return (curr.energy - prev.energy) / dt + dissipation - source_pairing;
}

double energy_source_pairing(const ScalarField& phi_new, const ScalarField& mu_new,
                             const ScalarField& sigma_new, const ScalarField& h_field,
                             const ScalarField& b_eff_field, const ModelParams& mp,
                             double floor_eps) {
    const GridSpec& g = phi_new.grid();
    const SensitivityParams sens = mp.sensitivity();
    double acc = 0.0;
    for (std::size_t k = 0; k < phi_new.size(); ++k) {
        const double s = std::max(sigma_new[k], floor_eps);
        const double gam = std::log(s) + (std::pow(s, sens.p - 1.0) - 1.0) / (sens.p - 1.0);
        acc += b_eff_field[k] * (gam - mp.chi * phi_new[k]);
        acc += (h_field[k] - mp.ell * phi_new[k]) * mu_new[k];
    }
    return acc * g.cell_volume();
}

double entropy_identity_residual(const ScalarField& phi, const ScalarField& mu,
                                 const ScalarField& sigma, const ModelParams& mp) {
    const GridSpec& g = phi.grid();
    const PotentialParams prm = mp.potential();
    ScalarField fphi(g);
    for (std::size_t k = 0; k < phi.size(); ++k) fphi[k] = potential_f(phi[k], prm);

    const ScalarField lap = laplacian_neumann(phi);
    const FaceField gphi = gradient(phi);
    const double lhs = norm_sq(lap);
    const double rhs = -inner_product(gradient(fphi), gphi) +
                       inner_product(gphi, gradient(mu)) +
                       mp.chi * inner_product(gphi, gradient(sigma));
    return lhs - rhs;
}

TheoremExponents theorem_exponents(double p, double q) {
    if (!(p > 1.0 && p <= 2.0)) throw ConfigError("theorem_exponents: p must be in (1,2]");
    TheoremExponents e;
    e.P0 = std::min((18.0 * q - 6.0 * p) / (12.0 - 5.0 * p), 4.0);
    e.S = std::min(6.0 * p / (12.0 - 5.0 * p), p);
    e.R = std::max(4.0, p / (p - 1.0));
    return e;
}

TheoremNormReport theorem_norm_report(const std::vector<DiagnosticsRecord>& history,
                                      const ModelParams& mp) {
    TheoremNormReport rep;
    rep.exponents = theorem_exponents(mp.p, mp.q_monitor);
    if (history.empty()) return rep;

    double phi_P0_acc = 0.0, mu_acc = 0.0, sq2_acc = 0.0, u_acc = 0.0, H_acc = 0.0,
           ln_acc = 0.0;
    for (std::size_t k = 0; k < history.size(); ++k) {
        const DiagnosticsRecord& r = history[k];
        rep.phi_LinfV = std::max(rep.phi_LinfV, r.phi_V);
        rep.sigma_Linf_Lq = std::max(rep.sigma_Linf_Lq, r.sigma_Lq);
        rep.sigma_q2_LinfL2 = std::max(rep.sigma_q2_LinfL2, std::sqrt(r.sigma_q_integral));
        if (k == 0) continue;  // right-endpoint sums
        const double dt = r.dt;
        phi_P0_acc += dt * std::pow(r.phi_H2, rep.exponents.P0);
        mu_acc += dt * r.mu_V * r.mu_V;
        sq2_acc += dt * r.sigma_q2_V * r.sigma_q2_V;
        u_acc += dt * r.u_sq;
        H_acc += dt * r.H_norm_sq;
        ln_acc += dt * r.lnsigma_V * r.lnsigma_V;
    }
    rep.phi_LP0_H2 = std::pow(phi_P0_acc, 1.0 / rep.exponents.P0);
    rep.mu_L2V = std::sqrt(mu_acc);
    rep.sigma_q2_L2V = std::sqrt(sq2_acc);
    rep.u_L2Q = std::sqrt(u_acc);
    rep.H_L2Q = std::sqrt(H_acc);
    rep.lnsigma_L2V = std::sqrt(ln_acc);
    rep.all_finite = std::isfinite(rep.phi_LinfV) && std::isfinite(rep.phi_LP0_H2) &&
                     std::isfinite(rep.mu_L2V) && std::isfinite(rep.sigma_q2_L2V) &&
                     std::isfinite(rep.sigma_Linf_Lq) && std::isfinite(rep.u_L2Q) &&
                     std::isfinite(rep.H_L2Q) && std::isfinite(rep.lnsigma_L2V);
    return rep;
}

std::string diagnostics_csv_header() {
    return "step,t,dt,energy,mass_phi,mass_ode_ref,min_sigma,max_abs_phi,"
           "grad_mu_sq,H_norm_sq,u_sq,eps_Du_sq,energy_residual,source_pairing,"
           "phi_V,phi_H2,mu_V,sigma_Lq,sigma_q2_V,lnsigma_V,"
           "gamma_hat_integral,sigma_p_integral,grad_sigma_p2_sq,grad_ln_sigma_sq,"
           "ln_sigma_L1,sigma_q_integral,grad_sigma_q2_sq,newton_iters,ch_residual,"
           "P0,S,R";
}

std::string diagnostics_csv_row(const DiagnosticsRecord& r) {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%d,%.17g,"
                  "%.17g,%.17g,%.17g",
                  r.step, r.t, r.dt, r.energy, r.mass_phi, r.mass_ode_ref, r.min_sigma,
                  r.max_abs_phi, r.grad_mu_sq, r.H_norm_sq, r.u_sq, r.eps_Du_sq,
                  r.energy_residual, r.source_pairing, r.phi_V, r.phi_H2, r.mu_V,
                  r.sigma_Lq, r.sigma_q2_V, r.lnsigma_V, r.gamma_hat_integral,
                  r.sigma_p_integral, r.grad_sigma_p2_sq, r.grad_ln_sigma_sq,
                  r.ln_sigma_L1, r.sigma_q_integral, r.grad_sigma_q2_sq, r.newton_iters,
                  r.ch_residual, r.P0, r.S, r.R);
    return std::string(buf);
}

} // namespace chb

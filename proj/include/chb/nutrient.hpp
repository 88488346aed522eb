#pragma once

#include "chb/cahn_hilliard.hpp"
#include "chb/grid.hpp"
#include "chb/model.hpp"

namespace chb {

// UpwindByDrivingForce and HarmonicMean are the step rules. ChordEntropy is
// the mean alpha_f = (sigma_R - sigma_L)/(gamma_R - gamma_L); it realizes
// alpha * gamma' = 1 exactly at faces (with chi = 0 the entropy flux then
// equals grad sigma to machine precision) and vanishes when a neighbor
// touches sigma = 0, so it is what the flux diagnostics use.
enum class MobilityFaceRule { UpwindByDrivingForce, HarmonicMean, ChordEntropy };

struct NutrientStepParams {
    double dt = 1e-3;
    double sigma_floor = 0.0;  // positivity is structural; this absorbs solver dust
    MobilityFaceRule mobility_rule = MobilityFaceRule::UpwindByDrivingForce;
    AdvectionRule advection = AdvectionRule::Upwind;
    double cg_tol = 1e-12;
    int cg_max_iter = 5000;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("NutrientStepParams: dt must be > 0");
        if (sigma_floor < 0.0) throw ConfigError("NutrientStepParams: sigma_floor must be >= 0");
    }
};

// Entropy-form cross-diffusion flux alpha_face * grad(gamma(sigma) - chi*phi).
// Faces with alpha_face = 0 contribute exactly zero (degenerate limit).
FaceField cross_flux(const ScalarField& sigma, const ScalarField& phi,
                     const SensitivityParams& sp, MobilityFaceRule rule);

// ||alpha_face^(1/2) grad(gamma(sigma) - chi phi)||^2, the squared norm of
// the mixed dissipation flux H.
double cross_H_norm_sq(const ScalarField& sigma, const ScalarField& phi,
                       const SensitivityParams& sp, MobilityFaceRule rule);

struct SigmaStepResult {
    ScalarField sigma;
    int cg_iters = 0;
    int clamped_cells = 0;
    double max_clamp = 0.0;  // largest negative excursion absorbed by the floor
};

// One nutrient step: implicit linear diffusion and implicit-linearized decay
// (b = b_plus - sigma * b_minus), explicit upwinded advection and explicit
// upwinded cross-diffusion. The implicit operator is an M-matrix, so the
// output is nonnegative whenever the explicit right-hand side is; the CFL
// guards below make that structural. Throws StepError on guard violation.
SigmaStepResult sigma_step(const ScalarField& sigma, const ScalarField& phi,
                           const FaceField& u, const SourceSpec& src,
                           const ModelParams& mp, const NutrientStepParams& sp,
                           const ScalarField* extra_source = nullptr);

// The mandatory explicit cross-diffusion guard dt <= h^2/(4 chi max|grad phi| max alpha').
double cross_diffusion_dt_bound(const ScalarField& phi, const ModelParams& mp);

struct EntropyReport {
    double gamma_hat_integral = 0.0;  // int gamma_hat(sigma)
    double sigma_p_integral = 0.0;    // int sigma^p
    double grad_sigma_p2_sq = 0.0;    // ||grad sigma^(p/2)||^2
    double grad_ln_sigma_sq = 0.0;    // ||grad ln(sigma + floor)||^2
    double ln_sigma_L1 = 0.0;         // int |ln sigma| over sigma > 0
    double sigma_q_integral = 0.0;    // int sigma^q
    double grad_sigma_q2_sq = 0.0;    // ||grad sigma^(q/2)||^2
};

// The quantities controlled by the entropy estimates, for a configured q.
// floor_eps enters only inside logarithms (reporting, never dynamics).
EntropyReport entropy_pair_report(const ScalarField& sigma, const SensitivityParams& sp,
                                  double q, double floor_eps = 1e-300);

} // namespace chb

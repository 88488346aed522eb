#pragma once

#include <vector>

#include "chb/grid.hpp"
#include "chb/model.hpp"

namespace chb {

enum class AdvectionRule { Upwind, Centered };

struct CHStepParams {
    double dt = 1e-3;
    double newton_tol = 1e-10;       // on the unscaled residual inf-norm
    int newton_max_iter = 50;
    double krylov_tol = 1e-10;
    int krylov_max_iter = 2000;
    AdvectionRule advection = AdvectionRule::Upwind;
    bool log_residuals = false;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("CHStepParams: dt must be > 0");
        if (!(newton_tol > 0.0) || !(krylov_tol > 0.0))
            throw ConfigError("CHStepParams: tolerances must be > 0");
    }
};

struct CHStepResult {
    ScalarField phi;
    ScalarField mu;
    int newton_iters = 0;
    double residual = 0.0;  // final inf-norm residual (the convergence target)
    // 2-norm line-search merit per Newton iterate; strictly decreasing after
    // the first damped step by construction
    std::vector<double> residual_history;
    double mean_h = 0.0;  // spatial mean of h(sigma, phi) used by the step
};

// One implicit step of the Cahn-Hilliard-Oono pair with convex-concave
// splitting: the monotone part of f, the Laplacians and the ell-term are
// implicit; -lambda*phi, chi*sigma, advection and h are explicit. Advection
// is a conservative face flux, so the discrete mean obeys the mass ODE
// exactly. Throws StepError on CFL or Newton failure (caller may halve dt).
CHStepResult ch_step(const ScalarField& phi, const ScalarField& sigma, const FaceField& u,
                     const SourceSpec& src, const ModelParams& mp, const CHStepParams& sp,
                     const ScalarField* extra_source = nullptr);

// Chemical potential of a state: mu = (1/n) lap^2 phi - lap phi + f(phi) - chi sigma.
ScalarField chemical_potential(const ScalarField& phi, const ScalarField& sigma,
                               const ModelParams& mp);

// Scalar reference m' + ell m = hbar(t), discretized exactly like the PDE
// mean (implicit ell, explicit hbar). Returns m at t = 0, dt, 2 dt, ...
std::vector<double> mass_ode_reference(double m0, double ell,
                                       const std::vector<double>& hbar, double dt);

// delta with [-1+delta, 1-delta] containing the mean trajectory:
// delta = 1 - max(|m0|, H/ell). Requires H/ell < 1 and |m0| < 1.
double mean_bound_delta(double m0, double ell, double H);

} // namespace chb

#pragma once

#include <vector>

#include "chb/grid.hpp"

namespace chb {

struct FlowSolveParams {
    double epsilon = 0.0;
    double krylov_tol = 1e-10;
    int krylov_max_iter = 500;
    int momentum_max_iter = 5000;
    // The momentum balance is solved with the pressure gradient on the
    // right-hand side (u = grad(pi) + force in the Darcy limit); this flag
    // flips the reported pi for comparison with the usual Stokes convention.
    bool flip_pressure_sign = false;

    void validate() const {
        if (epsilon < 0.0) throw ConfigError("FlowSolveParams: epsilon must be >= 0");
        if (!(krylov_tol > 0.0)) throw ConfigError("FlowSolveParams: krylov_tol must be > 0");
    }
};

struct FlowResult {
    FaceField u;
    ScalarField pi;
    int outer_iters = 0;
    double rel_residual = 0.0;
    double div_u_inf = 0.0;
};

// Face-centered Korteweg force mu*grad(phi) - chi*phi*grad(sigma) with
// arithmetic face averaging of the scalars; boundary-normal components zero.
FaceField korteweg_force(const ScalarField& phi, const ScalarField& mu,
                         const ScalarField& sigma, double chi);

// Darcy limit: -lap(pi) = div(force) with dn(pi) = 0, pi zero-mean, then
// u = grad(pi) + force. Requires zero boundary-normal force (Neumann
// compatibility); throws InvariantViolation when the rhs mean exceeds 1e-12.
FlowResult darcy_solve(const FaceField& force, const FlowSolveParams& params);

// Brinkman saddle system -eps div(D u) + u - grad(pi) = force, div u = 0,
// free-slip walls; Schur-complement CG on the pressure with an inner
// momentum CG. epsilon must be > 0 (use darcy_solve for the limit).
FlowResult brinkman_solve(const FaceField& force, const FlowSolveParams& params);

// ||D u||^2 with the strain evaluated at cell centers (diagonal part) and
// nodes (shear part, zero on walls by the slip condition).
double strain_rate_norm_sq(const FaceField& u);

// Relative defect of the discrete energy identity
// eps ||Du||^2 + ||u||^2 = <force, u>.
double flow_energy_identity_gap(const FaceField& u, const FaceField& force, double epsilon);

// MAC velocity from stream-function samples at the (nx+1) x (ny+1) nodes:
// u = (dpsi/dy, -dpsi/dx). Exactly divergence-free; psi must be constant
// along each wall so that u.n = 0 (checked).
FaceField velocity_from_stream(const GridSpec& g, const std::vector<double>& psi_nodes);

} // namespace chb

#pragma once

#include "chb/flow.hpp"
#include "chb/grid.hpp"
#include "chb/model.hpp"

namespace chb {

// Smooth manufactured solution on [0,lx]x[0,ly] compatible with all
// boundary conditions: cosine modes for the scalars (Neumann, and
// dn(lap phi)=0), a sin^2 stream function for the velocity (u.n = 0).
//   phi   = m_phi + a_phi cos(pi x/lx) cos(pi y/ly) exp(-t)
//   sigma = m_sigma + a_sigma cos(pi x/lx) cos(pi y/ly) exp(-t)
//   psi   = u0 sin^2(pi x/lx) sin^2(pi y/ly)
// The extra sources make (phi, sigma) solve the continuum system with
// h = b = 0 and the prescribed velocity.
struct ManufacturedSolution {
    double m_phi = 0.0, a_phi = 0.2;
    double m_sigma = 1.0, a_sigma = 0.3;
    double u0 = 0.0;
    double lx = 1.0, ly = 1.0;
    ModelParams mp;

    double phi(double x, double y, double t) const;
    double sigma(double x, double y, double t) const;

    // Cell-sampled exact states.
    ScalarField phi_field(const GridSpec& g, double t) const;
    ScalarField sigma_field(const GridSpec& g, double t) const;
    // Discretely divergence-free velocity from node-sampled psi.
    FaceField velocity_field(const GridSpec& g) const;

    // Cell-sampled analytic residual sources at time t.
    ScalarField source_phi(const GridSpec& g, double t) const;
    ScalarField source_sigma(const GridSpec& g, double t) const;
};

} // namespace chb

#include "chb/mms.hpp"

#include <cmath>

namespace chb {

double ManufacturedSolution::phi(double x, double y, double t) const {
    return m_phi + a_phi * std::cos(M_PI * x / lx) * std::cos(M_PI * y / ly) * std::exp(-t);
}

double ManufacturedSolution::sigma(double x, double y, double t) const {
    return m_sigma + a_sigma * std::cos(M_PI * x / lx) * std::cos(M_PI * y / ly) * std::exp(-t);
}

ScalarField ManufacturedSolution::phi_field(const GridSpec& g, double t) const {
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f(i, j) = phi(g.xc(i), g.yc(j), t);
    return f;
}

ScalarField ManufacturedSolution::sigma_field(const GridSpec& g, double t) const {
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f(i, j) = sigma(g.xc(i), g.yc(j), t);
    return f;
}

FaceField ManufacturedSolution::velocity_field(const GridSpec& g) const {
    std::vector<double> psi((std::size_t)(g.nx + 1) * (g.ny + 1));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            const double sx = std::sin(M_PI * i * g.hx / lx);
            const double sy = std::sin(M_PI * j * g.hy / ly);
            psi[(std::size_t)j * (g.nx + 1) + i] = u0 * sx * sx * sy * sy;
        }
    return velocity_from_stream(g, psi);
}

ScalarField ManufacturedSolution::source_phi(const GridSpec& g, double t) const {
    const double kx = M_PI / lx, ky = M_PI / ly;
    const double k2 = kx * kx + ky * ky;
    const double T = std::exp(-t);
    const PotentialParams prm = mp.potential();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.xc(i), y = g.yc(j);
            const double cx = std::cos(kx * x), cy = std::cos(ky * y);
            const double sx = std::sin(kx * x), sy = std::sin(ky * y);
            const double w = cx * cy * T;
            const double wx = -kx * sx * cy * T, wy = -ky * cx * sy * T;

            const double ph = m_phi + a_phi * w;
            const double phx = a_phi * wx, phy = a_phi * wy;
            const double lap_phi = -a_phi * k2 * w;
            const double bilap_phi = a_phi * k2 * k2 * w;
            const double phi_t = -a_phi * w;

            const double lap_sigma = -a_sigma * k2 * w;

            // velocity from psi = u0 sin^2 sin^2
            const double ux = u0 * sx * sx * 2.0 * sy * std::cos(ky * y) * ky;
            const double uy = -u0 * 2.0 * sx * std::cos(kx * x) * kx * sy * sy;

            // lap beta(phi) = beta'(phi) lap phi + beta''(phi) |grad phi|^2
            const double bp = monotone_part_prime(ph, prm);
            double bpp;
            if (prm.exact) {
                bpp = -1.0 / ((1.0 + ph) * (1.0 + ph)) + 1.0 / ((1.0 - ph) * (1.0 - ph));
            } else {
                // centered difference of beta_n' (smooth away from |s|=1)
                const double d = 1e-6;
                bpp = (monotone_part_prime(ph + d, prm) - monotone_part_prime(ph - d, prm)) /
                      (2.0 * d);
            }
            const double grad_phi_sq = phx * phx + phy * phy;
            const double lap_beta = bp * lap_phi + bpp * grad_phi_sq;

            double lap_mu = -bilap_phi + lap_beta - mp.lambda * lap_phi - mp.chi * lap_sigma;
            if (!mp.exact_log) {
                // mu gains (1/n) lap^2 phi, so lap mu gains (1/n) lap^3 phi
                lap_mu += (1.0 / mp.reg_n) * (-a_phi * k2 * k2 * k2 * w);
            }

            out(i, j) = phi_t + (ux * phx + uy * phy) - lap_mu + mp.ell * ph;
        }
    }
    return out;
}

ScalarField ManufacturedSolution::source_sigma(const GridSpec& g, double t) const {
    const double kx = M_PI / lx, ky = M_PI / ly;
    const double k2 = kx * kx + ky * ky;
    const double T = std::exp(-t);
    const SensitivityParams sens = mp.sensitivity();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.xc(i), y = g.yc(j);
            const double cx = std::cos(kx * x), cy = std::cos(ky * y);
            const double sx = std::sin(kx * x), sy = std::sin(ky * y);
            const double w = cx * cy * T;
            const double wx = -kx * sx * cy * T, wy = -ky * cx * sy * T;

            const double sg = m_sigma + a_sigma * w;
            const double sgx = a_sigma * wx, sgy = a_sigma * wy;
            const double lap_sigma = -a_sigma * k2 * w;
            const double sigma_t = -a_sigma * w;

            const double phx = a_phi * wx, phy = a_phi * wy;
            const double lap_phi = -a_phi * k2 * w;

            const double ux = u0 * sx * sx * 2.0 * sy * std::cos(ky * y) * ky;
            const double uy = -u0 * 2.0 * sx * std::cos(kx * x) * kx * sy * sy;

            // div(alpha(sigma) grad phi) = alpha'(sigma) grad sigma . grad phi
            //                              + alpha(sigma) lap phi
            const double cross = alpha_prime(sg, sens) * (sgx * phx + sgy * phy) +
                                 alpha(sg, sens) * lap_phi;

            out(i, j) = sigma_t + (ux * sgx + uy * sgy) - lap_sigma + mp.chi * cross;
        }
    }
    return out;
}

} // namespace chb

#include "chb/nutrient.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chb/kernels.hpp"
#include "chb/linsolve.hpp"
#include "chb/transforms.hpp"

namespace chb {

namespace {

struct FaceSides {
    double sigma_hi, sigma_lo;  // "hi" is the donor side for the upwind rule
    double alpha_hi, alpha_lo;
    double gamma_hi, gamma_lo;
};

inline double face_mobility(const FaceSides& f, double drive, MobilityFaceRule rule,
                            const SensitivityParams& sp) {
    switch (rule) {
        case MobilityFaceRule::HarmonicMean: {
            const double s = f.alpha_hi + f.alpha_lo;
            return s > 0.0 ? 2.0 * f.alpha_hi * f.alpha_lo / s : 0.0;
        }
        case MobilityFaceRule::ChordEntropy: {
            if (f.sigma_hi == f.sigma_lo) return f.alpha_hi == f.alpha_lo ? f.alpha_hi : 0.0;
            if (f.sigma_hi == 0.0 || f.sigma_lo == 0.0) return 0.0;  // gamma -> -inf side
            const double dsig = f.sigma_hi - f.sigma_lo;
            const double dgam = f.gamma_hi - f.gamma_lo;
            const double mid = 0.5 * (f.sigma_hi + f.sigma_lo);
            if (std::fabs(dsig) <= 1e-9 * mid) return alpha(mid, sp);
            return dsig / dgam;
        }
        case MobilityFaceRule::UpwindByDrivingForce:
        default:
            if (drive > 0.0) return f.alpha_hi;
            if (drive < 0.0) return f.alpha_lo;
            return 0.5 * (f.alpha_hi + f.alpha_lo);
    }
}

} // namespace

namespace {

struct EntropyCells {
    ScalarField alpha_c, gamma_c, w;  // w = gamma(sigma) - chi phi
};

EntropyCells entropy_cells(const ScalarField& sigma, const ScalarField& phi,
                           const SensitivityParams& sp, const char* who) {
    const GridSpec& g = sigma.grid();
    if (!(phi.grid() == g)) throw ConfigError(std::string(who) + ": grid mismatch");
    EntropyCells ec{ScalarField(g), ScalarField(g), ScalarField(g)};
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        const double s = sigma[k];
        if (s < 0.0) throw DomainError(std::string(who) + ": sigma must be >= 0");
        ec.alpha_c[k] = alpha(s, sp);
        // log floored at 1e-300: faces where this matters carry alpha_f = 0
        const double spos = std::max(s, 1e-300);
        ec.gamma_c[k] = std::log(spos) + (std::pow(spos, sp.p - 1.0) - 1.0) / (sp.p - 1.0);
        ec.w[k] = ec.gamma_c[k] - sp.chi * phi[k];
    }
    return ec;
}

} // namespace

FaceField cross_flux(const ScalarField& sigma, const ScalarField& phi,
                     const SensitivityParams& sp, MobilityFaceRule rule) {
    sp.validate();
    const GridSpec& g = sigma.grid();
    const EntropyCells ec = entropy_cells(sigma, phi, sp, "cross_flux");

    FaceField out(g);
    // The sigma flux leaves the cell with the larger w, so the donor for the
    // upwind rule is the high-w side.
    auto face = [&](int ihi, int jhi, int ilo, int jlo, double h) {
        const double d = (ec.w(ihi, jhi) - ec.w(ilo, jlo)) / h;
        const FaceSides fs{sigma(ihi, jhi), sigma(ilo, jlo),
                           ec.alpha_c(ihi, jhi), ec.alpha_c(ilo, jlo),
                           ec.gamma_c(ihi, jhi), ec.gamma_c(ilo, jlo)};
        const double af = face_mobility(fs, d, rule, sp);
        return af == 0.0 ? 0.0 : af * d;
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) out.x(i, j) = face(i, j, i - 1, j, g.hx);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) out.y(i, j) = face(i, j, i, j - 1, g.hy);
    return out;
}

double cross_H_norm_sq(const ScalarField& sigma, const ScalarField& phi,
                       const SensitivityParams& sp, MobilityFaceRule rule) {
    const GridSpec& g = sigma.grid();
    const EntropyCells ec = entropy_cells(sigma, phi, sp, "cross_H_norm_sq");
    double acc = 0.0;
    auto face = [&](int ihi, int jhi, int ilo, int jlo, double h) {
        const double d = (ec.w(ihi, jhi) - ec.w(ilo, jlo)) / h;
        const FaceSides fs{sigma(ihi, jhi), sigma(ilo, jlo),
                           ec.alpha_c(ihi, jhi), ec.alpha_c(ilo, jlo),
                           ec.gamma_c(ihi, jhi), ec.gamma_c(ilo, jlo)};
        const double af = face_mobility(fs, d, rule, sp);
        return af > 0.0 ? af * d * d : 0.0;
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) acc += face(i, j, i - 1, j, g.hx);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) acc += face(i, j, i, j - 1, g.hy);
    return acc * g.cell_volume();
}

double cross_diffusion_dt_bound(const ScalarField& phi, const ModelParams& mp) {
    if (mp.chi == 0.0) return std::numeric_limits<double>::infinity();
    const double grad_max = max_abs(gradient(phi));
    if (grad_max == 0.0) return std::numeric_limits<double>::infinity();
    const double h = std::min(phi.grid().hx, phi.grid().hy);
    const double ap_max = alpha_prime_max(mp.sensitivity());
    return h * h / (4.0 * mp.chi * grad_max * ap_max);
}

SigmaStepResult sigma_step(const ScalarField& sigma, const ScalarField& phi,
                           const FaceField& u, const SourceSpec& src,
                           const ModelParams& mp, const NutrientStepParams& sp,
                           const ScalarField* extra_source) {
    sp.validate();
    mp.validate();
    const GridSpec& g = sigma.grid();
    if (!(phi.grid() == g) || !(u.grid() == g))
        throw ConfigError("sigma_step: fields live on different grids");
    const std::size_t n = sigma.size();
    const double dt = sp.dt;
    const SensitivityParams sens = mp.sensitivity();

    if (min_value(sigma) < 0.0)
        throw DomainError("sigma_step: input sigma has negative cells");

    // Guards: explicit cross-diffusion and explicit advection.
    const double dt_cross = cross_diffusion_dt_bound(phi, mp);
    if (dt > dt_cross) {
        std::ostringstream ss;
        ss << "sigma_step: dt=" << dt << " violates cross-diffusion bound " << dt_cross;
        throw StepError(ss.str());
    }
    const double umax = max_abs(u);
    if (umax > 0.0) {
        const double dt_adv = 0.5 * std::min(g.hx, g.hy) / umax;
        if (dt > dt_adv) {
            std::ostringstream ss;
            ss << "sigma_step: dt=" << dt << " violates advective CFL bound " << dt_adv;
            throw StepError(ss.str());
        }
    }

    // Explicit fluxes: upwinded advection and the chemotactic drift
    // G = chi * alpha_face(sigma^n) * grad(phi). G_f > 0 drains the left
    // cell, so the donor sits on the low side of increasing phi.
    FaceField flux(g);
    kernels::advect_flux(sigma.data(), u.xdata(), u.ydata(), g.nx, g.ny,
                         sp.advection == AdvectionRule::Centered,
                         flux.xdata(), flux.ydata());
    if (sp.mobility_rule == MobilityFaceRule::ChordEntropy)
        throw ConfigError("sigma_step: the chord mean is a diagnostic rule; the step "
                          "takes upwind or harmonic mobilities");
    if (mp.chi > 0.0) {
        ScalarField alpha_c(g);
        for (std::size_t k = 0; k < n; ++k) alpha_c[k] = alpha(sigma[k], sens);
        const bool harmonic = sp.mobility_rule == MobilityFaceRule::HarmonicMean;
        // G_f = chi alpha_f dphi; G_f > 0 drains the low-phi cell, which is
        // therefore the donor.
        auto mobility = [&](double a_donor, double a_other) {
            return harmonic ? (a_donor + a_other > 0.0
                                   ? 2.0 * a_donor * a_other / (a_donor + a_other) : 0.0)
                            : a_donor;
        };
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i) {
                const double d = (phi(i, j) - phi(i - 1, j)) / g.hx;
                const double af = d > 0.0 ? mobility(alpha_c(i - 1, j), alpha_c(i, j))
                                : d < 0.0 ? mobility(alpha_c(i, j), alpha_c(i - 1, j))
                                : 0.5 * (alpha_c(i - 1, j) + alpha_c(i, j));
                flux.x(i, j) += mp.chi * af * d;
            }
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double d = (phi(i, j) - phi(i, j - 1)) / g.hy;
                const double af = d > 0.0 ? mobility(alpha_c(i, j - 1), alpha_c(i, j))
                                : d < 0.0 ? mobility(alpha_c(i, j), alpha_c(i, j - 1))
                                : 0.5 * (alpha_c(i, j - 1) + alpha_c(i, j));
                flux.y(i, j) += mp.chi * af * d;
            }
    }

    // rhs = sigma^n/dt - div(flux) + b_plus; decay enters the diagonal.
    std::vector<double> rhs(n), diag(n);
    kernels::divergence(flux.xdata(), flux.ydata(), g.nx, g.ny, g.hx, g.hy, rhs.data());
    double diag_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double bp = src.b_plus(sigma[k], phi[k]);
        const double bm = src.b_minus(sigma[k], phi[k]);
        if (bp < 0.0 || bm < 0.0)
            throw InvariantViolation("sigma_step: source split must satisfy b_plus, b_minus >= 0");
        rhs[k] = sigma[k] / dt - rhs[k] + bp;
        diag[k] = 1.0 / dt + bm;
        diag_sum += diag[k];
    }
    if (extra_source)
        for (std::size_t k = 0; k < n; ++k) rhs[k] += extra_source->data()[k];

    // The M-matrix argument needs a nonnegative explicit right-hand side.
    // The guards above imply it up to roundoff; a real violation is a CFL
    // failure the caller can cure by halving dt.
    double rhs_min = kernels::min_value(rhs.data(), n);
    const double rhs_scale = kernels::max_abs(rhs.data(), n);
    if (rhs_min < -1e-10 * std::max(1.0, rhs_scale)) {
        std::ostringstream ss;
        ss << "sigma_step: explicit right-hand side dips to " << rhs_min
           << "; effective CFL violated";
        throw StepError(ss.str());
    }

    // (diag - lap) sigma^+ = rhs, SPD with positive inverse.
    std::vector<double> lap(n);
    LinOp A = [&](const std::vector<double>& v, std::vector<double>& out) {
        out.resize(n);
        kernels::laplacian(v.data(), g.nx, g.ny, g.hx, g.hy, lap.data());
        for (std::size_t k = 0; k < n; ++k) out[k] = diag[k] * v[k] - lap[k];
    };
    auto transform = get_transform(g.ny, g.nx, TransformKind::NeumannCells,
                                   TransformKind::NeumannCells);
    std::vector<double> eig(n);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            eig[(std::size_t)j * g.nx + i] =
                Transform2D::eigenvalue(TransformKind::NeumannCells, i, g.nx, g.hx) +
                Transform2D::eigenvalue(TransformKind::NeumannCells, j, g.ny, g.hy);
    const double dbar = diag_sum / (double)n;
    std::vector<double> hat(n);
    LinOp M = [&](const std::vector<double>& r, std::vector<double>& z) {
        transform->forward(r.data(), hat.data());
        for (std::size_t k = 0; k < n; ++k) hat[k] /= dbar + eig[k];
        z.resize(n);
        transform->inverse(hat.data(), z.data());
    };

    std::vector<double> out;
    KrylovResult kr = pcg(A, rhs, out, &M, sp.cg_tol, sp.cg_max_iter);
    if (!kr.converged)
        throw SolverError("sigma_step: diffusion solve did not converge", kr.rel_residual,
                          kr.iters);

    SigmaStepResult result;
    result.cg_iters = kr.iters;
    result.sigma = ScalarField(g);

    // The exact solution of the linear system is nonnegative; the floor only
    // absorbs Krylov dust. Anything beyond dust means the structure broke.
    const double dust_budget = 1e-9 * std::max(1.0, kernels::max_abs(out.data(), n));
    for (std::size_t k = 0; k < n; ++k) {
        double v = out[k];
        if (v < sp.sigma_floor) {
            const double deficit = sp.sigma_floor - v;
            if (v < -dust_budget) {
                std::ostringstream ss;
                ss << "sigma_step: output cell " << k << " = " << v
                   << " negative beyond solver dust";
                throw InvariantViolation(ss.str());
            }
            result.clamped_cells += 1;
            result.max_clamp = std::max(result.max_clamp, deficit);
            v = sp.sigma_floor;
        }
        result.sigma[k] = v;
    }
    return result;
}

EntropyReport entropy_pair_report(const ScalarField& sigma, const SensitivityParams& sp,
                                  double q, double floor_eps) {
    sp.validate();
    const GridSpec& g = sigma.grid();
    const std::size_t n = sigma.size();
    ScalarField sp2(g), sq2(g), lns(g);
    EntropyReport rep;
    double ghat = 0.0, sig_p = 0.0, sig_q = 0.0, lnl1 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double s = sigma[k];
        if (s < 0.0) throw DomainError("entropy_pair_report: sigma must be >= 0");
        ghat += gamma_hat(s, sp);
        sig_p += std::pow(s, sp.p);
        sig_q += std::pow(s, q);
        sp2[k] = std::pow(s, 0.5 * sp.p);
        sq2[k] = std::pow(s, 0.5 * q);
        lns[k] = std::log(s + floor_eps);
        if (s > 0.0) lnl1 += std::fabs(std::log(s));
    }
    const double vol = g.cell_volume();
    rep.gamma_hat_integral = ghat * vol;
    rep.sigma_p_integral = sig_p * vol;
    rep.sigma_q_integral = sig_q * vol;
    rep.ln_sigma_L1 = lnl1 * vol;
    rep.grad_sigma_p2_sq = norm_sq(gradient(sp2));
    rep.grad_sigma_q2_sq = norm_sq(gradient(sq2));
    rep.grad_ln_sigma_sq = norm_sq(gradient(lns));
    return rep;
}

} // namespace chb

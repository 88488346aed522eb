#include "chb/cahn_hilliard.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "chb/kernels.hpp"
#include "chb/linsolve.hpp"
#include "chb/transforms.hpp"

namespace chb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Evaluates the monotone part beta~ cellwise; +inf marker on domain escape
// so the line search can back off instead of aborting.
bool eval_monotone(const std::vector<double>& phi, const PotentialParams& prm,
                   std::vector<double>& out) {
    const std::size_t n = phi.size();
    out.resize(n);
    if (prm.exact) {
        for (std::size_t k = 0; k < n; ++k) {
            const double r = phi[k];
            if (!(r > -1.0 && r < 1.0)) return false;
            out[k] = std::log1p(r) - std::log1p(-r);
        }
        return true;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double s = phi[k];
        const double y = yosida_beta(s, prm.n);
        double j = 0.0;
        if (s > 1.0 || s < -1.0) {
            try {
                j = penalty_j(s, prm.n, prm.q0, prm.penalty_exponent_factor);
            } catch (const DomainError&) {
                return false;
            }
        }
        out[k] = y + j;
        if (!std::isfinite(out[k])) return false;
    }
    return true;
}

void eval_monotone_prime(const std::vector<double>& phi, const PotentialParams& prm,
                         std::vector<double>& out) {
    const std::size_t n = phi.size();
    out.resize(n);
    if (prm.exact) {
        for (std::size_t k = 0; k < n; ++k) {
            const double r = phi[k];
            out[k] = 1.0 / (1.0 + r) + 1.0 / (1.0 - r);
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            out[k] = yosida_beta_prime(phi[k], prm.n) +
                     penalty_j_prime(phi[k], prm.n, prm.q0, prm.penalty_exponent_factor);
        }
    }
}

struct CHNewtonContext {
    const GridSpec* g;
    double c;       // 1/dt + ell
    double kappa;   // 1/n in regularized mode, else 0
    std::vector<double> diag;  // beta~'(phi_k), frozen per Newton iteration
    std::vector<double> lap1, lap2, w;

    // J v = c v + L (kappa L^2 v + L v + diag .* v), with L = -lap.
    void apply(const std::vector<double>& v, std::vector<double>& out) {
        const int nx = g->nx, ny = g->ny;
        const std::size_t n = v.size();
        lap1.resize(n); lap2.resize(n); w.resize(n);
        kernels::laplacian(v.data(), nx, ny, g->hx, g->hy, lap1.data());
        if (kappa > 0.0) {
            kernels::laplacian(lap1.data(), nx, ny, g->hx, g->hy, lap2.data());
            for (std::size_t k = 0; k < n; ++k)
                w[k] = kappa * lap2[k] - lap1[k] + diag[k] * v[k];
        } else {
            for (std::size_t k = 0; k < n; ++k) w[k] = -lap1[k] + diag[k] * v[k];
        }
        kernels::laplacian(w.data(), nx, ny, g->hx, g->hy, out.data());
        for (std::size_t k = 0; k < n; ++k) out[k] = c * v[k] - out[k];
    }
};

// Constant-coefficient inverse in cosine space used as the Krylov
// preconditioner: c + l (kappa l^2 + l + dbar).
struct CosinePrecond {
    std::shared_ptr<const Transform2D> t;
    std::vector<double> eig;
    mutable std::vector<double> hat;
    int nx, ny;

    CosinePrecond(const GridSpec& g)
        : t(get_transform(g.ny, g.nx, TransformKind::NeumannCells, TransformKind::NeumannCells)),
          eig((std::size_t)g.nx * g.ny), hat(eig.size()), nx(g.nx), ny(g.ny) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                eig[(std::size_t)j * nx + i] =
                    Transform2D::eigenvalue(TransformKind::NeumannCells, i, nx, g.hx) +
                    Transform2D::eigenvalue(TransformKind::NeumannCells, j, ny, g.hy);
    }

    void apply(const std::vector<double>& r, std::vector<double>& z,
               double c, double kappa, double dbar) const {
        t->forward(r.data(), hat.data());
        for (std::size_t k = 0; k < hat.size(); ++k) {
            const double l = eig[k];
            hat[k] /= c + l * (kappa * l * l + l + dbar);
        }
        z.resize(r.size());
        t->inverse(hat.data(), z.data());
    }
};

} // namespace

ScalarField chemical_potential(const ScalarField& phi, const ScalarField& sigma,
                               const ModelParams& mp) {
    const PotentialParams prm = mp.potential();
    ScalarField lap = laplacian_neumann(phi);
    ScalarField mu(phi.grid());
    if (!mp.exact_log) {
        ScalarField lap2 = laplacian_neumann(lap);
        const double kappa = 1.0 / mp.reg_n;
        for (std::size_t k = 0; k < mu.size(); ++k)
            mu[k] = kappa * lap2[k] - lap[k] + potential_f(phi[k], prm) - mp.chi * sigma[k];
    } else {
        for (std::size_t k = 0; k < mu.size(); ++k)
            mu[k] = -lap[k] + potential_f(phi[k], prm) - mp.chi * sigma[k];
    }
    return mu;
}

CHStepResult ch_step(const ScalarField& phi, const ScalarField& sigma, const FaceField& u,
                     const SourceSpec& src, const ModelParams& mp, const CHStepParams& sp,
                     const ScalarField* extra_source) {
    sp.validate();
    mp.validate();
    const GridSpec& g = phi.grid();
    if (!(sigma.grid() == g) || !(u.grid() == g))
        throw ConfigError("ch_step: fields live on different grids");
    const PotentialParams prm = mp.potential();
    const std::size_t n = phi.size();
    const double dt = sp.dt;

    if (prm.exact) {
        const double mx = max_abs(phi);
        if (mx >= 1.0)
            throw DomainError("ch_step: |phi| >= 1 somewhere; exact-log mode needs F(phi_0) finite");
    }

    // Advective CFL guard (explicit upwind transport).
    const double umax = max_abs(u);
    if (umax > 0.0) {
        const double dt_cfl = 0.5 * std::min(g.hx, g.hy) / umax;
        if (dt > dt_cfl) {
            std::ostringstream ss;
            ss << "ch_step: dt=" << dt << " violates advective CFL bound " << dt_cfl;
            throw StepError(ss.str());
        }
    }

    // Explicit part: rhs = phi^n/dt - div(phi_up u) + h + S + lap(g_expl),
    // g_expl = -lambda phi^n - chi sigma^n (the concave/coupling split).
    std::vector<double> rhs(n), work(n), gex(n);
    {
        FaceField flux(g);
        kernels::advect_flux(phi.data(), u.xdata(), u.ydata(), g.nx, g.ny,
                             sp.advection == AdvectionRule::Centered,
                             flux.xdata(), flux.ydata());
        kernels::divergence(flux.xdata(), flux.ydata(), g.nx, g.ny, g.hx, g.hy, rhs.data());
    }
    double h_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double h = src.h(sigma[k], phi[k]);
        h_sum += h;
        rhs[k] = phi[k] / dt - rhs[k] + h;
        gex[k] = -mp.lambda * phi[k] - mp.chi * sigma[k];
    }
    if (extra_source)
        for (std::size_t k = 0; k < n; ++k) rhs[k] += extra_source->data()[k];
    kernels::laplacian(gex.data(), g.nx, g.ny, g.hx, g.hy, work.data());
    for (std::size_t k = 0; k < n; ++k) rhs[k] += work[k];

    CHNewtonContext ctx;
    ctx.g = &g;
    ctx.c = 1.0 / dt + mp.ell;
    ctx.kappa = prm.exact ? 0.0 : 1.0 / prm.n;

    // res(phi) = c phi - lap(kappa lap^2 phi - lap phi + beta~(phi)) - rhs
    std::vector<double> beta_vals(n), mu_impl(n), res(n), lap1(n), lap2(n);
    // Attainable residual floor: eps amplified by the Laplacian stencil
    // acting on mu's own roundoff, (4/hx^2 + 4/hy^2) * eps * ||mu||.
    const double lap_amp = 4.0 / (g.hx * g.hx) + 4.0 / (g.hy * g.hy);
    double res_scale = 0.0;
    double res_two = 0.0;  // 2-norm, the line-search merit
    auto residual = [&](const std::vector<double>& ph, std::vector<double>& out) -> double {
        if (!eval_monotone(ph, prm, beta_vals)) {
            res_two = kInf;
            return kInf;
        }
        kernels::laplacian(ph.data(), g.nx, g.ny, g.hx, g.hy, lap1.data());
        if (ctx.kappa > 0.0) {
            kernels::laplacian(lap1.data(), g.nx, g.ny, g.hx, g.hy, lap2.data());
            for (std::size_t k = 0; k < n; ++k)
                mu_impl[k] = ctx.kappa * lap2[k] - lap1[k] + beta_vals[k];
        } else {
            for (std::size_t k = 0; k < n; ++k) mu_impl[k] = -lap1[k] + beta_vals[k];
        }
        const double mu_scale = kernels::max_abs(mu_impl.data(), n);
        kernels::laplacian(mu_impl.data(), g.nx, g.ny, g.hx, g.hy, out.data());
        for (std::size_t k = 0; k < n; ++k) out[k] = ctx.c * ph[k] - out[k] - rhs[k];
        res_scale = ctx.c * kernels::max_abs(ph.data(), n) + lap_amp * mu_scale +
                    kernels::max_abs(rhs.data(), n);
        res_two = std::sqrt(kernels::dot(out.data(), out.data(), n));
        return kernels::max_abs(out.data(), n);
    };

    std::vector<double> ph(phi.data(), phi.data() + n);
    CHStepResult result;
    result.mean_h = h_sum * g.cell_volume() / g.area();

    double res_norm = residual(ph, res);
    double merit = res_two;
    result.residual_history.push_back(merit);

    CosinePrecond precond(g);
    std::vector<double> delta(n), neg(n), trial(n), trial_res(n), clipped;
    std::vector<double> scalevec(n), scaled_in(n);

    // Sensitivity of the residual to one-ulp perturbations of phi: the
    // laplacian amplifies beta~' noise by lap_amp. Near the penalty wall
    // beta~' is ~n^(f q0) scale and dominates the attainable floor.
    double diag_max = 0.0;
    double phi_mag = kernels::max_abs(ph.data(), n);
    const double eps_fp = std::numeric_limits<double>::epsilon();
    auto tol_eff = [&]() {
        return std::max({sp.newton_tol, 128.0 * eps_fp * res_scale,
                         0.5 * eps_fp * lap_amp * diag_max * phi_mag});
    };

    int it = 0;
    bool stalled_at_floor = false;
    while (res_norm > tol_eff() && it < sp.newton_max_iter) {
        ++it;
        eval_monotone_prime(ph, prm, ctx.diag);
        diag_max = kernels::max_abs(ctx.diag.data(), n);
        phi_mag = kernels::max_abs(ph.data(), n);
        // The penalty wall puts ~n^(f q0)-scale curvature on a thin band of
        // cells, which no constant-coefficient preconditioner can absorb.
        // Solve in the scaled variable delta = S y, s_i = 1/(1 + D_i/dref):
        // the wall columns of the Jacobian become bounded while the computed
        // direction stays exactly Newton.
        double logsum = 0.0;
        for (std::size_t k = 0; k < n; ++k) logsum += std::log(ctx.diag[k]);
        const double dref = std::max(2.0, std::exp(logsum / (double)n));
        double dbar = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            scalevec[k] = 1.0 / (1.0 + ctx.diag[k] / dref);
            dbar += ctx.diag[k] * scalevec[k];
        }
        dbar /= (double)n;

        for (std::size_t k = 0; k < n; ++k) neg[k] = -res[k];
        LinOp A = [&](const std::vector<double>& v, std::vector<double>& out) {
            out.resize(n);
            for (std::size_t k = 0; k < n; ++k) scaled_in[k] = scalevec[k] * v[k];
            ctx.apply(scaled_in, out);
        };
        LinOp M = [&](const std::vector<double>& r, std::vector<double>& z) {
            precond.apply(r, z, ctx.c, ctx.kappa, dbar);
        };
        KrylovResult kr = bicgstab(A, neg, delta, &M, sp.krylov_tol, sp.krylov_max_iter);
        for (std::size_t k = 0; k < n; ++k) delta[k] *= scalevec[k];
        // A near-miss at the linear solver's roundoff floor is still a usable
        // direction; the line search below is the judge. Only a gross stall
        // aborts the step.
        if (!kr.converged && kr.rel_residual > 1e3 * sp.krylov_tol) {
            std::ostringstream ss;
            ss << "ch_step: Newton linear solve stalled (rel res " << kr.rel_residual
               << " after " << kr.iters << " it)";
            throw StepError(ss.str(), result.residual_history);
        }

        bool accepted = false;
        double trial_norm = kInf, trial_merit = kInf;
        auto search = [&](const std::vector<double>& dir, double omega0, int tries) {
            double omega = omega0;
            for (int ls = 0; ls < tries && !accepted; ++ls) {
                for (std::size_t k = 0; k < n; ++k) trial[k] = ph[k] + omega * dir[k];
                trial_norm = residual(trial, trial_res);
                trial_merit = res_two;
                if (trial_merit < merit) accepted = true;
                else omega *= 0.5;
            }
        };

        if (prm.exact) {
            // keep every cell strictly inside (-1,1): scale the whole update
            // so no cell crosses 95% of its remaining gap
            double limit = kInf;
            for (std::size_t k = 0; k < n; ++k) {
                const double d = delta[k];
                if (d > 0.0) limit = std::min(limit, (1.0 - ph[k]) / d);
                else if (d < 0.0) limit = std::min(limit, (ph[k] + 1.0) / (-d));
            }
            search(delta, std::min(1.0, 0.95 * limit), 16);
        } else {
            // Phase 1: clip the dive into the penalty wall (curvature
            // ~ n^(f q0)) to a bounded advance past |s| = 1 per cell. The
            // clipped step is not a descent direction in general, so fall
            // back to the raw Newton direction with plain halving if needed.
            const double wall_scale = std::pow(
                (double)prm.n, -prm.penalty_exponent_factor * prm.q0 / (prm.q0 - 1.0));
            const double slack = 10.0 * wall_scale + 1e-12;
            clipped.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double s = ph[k];
                const double depth = std::max(0.0, std::fabs(s) - 1.0);
                const double allow = std::max(2.0 * depth, slack);
                clipped[k] = std::clamp(s + delta[k], -1.0 - allow, 1.0 + allow) - s;
            }
            search(clipped, 1.0, 4);
            if (!accepted) search(delta, 1.0, 30);
        }
        assert(!accepted || trial_merit < merit);  // monotone after damping
        if (!accepted) {
            // refresh the scale at the current iterate, then decide whether
            // we are simply stuck at the floating-point floor: the Jacobian
            // is exact, so a stall this deep has no other cause. The chained
            // laplacians amplify eps by lap_amp per application (hence the
            // lap_amp^2 and kappa lap_amp^3 terms), and the penalty wall
            // contributes through beta~' via lap_amp * diag_max.
            res_norm = residual(ph, res);
            const double floor =
                eps_fp * (1024.0 * std::max(res_scale, 1.0) +
                          2.0 * lap_amp * lap_amp * phi_mag * (1.0 + ctx.kappa * lap_amp) +
                          4.0 * lap_amp * diag_max * phi_mag);
            if (res_norm <= std::max(sp.newton_tol, floor)) {
                stalled_at_floor = true;
                break;
            }
            result.residual_history.push_back(trial_merit);
            std::ostringstream ss;
            ss << "ch_step: Newton line search failed to reduce the residual (res "
               << res_norm << ", scale " << res_scale << ", floor " << floor << ")";
            throw StepError(ss.str(), result.residual_history);
        }
        ph.swap(trial);
        res.swap(trial_res);
        res_norm = trial_norm;
        merit = trial_merit;
        result.residual_history.push_back(merit);
    }
    if (res_norm > tol_eff() && !stalled_at_floor) {
        std::ostringstream ss;
        ss << "ch_step: Newton did not reach tol " << tol_eff() << " in "
           << sp.newton_max_iter << " iterations (residual " << res_norm << ")";
        throw StepError(ss.str(), result.residual_history);
    }

    result.newton_iters = it;
    result.residual = res_norm;
    result.phi = ScalarField(g);
    std::copy(ph.begin(), ph.end(), result.phi.data());

    // mu^{n+1} = kappa lap^2 phi^+ - lap phi^+ + beta~(phi^+) - lambda phi^n - chi sigma^n
    eval_monotone(ph, prm, beta_vals);
    kernels::laplacian(ph.data(), g.nx, g.ny, g.hx, g.hy, lap1.data());
    result.mu = ScalarField(g);
    if (ctx.kappa > 0.0) {
        kernels::laplacian(lap1.data(), g.nx, g.ny, g.hx, g.hy, lap2.data());
        for (std::size_t k = 0; k < n; ++k)
            result.mu[k] = ctx.kappa * lap2[k] - lap1[k] + beta_vals[k] + gex[k];
    } else {
        for (std::size_t k = 0; k < n; ++k)
            result.mu[k] = -lap1[k] + beta_vals[k] + gex[k];
    }
    return result;
}

std::vector<double> mass_ode_reference(double m0, double ell,
                                       const std::vector<double>& hbar, double dt) {
    if (!(std::fabs(m0) < 1.0))
        throw ConfigError("mass_ode_reference: |m0| must be < 1");
    std::vector<double> m;
    m.reserve(hbar.size() + 1);
    m.push_back(m0);
    double cur = m0;
    for (double h : hbar) {
        cur = (cur + dt * h) / (1.0 + dt * ell);
        m.push_back(cur);
    }
    return m;
}

double mean_bound_delta(double m0, double ell, double H) {
    if (!(ell > 0.0)) throw ConfigError("mean_bound_delta: ell must be > 0");
    if (!(H / ell < 1.0)) throw ConfigError("mean_bound_delta: requires H/ell < 1");
    if (!(std::fabs(m0) < 1.0)) throw ConfigError("mean_bound_delta: requires |m0| < 1");
    return 1.0 - std::max(std::fabs(m0), H / ell);
}

} // namespace chb

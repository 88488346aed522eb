#include "chb/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chb/kernels.hpp"
#include "chb/linsolve.hpp"
#include "chb/transforms.hpp"

namespace chb {

FaceField korteweg_force(const ScalarField& phi, const ScalarField& mu,
                         const ScalarField& sigma, double chi) {
    const GridSpec& g = phi.grid();
    if (!(mu.grid() == g) || !(sigma.grid() == g))
        throw ConfigError("korteweg_force: grid mismatch");
    FaceField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double gphi = (phi(i, j) - phi(i - 1, j)) / g.hx;
            const double gsig = (sigma(i, j) - sigma(i - 1, j)) / g.hx;
            const double mu_f = 0.5 * (mu(i, j) + mu(i - 1, j));
            const double phi_f = 0.5 * (phi(i, j) + phi(i - 1, j));
            out.x(i, j) = mu_f * gphi - chi * phi_f * gsig;
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double gphi = (phi(i, j) - phi(i, j - 1)) / g.hy;
            const double gsig = (sigma(i, j) - sigma(i, j - 1)) / g.hy;
            const double mu_f = 0.5 * (mu(i, j) + mu(i, j - 1));
            const double phi_f = 0.5 * (phi(i, j) + phi(i, j - 1));
            out.y(i, j) = mu_f * gphi - chi * phi_f * gsig;
        }
    return out;
}

namespace {

// Strain of a MAC field: Exx, Eyy at cells; Exy at the (nx+1) x (ny+1)
// nodes, zero on wall nodes (free slip).
struct StrainWorkspace {
    std::vector<double> exx, eyy, exy;
};

void apply_strain(const FaceField& u, StrainWorkspace& w) {
    const GridSpec& g = u.grid();
    const int nx = g.nx, ny = g.ny;
    w.exx.assign((std::size_t)nx * ny, 0.0);
    w.eyy.assign((std::size_t)nx * ny, 0.0);
    w.exy.assign((std::size_t)(nx + 1) * (ny + 1), 0.0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            w.exx[(std::size_t)j * nx + i] = (u.x(i + 1, j) - u.x(i, j)) / g.hx;
            w.eyy[(std::size_t)j * nx + i] = (u.y(i, j + 1) - u.y(i, j)) / g.hy;
        }
    for (int j = 1; j < ny; ++j)
        for (int i = 1; i < nx; ++i)
            w.exy[(std::size_t)j * (nx + 1) + i] =
                0.5 * ((u.x(i, j) - u.x(i, j - 1)) / g.hy +
                       (u.y(i, j) - u.y(i - 1, j)) / g.hx);
}

// out = u + eps * D^T(D u); the exact adjoint of apply_strain under the
// uniform quadrature weights, so <B u, u> = ||u||^2 + eps ||D u||^2.
void apply_momentum(const FaceField& u, double eps, StrainWorkspace& w, FaceField& out) {
    const GridSpec& g = u.grid();
    const int nx = g.nx, ny = g.ny;
    apply_strain(u, w);
    out = FaceField(g);
    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            const double dexx =
                (w.exx[(std::size_t)j * nx + i] - w.exx[(std::size_t)j * nx + i - 1]) / g.hx;
            const double dexy = (w.exy[(std::size_t)(j + 1) * (nx + 1) + i] -
                                 w.exy[(std::size_t)j * (nx + 1) + i]) / g.hy;
            out.x(i, j) = u.x(i, j) - eps * (dexx + dexy);
        }
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double deyy =
                (w.eyy[(std::size_t)j * nx + i] - w.eyy[(std::size_t)(j - 1) * nx + i]) / g.hy;
            const double dexy = (w.exy[(std::size_t)j * (nx + 1) + i + 1] -
                                 w.exy[(std::size_t)j * (nx + 1) + i]) / g.hx;
            out.y(i, j) = u.y(i, j) - eps * (deyy + dexy);
        }
    // wall-normal faces stay zero structurally
}

// Flat packing of the velocity unknowns (all faces; wall entries are pinned
// to zero and treated as identity rows).
struct VelocityVec {
    const GridSpec* g;
    std::size_t nu, nv;

    explicit VelocityVec(const GridSpec& grid)
        : g(&grid), nu((std::size_t)(grid.nx + 1) * grid.ny),
          nv((std::size_t)grid.nx * (grid.ny + 1)) {}

    void pack(const FaceField& f, std::vector<double>& x) const {
        x.resize(nu + nv);
        std::copy(f.xdata(), f.xdata() + nu, x.begin());
        std::copy(f.ydata(), f.ydata() + nv, x.begin() + nu);
    }
    void unpack(const std::vector<double>& x, FaceField& f) const {
        f = FaceField(*g);
        std::copy(x.begin(), x.begin() + nu, f.xdata());
        std::copy(x.begin() + nu, x.end(), f.ydata());
    }
};

// Componentwise fast preconditioner P = (I + eps (-lap))^{-1} with
// Dirichlet across the wall-normal direction and Neumann tangentially.
class MomentumPrecond {
public:
    MomentumPrecond(const GridSpec& g, double eps)
        : g_(g), eps_(eps),
          tu_(get_transform(g.ny, g.nx - 1, TransformKind::NeumannCells,
                            TransformKind::DirichletInterior)),
          tv_(get_transform(g.ny - 1, g.nx, TransformKind::DirichletInterior,
                            TransformKind::NeumannCells)),
          eu_((std::size_t)(g.nx - 1) * g.ny), ev_((std::size_t)g.nx * (g.ny - 1)),
          bu_(eu_.size()), bv_(ev_.size()) {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx - 1; ++i)
                eu_[(std::size_t)j * (g.nx - 1) + i] =
                    1.0 / (1.0 + eps *
                        (Transform2D::eigenvalue(TransformKind::DirichletInterior, i, g.nx, g.hx) +
                         Transform2D::eigenvalue(TransformKind::NeumannCells, j, g.ny, g.hy)));
        for (int j = 0; j < g.ny - 1; ++j)
            for (int i = 0; i < g.nx; ++i)
                ev_[(std::size_t)j * g.nx + i] =
                    1.0 / (1.0 + eps *
                        (Transform2D::eigenvalue(TransformKind::NeumannCells, i, g.nx, g.hx) +
                         Transform2D::eigenvalue(TransformKind::DirichletInterior, j, g.ny, g.hy)));
    }

    void apply(const std::vector<double>& r, std::vector<double>& z) const {
        const int nx = g_.nx, ny = g_.ny;
        const std::size_t nu = (std::size_t)(nx + 1) * ny;
        z.assign(r.size(), 0.0);
        // u block: interior faces i = 1..nx-1
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                bu_[(std::size_t)j * (nx - 1) + (i - 1)] = r[(std::size_t)j * (nx + 1) + i];
        tu_->forward(bu_.data(), bu_.data());
        for (std::size_t k = 0; k < bu_.size(); ++k) bu_[k] *= eu_[k];
        tu_->inverse(bu_.data(), bu_.data());
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                z[(std::size_t)j * (nx + 1) + i] = bu_[(std::size_t)j * (nx - 1) + (i - 1)];
        // v block: interior faces j = 1..ny-1
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                bv_[(std::size_t)(j - 1) * nx + i] = r[nu + (std::size_t)j * nx + i];
        tv_->forward(bv_.data(), bv_.data());
        for (std::size_t k = 0; k < bv_.size(); ++k) bv_[k] *= ev_[k];
        tv_->inverse(bv_.data(), bv_.data());
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                z[nu + (std::size_t)j * nx + i] = bv_[(std::size_t)(j - 1) * nx + i];
    }

private:
    GridSpec g_;
    double eps_;
    std::shared_ptr<const Transform2D> tu_, tv_;
    std::vector<double> eu_, ev_;
    mutable std::vector<double> bu_, bv_;
};

void require_noflux(const FaceField& force, const char* who) {
    if (!force.normal_boundary_is_zero())
        throw ConfigError(std::string(who) + ": force must have zero boundary-normal components");
}

ScalarField gauge_zero_mean(ScalarField f) {
    const double m = mean(f);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] -= m;
    return f;
}

} // namespace

double strain_rate_norm_sq(const FaceField& u) {
    StrainWorkspace w;
    apply_strain(u, w);
    const GridSpec& g = u.grid();
    const double vol = g.cell_volume();
    double acc = 0.0;
    for (double v : w.exx) acc += v * v;
    for (double v : w.eyy) acc += v * v;
    double shear = 0.0;
    for (double v : w.exy) shear += v * v;
    return (acc + 2.0 * shear) * vol;
}

double flow_energy_identity_gap(const FaceField& u, const FaceField& force, double epsilon) {
    const double lhs = epsilon * strain_rate_norm_sq(u) + norm_sq(u);
    const double rhs = inner_product(force, u);
    return std::fabs(lhs - rhs) / std::max(std::fabs(rhs), 1e-300);
}

FlowResult darcy_solve(const FaceField& force, const FlowSolveParams& params) {
    params.validate();
    require_noflux(force, "darcy_solve");
    const GridSpec& g = force.grid();
    const std::size_t n = g.cells();

    ScalarField rhs_field = divergence(force);
    const double rhs_mean = mean(rhs_field);
    if (std::fabs(rhs_mean) > 1e-12 * std::max(1.0, max_abs(rhs_field)))
        throw InvariantViolation("darcy_solve: rhs mean exceeds compatibility tolerance");

    // solenoidal force: div(force) at roundoff, no pressure needed
    const double div_floor =
        1e-12 * max_abs(force) * (1.0 / g.hx + 1.0 / g.hy) + 1e-300;
    if (max_abs(rhs_field) <= div_floor) {
        FlowResult res;
        res.pi = ScalarField(g, 0.0);
        res.u = force;
        res.div_u_inf = max_abs(rhs_field);
        return res;
    }

    std::vector<double> rhs(rhs_field.data(), rhs_field.data() + n);
    std::vector<double> lap(n);
    LinOp A = [&](const std::vector<double>& v, std::vector<double>& out) {
        out.resize(n);
        kernels::laplacian(v.data(), g.nx, g.ny, g.hx, g.hy, lap.data());
        for (std::size_t k = 0; k < n; ++k) out[k] = -lap[k];
    };
    PoissonNeumann poisson(g.nx, g.ny, g.hx, g.hy);
    LinOp M = [&](const std::vector<double>& r, std::vector<double>& z) {
        poisson.solve(r, z);
    };
    std::vector<double> x;
    KrylovResult kr = pcg(A, rhs, x, &M, params.krylov_tol, params.krylov_max_iter);
    if (!kr.converged)
        throw SolverError("darcy_solve: pressure solve did not converge", kr.rel_residual,
                          kr.iters);

    FlowResult res;
    res.outer_iters = kr.iters;
    res.rel_residual = kr.rel_residual;
    res.pi = ScalarField(g);
    std::copy(x.begin(), x.end(), res.pi.data());
    res.pi = gauge_zero_mean(res.pi);

    FaceField gp = gradient(res.pi);
    res.u = FaceField(g);
    for (std::size_t k = 0; k < res.u.xsize(); ++k)
        res.u.xdata()[k] = gp.xdata()[k] + force.xdata()[k];
    for (std::size_t k = 0; k < res.u.ysize(); ++k)
        res.u.ydata()[k] = gp.ydata()[k] + force.ydata()[k];
    res.div_u_inf = max_abs(divergence(res.u));
    if (params.flip_pressure_sign)
        for (std::size_t k = 0; k < res.pi.size(); ++k) res.pi[k] = -res.pi[k];
    return res;
}

FlowResult brinkman_solve(const FaceField& force, const FlowSolveParams& params) {
    params.validate();
    if (!(params.epsilon > 0.0))
        throw ConfigError("brinkman_solve: epsilon must be > 0 (use darcy_solve for the limit)");
    require_noflux(force, "brinkman_solve");
    const GridSpec& g = force.grid();
    const std::size_t n = g.cells();
    const double eps = params.epsilon;
    const double inner_tol = std::min(1e-12, 0.01 * params.krylov_tol);

    VelocityVec vv(g);
    StrainWorkspace sw;
    MomentumPrecond mprec(g, eps);
    FaceField uin(g), uout(g);

    LinOp B = [&](const std::vector<double>& v, std::vector<double>& out) {
        vv.unpack(v, uin);
        apply_momentum(uin, eps, sw, uout);
        vv.pack(uout, out);
    };
    LinOp BM = [&](const std::vector<double>& r, std::vector<double>& z) {
        mprec.apply(r, z);
    };

    auto momentum_solve = [&](const FaceField& rhs_face, FaceField& out, double tol) {
        std::vector<double> rhs, x;
        vv.pack(rhs_face, rhs);
        KrylovResult kr = pcg(B, rhs, x, &BM, tol, params.momentum_max_iter);
        if (!kr.converged)
            throw SolverError("brinkman_solve: momentum solve did not converge",
                              kr.rel_residual, kr.iters);
        vv.unpack(x, out);
    };

    // Schur complement on the pressure: (-div B^{-1} grad) pi = div(B^{-1} F).
    FaceField uF(g);
    momentum_solve(force, uF, inner_tol);
    ScalarField rhs_field = divergence(uF);
    const double div_floor =
        1e-12 * max_abs(uF) * (1.0 / g.hx + 1.0 / g.hy) + 1e-300;
    if (max_abs(rhs_field) <= div_floor) {
        FlowResult res;
        res.pi = ScalarField(g, 0.0);
        res.u = uF;
        res.div_u_inf = max_abs(rhs_field);
        return res;
    }
    std::vector<double> rhs(rhs_field.data(), rhs_field.data() + n);

    ScalarField pwork(g);
    FaceField gp(g), ugp(g);
    LinOp S = [&](const std::vector<double>& v, std::vector<double>& out) {
        std::copy(v.begin(), v.end(), pwork.data());
        gp = gradient(pwork);
        momentum_solve(gp, ugp, inner_tol);
        ScalarField d = divergence(ugp);
        out.assign(d.data(), d.data() + n);
        for (std::size_t k = 0; k < n; ++k) out[k] = -out[k];
    };
    // Cahouet-Chabard: S^{-1} ~ eps I + (-lap)^{-1} on zero-mean fields.
    PoissonNeumann poisson(g.nx, g.ny, g.hx, g.hy);
    std::vector<double> pz(n);
    LinOp SM = [&](const std::vector<double>& r, std::vector<double>& z) {
        poisson.solve(r, pz);
        z.resize(n);
        for (std::size_t k = 0; k < n; ++k) z[k] = eps * r[k] + pz[k];
    };

    std::vector<double> pi_vec;
    KrylovResult kr = pcg(S, rhs, pi_vec, &SM, params.krylov_tol, params.krylov_max_iter);
    if (!kr.converged)
        throw SolverError("brinkman_solve: Schur pressure solve did not converge",
                          kr.rel_residual, kr.iters);

    FlowResult res;
    res.outer_iters = kr.iters;
    res.rel_residual = kr.rel_residual;
    res.pi = ScalarField(g);
    std::copy(pi_vec.begin(), pi_vec.end(), res.pi.data());
    res.pi = gauge_zero_mean(res.pi);

    // Final velocity from the gauged pressure, solved tight.
    FaceField total(g);
    gp = gradient(res.pi);
    for (std::size_t k = 0; k < total.xsize(); ++k)
        total.xdata()[k] = gp.xdata()[k] + force.xdata()[k];
    for (std::size_t k = 0; k < total.ysize(); ++k)
        total.ydata()[k] = gp.ydata()[k] + force.ydata()[k];
    momentum_solve(total, res.u, inner_tol);
    res.div_u_inf = max_abs(divergence(res.u));
    if (params.flip_pressure_sign)
        for (std::size_t k = 0; k < res.pi.size(); ++k) res.pi[k] = -res.pi[k];
    return res;
}

FaceField velocity_from_stream(const GridSpec& g, const std::vector<double>& psi_nodes) {
    const int nxp = g.nx + 1;
    if (psi_nodes.size() != (std::size_t)nxp * (g.ny + 1))
        throw ConfigError("velocity_from_stream: psi must be sampled at (nx+1)(ny+1) nodes");
    auto psi = [&](int i, int j) { return psi_nodes[(std::size_t)j * nxp + i]; };
    FaceField u(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            u.x(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            u.y(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx;
    // psi constant along each wall up to roundoff (e.g. sin(pi) ~ 1e-16);
    // anything beyond that is a caller error.
    double wall = 0.0;
    for (int j = 0; j < g.ny; ++j)
        wall = std::max({wall, std::fabs(u.x(0, j)), std::fabs(u.x(g.nx, j))});
    for (int i = 0; i < g.nx; ++i)
        wall = std::max({wall, std::fabs(u.y(i, 0)), std::fabs(u.y(i, g.ny))});
    const double scale = std::max(1e-300, max_abs(u));
    if (wall > 1e-12 * scale)
        throw DomainError("velocity_from_stream: psi is not constant along the walls");
    u.zero_normal_boundary();
    return u;
}

} // namespace chb

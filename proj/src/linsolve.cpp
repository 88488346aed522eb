#include "chb/linsolve.hpp"

#include <cmath>

#include "chb/kernels.hpp"

namespace chb {

namespace {

double nrm2(const std::vector<double>& v) {
    return std::sqrt(kernels::dot(v.data(), v.data(), v.size()));
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    return kernels::dot(a.data(), b.data(), a.size());
}

} // namespace

KrylovResult pcg(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                 const LinOp* precond, double rel_tol, int max_iter) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    const double bnorm = nrm2(b);
    KrylovResult res;
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    std::vector<double> r = b, z(n), p(n), Ap(n);
    if (precond) (*precond)(r, z); else z = r;
    p = z;
    double rz = vdot(r, z);

    for (int it = 1; it <= max_iter; ++it) {
        A(p, Ap);
        const double pAp = vdot(p, Ap);
        if (pAp <= 0.0) break;  // loss of positive definiteness
        const double alpha = rz / pAp;
        kernels::axpby(alpha, p.data(), 1.0, x.data(), n);
        kernels::axpby(-alpha, Ap.data(), 1.0, r.data(), n);
        const double rnorm = nrm2(r);
        res.iters = it;
        if (rnorm <= rel_tol * bnorm) {
            res.converged = true;
            res.rel_residual = rnorm / bnorm;
            return res;
        }
        if (precond) (*precond)(r, z); else z = r;
        const double rz_new = vdot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        kernels::axpby(1.0, z.data(), beta, p.data(), n);
    }
    res.rel_residual = nrm2(r) / bnorm;
    res.converged = res.rel_residual <= rel_tol;
    return res;
}

namespace {

// One BiCGStab cycle from the current x; recursive residual only.
KrylovResult bicgstab_cycle(const LinOp& A, const std::vector<double>& b,
                            std::vector<double>& x, const LinOp* precond, double rel_tol,
                            int max_iter, double bnorm) {
    const std::size_t n = b.size();
    KrylovResult res;

    std::vector<double> r(n);
    A(x, r);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - r[k];
    std::vector<double> r0 = r, p(n, 0.0), v(n, 0.0);
    std::vector<double> phat(n), shat(n), s(n), t(n);
    double rho = 1.0, alpha = 1.0, omega = 1.0;

    for (int it = 1; it <= max_iter; ++it) {
        const double rho_new = vdot(r0, r);
        if (std::fabs(rho_new) < 1e-300) {  // restart on breakdown
            r0 = r;
            rho = vdot(r0, r);
            p = r;
        } else {
            const double beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            // p = r + beta * (p - omega * v)
            for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        if (precond) (*precond)(p, phat); else phat = p;
        A(phat, v);
        const double r0v = vdot(r0, v);
        if (std::fabs(r0v) < 1e-300) break;
        alpha = rho / r0v;
        for (std::size_t k = 0; k < n; ++k) s[k] = r[k] - alpha * v[k];
        double snorm = nrm2(s);
        if (snorm <= rel_tol * bnorm) {
            kernels::axpby(alpha, phat.data(), 1.0, x.data(), n);
            res.iters = it;
            res.converged = true;
            res.rel_residual = snorm / bnorm;
            return res;
        }
        if (precond) (*precond)(s, shat); else shat = s;
        A(shat, t);
        const double tt = vdot(t, t);
        if (tt < 1e-300) break;
        omega = vdot(t, s) / tt;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * phat[k] + omega * shat[k];
            r[k] = s[k] - omega * t[k];
        }
        const double rnorm = nrm2(r);
        res.iters = it;
        if (rnorm <= rel_tol * bnorm) {
            res.converged = true;
            res.rel_residual = rnorm / bnorm;
            return res;
        }
        if (std::fabs(omega) < 1e-300) break;
    }
    res.rel_residual = nrm2(r) / bnorm;
    return res;
}

} // namespace

KrylovResult bicgstab(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                      const LinOp* precond, double rel_tol, int max_iter) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    const double bnorm = nrm2(b);
    KrylovResult res;
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    // The recursive residual drifts on stiff systems; always confirm with the
    // true residual and restart from the current iterate if it disagrees.
    std::vector<double> work(n);
    int total_iters = 0;
    for (int cycle = 0; cycle < 3; ++cycle) {
        KrylovResult c = bicgstab_cycle(A, b, x, precond, rel_tol, max_iter, bnorm);
        total_iters += c.iters;
        A(x, work);
        for (std::size_t k = 0; k < n; ++k) work[k] = b[k] - work[k];
        res.rel_residual = nrm2(work) / bnorm;
        res.iters = total_iters;
        if (res.rel_residual <= rel_tol) {
            res.converged = true;
            return res;
        }
    }
    res.converged = false;
    return res;
}

} // namespace chb

#pragma once

#include <functional>
#include <vector>

namespace chb {

// Matrix-free Krylov solvers over flat vectors. Operators write into a
// caller-provided output vector of the same length as the input.
using LinOp = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct KrylovResult {
    bool converged = false;
    int iters = 0;
    double rel_residual = 0.0;  // true residual norm / rhs norm at exit
};

// Preconditioned conjugate gradient for SPD operators. precond may be null.
KrylovResult pcg(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                 const LinOp* precond, double rel_tol, int max_iter);

// BiCGStab for mildly nonsymmetric operators (the Newton correction of the
// coupled Cahn-Hilliard system). precond is applied on the right.
KrylovResult bicgstab(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                      const LinOp* precond, double rel_tol, int max_iter);

} // namespace chb

#pragma once

#include <memory>
#include <vector>

namespace chb {

// Fast diagonalization helpers for the constant-coefficient preconditioners.
// NeumannCells: DCT-II/III pair on cell-centered data (ghost-reflection
// Neumann walls). DirichletInterior: DST-I on interior-face data (values
// pinned to zero on the walls). Both diagonalize the corresponding 1D
// three-point second-difference operator exactly.
enum class TransformKind { NeumannCells, DirichletInterior };

class Transform2D {
public:
    // rows/cols are the array extents (row-major, cols fastest). For
    // DirichletInterior the extent is the interior count and full_n must be
    // passed to eigenvalue().
    Transform2D(int rows, int cols, TransformKind row_kind, TransformKind col_kind);
    ~Transform2D();
    Transform2D(const Transform2D&) = delete;
    Transform2D& operator=(const Transform2D&) = delete;

    void forward(const double* in, double* out) const;
    // inverse(forward(x)) == x (normalization applied here).
    void inverse(const double* in, double* out) const;

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    // Eigenvalue of the 1D operator -d2/dx2 (three-point stencil, spacing h)
    // for the transform mode with index k (0-based array index).
    static double eigenvalue(TransformKind kind, int k, int full_n, double h);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int rows_, cols_;
};

// Process-wide cache; transforms are plan-heavy to build and safe to share
// (execution serializes on an internal mutex).
std::shared_ptr<const Transform2D> get_transform(int rows, int cols,
                                                 TransformKind row_kind,
                                                 TransformKind col_kind);

// Solves -lap q = r with Neumann walls on an nx x ny cell grid, q gauged to
// zero mean. r must have (numerically) zero mean.
class PoissonNeumann {
public:
    PoissonNeumann(int nx, int ny, double hx, double hy);
    void solve(const std::vector<double>& rhs, std::vector<double>& q) const;

private:
    std::shared_ptr<const Transform2D> t_;
    std::vector<double> inv_eig_;
    mutable std::vector<double> work_;
};

} // namespace chb

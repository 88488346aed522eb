#pragma once

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "chb/error.hpp"

namespace chb {

// Uniform cell-centered rectangular grid. Scalars live at cell centers,
// vector components on the staggered (MAC) faces; homogeneous-Neumann and
// no-penetration walls are built into the operators.
struct GridSpec {
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    double hx = 0.0, hy = 0.0;

    GridSpec() = default;
    GridSpec(int nx, int ny, double lx, double ly);

    double cell_volume() const { return hx * hy; }
    double area() const { return lx * ly; }
    std::size_t cells() const { return (std::size_t)nx * ny; }

    double xc(int i) const { return (i + 0.5) * hx; }
    double yc(int j) const { return (j + 0.5) * hy; }

    bool operator==(const GridSpec& o) const {
        return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
    }
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double value = 0.0)
        : grid_(g), v_((std::size_t)g.nx * g.ny, value) {}

    const GridSpec& grid() const { return grid_; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::size_t size() const { return v_.size(); }

    double& operator()(int i, int j) { return v_[(std::size_t)j * grid_.nx + i]; }
    double operator()(int i, int j) const { return v_[(std::size_t)j * grid_.nx + i]; }
    double& operator[](std::size_t k) { return v_[k]; }
    double operator[](std::size_t k) const { return v_[k]; }

    bool all_finite() const;

private:
    GridSpec grid_;
    std::vector<double> v_;
};

// Staggered vector field: x-components on the (nx+1) x ny vertical faces,
// y-components on the nx x (ny+1) horizontal faces. Boundary-normal entries
// are zero whenever produced by the operators here (no-flux / no-penetration).
class FaceField {
public:
    FaceField() = default;
    explicit FaceField(const GridSpec& g)
        : grid_(g),
          fx_((std::size_t)(g.nx + 1) * g.ny, 0.0),
          fy_((std::size_t)g.nx * (g.ny + 1), 0.0) {}

    const GridSpec& grid() const { return grid_; }

    double* xdata() { return fx_.data(); }
    const double* xdata() const { return fx_.data(); }
    double* ydata() { return fy_.data(); }
    const double* ydata() const { return fy_.data(); }
    std::size_t xsize() const { return fx_.size(); }
    std::size_t ysize() const { return fy_.size(); }

    double& x(int i, int j) { return fx_[(std::size_t)j * (grid_.nx + 1) + i]; }
    double x(int i, int j) const { return fx_[(std::size_t)j * (grid_.nx + 1) + i]; }
    double& y(int i, int j) { return fy_[(std::size_t)j * grid_.nx + i]; }
    double y(int i, int j) const { return fy_[(std::size_t)j * grid_.nx + i]; }

    void zero_normal_boundary();
    bool normal_boundary_is_zero() const;
    bool all_finite() const;

private:
    GridSpec grid_;
    std::vector<double> fx_, fy_;
};

// ---- discrete calculus (all Neumann / no-flux consistent) ----

// Centered difference across each interior face; boundary-normal faces zero.
FaceField gradient(const ScalarField& f);

// Per-cell flux balance over cell volume; the negative adjoint of gradient.
ScalarField divergence(const FaceField& F);

// divergence(gradient(f)), computed fused but bit-identical to the composition.
ScalarField laplacian_neumann(const ScalarField& f);

// laplacian_neumann applied twice; realizes dn(f)=0 and dn(lap f)=0.
ScalarField bilaplacian_neumann(const ScalarField& f);

// Midpoint-rule quadrature. Throws ConfigError on grid mismatch.
double inner_product(const ScalarField& f, const ScalarField& g);
double mean(const ScalarField& f);
double integral(const ScalarField& f);

// Face-weighted inner product (boundary-normal faces excluded; they carry
// zero values anyway) and the associated squared L2 norm.
double inner_product(const FaceField& F, const FaceField& G);
double norm_sq(const FaceField& F);

double norm_sq(const ScalarField& f);
double min_value(const ScalarField& f);
double max_abs(const ScalarField& f);
double max_abs(const FaceField& F);

// ---- field snapshots ----
// Header line: `CHB-FIELD v1 nx ny lx ly name time`, then row-major values,
// ASCII (one row per line) or little-endian 64-bit floats. The binary form
// round-trips bit-exactly.
void write_field(std::ostream& os, const ScalarField& f, const std::string& name,
                 double time, bool binary);
void write_field(const std::string& path, const ScalarField& f, const std::string& name,
                 double time, bool binary);

struct FieldSnapshot {
    ScalarField field;
    std::string name;
    double time = 0.0;
};
FieldSnapshot read_field(std::istream& is);
FieldSnapshot read_field(const std::string& path);

} // namespace chb

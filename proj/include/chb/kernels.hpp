#pragma once

#include <cstddef>

// Low-level grid kernels. Every hot loop of the solver lives here, in two
// variants: a plain serial reference and an OpenMP one. The public entry
// points dispatch on the active backend; tests compare the two variants and
// bench/ times them. Reductions use fixed per-thread partials combined in
// thread order, so results are reproducible for a fixed thread count.

namespace chb::kernels {

enum class Backend { Serial, Parallel };

Backend backend();
void set_backend(Backend b);
// Reads CHB_BACKEND=serial|parallel once at startup; Parallel by default
// when compiled with OpenMP.
Backend default_backend();

int max_threads();

// ---- pointwise / BLAS-1 style ----

void fill(double* x, std::size_t n, double value);
void copy(const double* x, double* y, std::size_t n);
// y = a*x + b*y
void axpby(double a, const double* x, double b, double* y, std::size_t n);
// z = x + s*y
void add_scaled(const double* x, double s, const double* y, double* z, std::size_t n);
void scale(double* x, std::size_t n, double s);

double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double min_value(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);
double max_abs(const double* x, std::size_t n);

// Serial reference variants (exposed for the equivalence tests and bench).
void axpby_serial(double a, const double* x, double b, double* y, std::size_t n);
void axpby_omp(double a, const double* x, double b, double* y, std::size_t n);
double dot_serial(const double* x, const double* y, std::size_t n);
double dot_omp(const double* x, const double* y, std::size_t n);
double sum_serial(const double* x, std::size_t n);
double sum_omp(const double* x, std::size_t n);

// ---- stencils on an nx x ny cell grid (row-major, idx = j*nx + i) ----
// Face arrays: fx is (nx+1) x ny (idx = j*(nx+1) + i), fy is nx x (ny+1).
// Homogeneous-Neumann ghosting: boundary-normal face entries stay zero.

void gradient(const double* f, int nx, int ny, double hx, double hy,
              double* fx, double* fy);
void gradient_serial(const double* f, int nx, int ny, double hx, double hy,
                     double* fx, double* fy);
void gradient_omp(const double* f, int nx, int ny, double hx, double hy,
                  double* fx, double* fy);

void divergence(const double* fx, const double* fy, int nx, int ny,
                double hx, double hy, double* out);
void divergence_serial(const double* fx, const double* fy, int nx, int ny,
                       double hx, double hy, double* out);
void divergence_omp(const double* fx, const double* fy, int nx, int ny,
                    double hx, double hy, double* out);

// Fused 5-point Neumann Laplacian. Computes exactly the same floating-point
// expressions as divergence(gradient(f)), so the two agree bitwise.
void laplacian(const double* f, int nx, int ny, double hx, double hy, double* out);
void laplacian_serial(const double* f, int nx, int ny, double hx, double hy, double* out);
void laplacian_omp(const double* f, int nx, int ny, double hx, double hy, double* out);

// Conservative advective flux u * phi_face. Face value of phi is the upwind
// donor cell when centered == false, the arithmetic mean otherwise.
void advect_flux(const double* phi, const double* ux, const double* uy,
                 int nx, int ny, bool centered, double* fx, double* fy);
void advect_flux_serial(const double* phi, const double* ux, const double* uy,
                        int nx, int ny, bool centered, double* fx, double* fy);
void advect_flux_omp(const double* phi, const double* ux, const double* uy,
                     int nx, int ny, bool centered, double* fx, double* fy);

} // namespace chb::kernels

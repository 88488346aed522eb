#include "chb/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chb::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::Serial};
std::atomic<bool> g_backend_init{false};

} // namespace

Backend default_backend() {
#ifdef _OPENMP
    if (const char* env = std::getenv("CHB_BACKEND")) {
        if (std::strcmp(env, "serial") == 0) return Backend::Serial;
        if (std::strcmp(env, "parallel") == 0) return Backend::Parallel;
    }
    return Backend::Parallel;
#else
    return Backend::Serial;
#endif
}

Backend backend() {
    if (!g_backend_init.load(std::memory_order_acquire)) {
        g_backend.store(default_backend(), std::memory_order_relaxed);
        g_backend_init.store(true, std::memory_order_release);
    }
    return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) {
    g_backend.store(b, std::memory_order_relaxed);
    g_backend_init.store(true, std::memory_order_release);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------- BLAS-1

void fill(double* x, std::size_t n, double value) {
    if (backend() == Backend::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)n; ++i) x[i] = value;
    } else {
        std::fill(x, x + n, value);
    }
}

void copy(const double* x, double* y, std::size_t n) {
    if (backend() == Backend::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)n; ++i) y[i] = x[i];
    } else {
        std::copy(x, x + n, y);
    }
}

void axpby_serial(double a, const double* x, double b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void axpby_omp(double a, const double* x, double b, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i) y[i] = a * x[i] + b * y[i];
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
    if (backend() == Backend::Parallel) axpby_omp(a, x, b, y, n);
    else axpby_serial(a, x, b, y, n);
}

void add_scaled(const double* x, double s, const double* y, double* z, std::size_t n) {
    if (backend() == Backend::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)n; ++i) z[i] = x[i] + s * y[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + s * y[i];
    }
}

void scale(double* x, std::size_t n, double s) {
    if (backend() == Backend::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)n; ++i) x[i] *= s;
    } else {
        for (std::size_t i = 0; i < n; ++i) x[i] *= s;
    }
}

// Parallel reductions below use a static partition with per-thread partials
// combined in thread order: reproducible for a fixed thread count.

double dot_serial(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double dot_omp(const double* x, const double* y, std::size_t n) {
#ifdef _OPENMP
    const int nt = omp_get_max_threads();
    std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
    {
        const int t = omp_get_thread_num();
        const std::size_t chunk = (n + nt - 1) / nt;
        const std::size_t lo = std::min(n, chunk * (std::size_t)t);
        const std::size_t hi = std::min(n, lo + chunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i] * y[i];
        partial[t] = acc;
    }
    double acc = 0.0;
    for (int t = 0; t < nt; ++t) acc += partial[t];
    return acc;
#else
    return dot_serial(x, y, n);
#endif
}

double dot(const double* x, const double* y, std::size_t n) {
    return backend() == Backend::Parallel ? dot_omp(x, y, n) : dot_serial(x, y, n);
}

double sum_serial(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sum_omp(const double* x, std::size_t n) {
#ifdef _OPENMP
    const int nt = omp_get_max_threads();
    std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
    {
        const int t = omp_get_thread_num();
        const std::size_t chunk = (n + nt - 1) / nt;
        const std::size_t lo = std::min(n, chunk * (std::size_t)t);
        const std::size_t hi = std::min(n, lo + chunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i];
        partial[t] = acc;
    }
    double acc = 0.0;
    for (int t = 0; t < nt; ++t) acc += partial[t];
    return acc;
#else
    return sum_serial(x, n);
#endif
}

double sum(const double* x, std::size_t n) {
    return backend() == Backend::Parallel ? sum_omp(x, n) : sum_serial(x, n);
}

namespace {

template <class Cmp>
double extremum(const double* x, std::size_t n, double init, Cmp better) {
    if (n == 0) return init;
    if (backend() == Backend::Parallel) {
#ifdef _OPENMP
        const int nt = omp_get_max_threads();
        std::vector<double> partial(nt, init);
#pragma omp parallel num_threads(nt)
        {
            const int t = omp_get_thread_num();
            const std::size_t chunk = (n + nt - 1) / nt;
            const std::size_t lo = std::min(n, chunk * (std::size_t)t);
            const std::size_t hi = std::min(n, lo + chunk);
            double acc = init;
            for (std::size_t i = lo; i < hi; ++i)
                if (better(x[i], acc)) acc = x[i];
            partial[t] = acc;
        }
        double acc = init;
        for (int t = 0; t < nt; ++t)
            if (better(partial[t], acc)) acc = partial[t];
        return acc;
#endif
    }
    double acc = init;
    for (std::size_t i = 0; i < n; ++i)
        if (better(x[i], acc)) acc = x[i];
    return acc;
}

} // namespace

double min_value(const double* x, std::size_t n) {
    return extremum(x, n, std::numeric_limits<double>::infinity(),
                    [](double a, double b) { return a < b; });
}

double max_value(const double* x, std::size_t n) {
    return extremum(x, n, -std::numeric_limits<double>::infinity(),
                    [](double a, double b) { return a > b; });
}

double max_abs(const double* x, std::size_t n) {
    if (backend() == Backend::Parallel) {
#ifdef _OPENMP
        const int nt = omp_get_max_threads();
        std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
        {
            const int t = omp_get_thread_num();
            const std::size_t chunk = (n + nt - 1) / nt;
            const std::size_t lo = std::min(n, chunk * (std::size_t)t);
            const std::size_t hi = std::min(n, lo + chunk);
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) acc = std::max(acc, std::fabs(x[i]));
            partial[t] = acc;
        }
        double acc = 0.0;
        for (int t = 0; t < nt; ++t) acc = std::max(acc, partial[t]);
        return acc;
#endif
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc = std::max(acc, std::fabs(x[i]));
    return acc;
}

// ---------------------------------------------------------------- stencils

namespace {

inline void gradient_row(const double* f, int nx, int j, double ihx, double* fx) {
    const double* row = f + (std::size_t)j * nx;
    double* gx = fx + (std::size_t)j * (nx + 1);
    gx[0] = 0.0;
    for (int i = 1; i < nx; ++i) gx[i] = (row[i] - row[i - 1]) * ihx;
    gx[nx] = 0.0;
}

inline void gradient_yrow(const double* f, int nx, int j, double ihy, double* fy) {
    // y-face row j sits between cell rows j-1 and j; rows 0 and ny are walls.
    double* gy = fy + (std::size_t)j * nx;
    const double* lo = f + (std::size_t)(j - 1) * nx;
    const double* hi = f + (std::size_t)j * nx;
    for (int i = 0; i < nx; ++i) gy[i] = (hi[i] - lo[i]) * ihy;
}

} // namespace

void gradient_serial(const double* f, int nx, int ny, double hx, double hy,
                     double* fx, double* fy) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
    for (int j = 0; j < ny; ++j) gradient_row(f, nx, j, ihx, fx);
    for (int i = 0; i < nx; ++i) fy[i] = 0.0;
    for (int j = 1; j < ny; ++j) gradient_yrow(f, nx, j, ihy, fy);
    double* top = fy + (std::size_t)ny * nx;
    for (int i = 0; i < nx; ++i) top[i] = 0.0;
}

void gradient_omp(const double* f, int nx, int ny, double hx, double hy,
                  double* fx, double* fy) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) gradient_row(f, nx, j, ihx, fx);
#pragma omp parallel for schedule(static)
    for (int j = 0; j <= ny; ++j) {
        if (j == 0 || j == ny) {
            double* row = fy + (std::size_t)j * nx;
            for (int i = 0; i < nx; ++i) row[i] = 0.0;
        } else {
            gradient_yrow(f, nx, j, ihy, fy);
        }
    }
}

void gradient(const double* f, int nx, int ny, double hx, double hy,
              double* fx, double* fy) {
    if (backend() == Backend::Parallel) gradient_omp(f, nx, ny, hx, hy, fx, fy);
    else gradient_serial(f, nx, ny, hx, hy, fx, fy);
}

namespace {

inline void divergence_row(const double* fx, const double* fy, int nx, int j,
                           double ihx, double ihy, double* out) {
    const double* gx = fx + (std::size_t)j * (nx + 1);
    const double* gy_lo = fy + (std::size_t)j * nx;
    const double* gy_hi = fy + (std::size_t)(j + 1) * nx;
    double* o = out + (std::size_t)j * nx;
    for (int i = 0; i < nx; ++i)
        o[i] = (gx[i + 1] - gx[i]) * ihx + (gy_hi[i] - gy_lo[i]) * ihy;
}

} // namespace

void divergence_serial(const double* fx, const double* fy, int nx, int ny,
                       double hx, double hy, double* out) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
    for (int j = 0; j < ny; ++j) divergence_row(fx, fy, nx, j, ihx, ihy, out);
}

void divergence_omp(const double* fx, const double* fy, int nx, int ny,
                    double hx, double hy, double* out) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) divergence_row(fx, fy, nx, j, ihx, ihy, out);
}

void divergence(const double* fx, const double* fy, int nx, int ny,
                double hx, double hy, double* out) {
    if (backend() == Backend::Parallel) divergence_omp(fx, fy, nx, ny, hx, hy, out);
    else divergence_serial(fx, fy, nx, ny, hx, hy, out);
}

namespace {

// Same expressions as divergence_row applied to gradient_row output, fused.
inline void laplacian_row(const double* f, int nx, int ny, int j,
                          double ihx, double ihy, double* out) {
    const double* row = f + (std::size_t)j * nx;
    const double* lo = (j > 0) ? f + (std::size_t)(j - 1) * nx : nullptr;
    const double* hi = (j < ny - 1) ? f + (std::size_t)(j + 1) * nx : nullptr;
    double* o = out + (std::size_t)j * nx;
    for (int i = 0; i < nx; ++i) {
        const double gxl = (i > 0) ? (row[i] - row[i - 1]) * ihx : 0.0;
        const double gxr = (i < nx - 1) ? (row[i + 1] - row[i]) * ihx : 0.0;
        const double gyl = lo ? (row[i] - lo[i]) * ihy : 0.0;
        const double gyh = hi ? (hi[i] - row[i]) * ihy : 0.0;
        o[i] = (gxr - gxl) * ihx + (gyh - gyl) * ihy;
    }
}

} // namespace

void laplacian_serial(const double* f, int nx, int ny, double hx, double hy, double* out) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
    for (int j = 0; j < ny; ++j) laplacian_row(f, nx, ny, j, ihx, ihy, out);
}

void laplacian_omp(const double* f, int nx, int ny, double hx, double hy, double* out) {
    const double ihx = 1.0 / hx, ihy = 1.0 / hy;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) laplacian_row(f, nx, ny, j, ihx, ihy, out);
}

void laplacian(const double* f, int nx, int ny, double hx, double hy, double* out) {
    if (backend() == Backend::Parallel) laplacian_omp(f, nx, ny, hx, hy, out);
    else laplacian_serial(f, nx, ny, hx, hy, out);
}

namespace {

inline void advect_row_x(const double* phi, const double* ux, int nx, int j,
                         bool centered, double* fx) {
    const double* row = phi + (std::size_t)j * nx;
    const double* u = ux + (std::size_t)j * (nx + 1);
    double* o = fx + (std::size_t)j * (nx + 1);
    o[0] = 0.0;
    for (int i = 1; i < nx; ++i) {
        const double face = centered ? 0.5 * (row[i - 1] + row[i])
                                     : (u[i] > 0.0 ? row[i - 1] : row[i]);
        o[i] = u[i] * face;
    }
    o[nx] = 0.0;
}

inline void advect_row_y(const double* phi, const double* uy, int nx, int j,
                         bool centered, double* fy) {
    const double* lo = phi + (std::size_t)(j - 1) * nx;
    const double* hi = phi + (std::size_t)j * nx;
    const double* v = uy + (std::size_t)j * nx;
    double* o = fy + (std::size_t)j * nx;
    for (int i = 0; i < nx; ++i) {
        const double face = centered ? 0.5 * (lo[i] + hi[i])
                                     : (v[i] > 0.0 ? lo[i] : hi[i]);
        o[i] = v[i] * face;
    }
}

} // namespace

void advect_flux_serial(const double* phi, const double* ux, const double* uy,
                        int nx, int ny, bool centered, double* fx, double* fy) {
    for (int j = 0; j < ny; ++j) advect_row_x(phi, ux, nx, j, centered, fx);
    for (int i = 0; i < nx; ++i) fy[i] = 0.0;
    for (int j = 1; j < ny; ++j) advect_row_y(phi, uy, nx, j, centered, fy);
    double* top = fy + (std::size_t)ny * nx;
    for (int i = 0; i < nx; ++i) top[i] = 0.0;
}

void advect_flux_omp(const double* phi, const double* ux, const double* uy,
                     int nx, int ny, bool centered, double* fx, double* fy) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ny; ++j) advect_row_x(phi, ux, nx, j, centered, fx);
#pragma omp parallel for schedule(static)
    for (int j = 0; j <= ny; ++j) {
        if (j == 0 || j == ny) {
            double* row = fy + (std::size_t)j * nx;
            for (int i = 0; i < nx; ++i) row[i] = 0.0;
        } else {
            advect_row_y(phi, uy, nx, j, centered, fy);
        }
    }
}

void advect_flux(const double* phi, const double* ux, const double* uy,
                 int nx, int ny, bool centered, double* fx, double* fy) {
    if (backend() == Backend::Parallel)
        advect_flux_omp(phi, ux, uy, nx, ny, centered, fx, fy);
    else
        advect_flux_serial(phi, ux, uy, nx, ny, centered, fx, fy);
}

} // namespace chb::kernels

#include "chb/transforms.hpp"

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include <fftw3.h>

namespace chb {

namespace {
// FFTW plan creation is not thread-safe; execution on private buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

fftw_r2r_kind forward_kind(TransformKind k) {
    return k == TransformKind::NeumannCells ? FFTW_REDFT10 : FFTW_RODFT00;
}
fftw_r2r_kind inverse_kind(TransformKind k) {
    return k == TransformKind::NeumannCells ? FFTW_REDFT01 : FFTW_RODFT00;
}
double norm_factor(TransformKind k, int n) {
    // REDFT10 then REDFT01 multiplies by 2n; RODFT00 twice by 2(n+1).
    return k == TransformKind::NeumannCells ? 2.0 * n : 2.0 * (n + 1);
}
} // namespace

struct Transform2D::Impl {
    fftw_plan fwd = nullptr, inv = nullptr;
    double* buf_in = nullptr;
    double* buf_out = nullptr;
    double norm = 1.0;
    std::size_t n = 0;
    mutable std::mutex exec;  // buffers are shared; serialize executions
};

Transform2D::Transform2D(int rows, int cols, TransformKind row_kind, TransformKind col_kind)
    : impl_(std::make_unique<Impl>()), rows_(rows), cols_(cols) {
    impl_->n = (std::size_t)rows * cols;
    impl_->buf_in = fftw_alloc_real(impl_->n);
    impl_->buf_out = fftw_alloc_real(impl_->n);
    impl_->norm = 1.0 / (norm_factor(row_kind, rows) * norm_factor(col_kind, cols));
    std::lock_guard<std::mutex> lock(plan_mutex());
    impl_->fwd = fftw_plan_r2r_2d(rows, cols, impl_->buf_in, impl_->buf_out,
                                  forward_kind(row_kind), forward_kind(col_kind),
                                  FFTW_ESTIMATE);
    impl_->inv = fftw_plan_r2r_2d(rows, cols, impl_->buf_in, impl_->buf_out,
                                  inverse_kind(row_kind), inverse_kind(col_kind),
                                  FFTW_ESTIMATE);
    if (!impl_->fwd || !impl_->inv) throw std::runtime_error("fftw plan creation failed");
}

Transform2D::~Transform2D() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
    if (impl_->inv) fftw_destroy_plan(impl_->inv);
    fftw_free(impl_->buf_in);
    fftw_free(impl_->buf_out);
}

void Transform2D::forward(const double* in, double* out) const {
    std::lock_guard<std::mutex> lock(impl_->exec);
    std::memcpy(impl_->buf_in, in, impl_->n * sizeof(double));
    fftw_execute(impl_->fwd);
    std::memcpy(out, impl_->buf_out, impl_->n * sizeof(double));
}

void Transform2D::inverse(const double* in, double* out) const {
    std::lock_guard<std::mutex> lock(impl_->exec);
    std::memcpy(impl_->buf_in, in, impl_->n * sizeof(double));
    fftw_execute(impl_->inv);
    const double s = impl_->norm;
    for (std::size_t k = 0; k < impl_->n; ++k) out[k] = impl_->buf_out[k] * s;
}

std::shared_ptr<const Transform2D> get_transform(int rows, int cols,
                                                 TransformKind row_kind,
                                                 TransformKind col_kind) {
    struct Key {
        int rows, cols, rk, ck;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return ((std::size_t)k.rows * 1315423911u) ^ ((std::size_t)k.cols << 20) ^
                   ((std::size_t)k.rk << 2) ^ (std::size_t)k.ck;
        }
    };
    static std::mutex m;
    static std::unordered_map<Key, std::shared_ptr<const Transform2D>, KeyHash> cache;
    const Key key{rows, cols, (int)row_kind, (int)col_kind};
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto t = std::make_shared<const Transform2D>(rows, cols, row_kind, col_kind);
    cache.emplace(key, t);
    return t;
}

double Transform2D::eigenvalue(TransformKind kind, int k, int full_n, double h) {
    // NeumannCells: cosine mode k on full_n cells. DirichletInterior: sine
    // mode k+1 on full_n cells (array index 0 is the first interior mode).
    const int mode = kind == TransformKind::NeumannCells ? k : k + 1;
    const double c = std::cos(M_PI * mode / full_n);
    return (2.0 - 2.0 * c) / (h * h);
}

PoissonNeumann::PoissonNeumann(int nx, int ny, double hx, double hy)
    : t_(get_transform(ny, nx, TransformKind::NeumannCells, TransformKind::NeumannCells)),
      inv_eig_((std::size_t)nx * ny), work_((std::size_t)nx * ny) {
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double lam = Transform2D::eigenvalue(TransformKind::NeumannCells, i, nx, hx) +
                               Transform2D::eigenvalue(TransformKind::NeumannCells, j, ny, hy);
            inv_eig_[(std::size_t)j * nx + i] = (i == 0 && j == 0) ? 0.0 : 1.0 / lam;
        }
    }
}

void PoissonNeumann::solve(const std::vector<double>& rhs, std::vector<double>& q) const {
    t_->forward(rhs.data(), work_.data());
    for (std::size_t k = 0; k < work_.size(); ++k) work_[k] *= inv_eig_[k];
    q.resize(rhs.size());
    t_->inverse(work_.data(), q.data());
}

} // namespace chb

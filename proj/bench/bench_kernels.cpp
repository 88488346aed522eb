// Serial vs OpenMP kernel comparison. Run with
//   ./bench/chb_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "chb/kernels.hpp"

using namespace chb;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

struct Arrays {
    int nx, ny;
    double hx, hy;
    std::vector<double> f, fx, fy, out, ux, uy;

    explicit Arrays(int n)
        : nx(n), ny(n), hx(1.0 / n), hy(1.0 / n),
          f(random_vec((std::size_t)n * n, 1)),
          fx((std::size_t)(n + 1) * n, 0.0),
          fy((std::size_t)n * (n + 1), 0.0),
          out((std::size_t)n * n, 0.0),
          ux(random_vec((std::size_t)(n + 1) * n, 2)),
          uy(random_vec((std::size_t)n * (n + 1), 3)) {}
};

void bm_gradient_serial(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::gradient_serial(a.f.data(), a.nx, a.ny, a.hx, a.hy, a.fx.data(), a.fy.data());
        benchmark::ClobberMemory();
    }
}

void bm_gradient_omp(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::gradient_omp(a.f.data(), a.nx, a.ny, a.hx, a.hy, a.fx.data(), a.fy.data());
        benchmark::ClobberMemory();
    }
}

void bm_divergence_serial(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::divergence_serial(a.ux.data(), a.uy.data(), a.nx, a.ny, a.hx, a.hy,
                                   a.out.data());
        benchmark::ClobberMemory();
    }
}

void bm_divergence_omp(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::divergence_omp(a.ux.data(), a.uy.data(), a.nx, a.ny, a.hx, a.hy, a.out.data());
        benchmark::ClobberMemory();
    }
}

void bm_laplacian_serial(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::laplacian_serial(a.f.data(), a.nx, a.ny, a.hx, a.hy, a.out.data());
        benchmark::ClobberMemory();
    }
}

void bm_laplacian_omp(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::laplacian_omp(a.f.data(), a.nx, a.ny, a.hx, a.hy, a.out.data());
        benchmark::ClobberMemory();
    }
}

void bm_advect_serial(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::advect_flux_serial(a.f.data(), a.ux.data(), a.uy.data(), a.nx, a.ny, false,
                                    a.fx.data(), a.fy.data());
        benchmark::ClobberMemory();
    }
}

void bm_advect_omp(benchmark::State& state) {
    Arrays a((int)state.range(0));
    for (auto _ : state) {
        kernels::advect_flux_omp(a.f.data(), a.ux.data(), a.uy.data(), a.nx, a.ny, false,
                                 a.fx.data(), a.fy.data());
        benchmark::ClobberMemory();
    }
}

void bm_dot_serial(benchmark::State& state) {
    const std::size_t n = (std::size_t)state.range(0) * state.range(0);
    auto x = random_vec(n, 4), y = random_vec(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::dot_serial(x.data(), y.data(), n));
}

void bm_dot_omp(benchmark::State& state) {
    const std::size_t n = (std::size_t)state.range(0) * state.range(0);
    auto x = random_vec(n, 4), y = random_vec(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::dot_omp(x.data(), y.data(), n));
}

void bm_axpby_serial(benchmark::State& state) {
    const std::size_t n = (std::size_t)state.range(0) * state.range(0);
    auto x = random_vec(n, 6), y = random_vec(n, 7);
    for (auto _ : state) {
        kernels::axpby_serial(1.000001, x.data(), 0.999999, y.data(), n);
        benchmark::ClobberMemory();
    }
}

void bm_axpby_omp(benchmark::State& state) {
    const std::size_t n = (std::size_t)state.range(0) * state.range(0);
    auto x = random_vec(n, 6), y = random_vec(n, 7);
    for (auto _ : state) {
        kernels::axpby_omp(1.000001, x.data(), 0.999999, y.data(), n);
        benchmark::ClobberMemory();
    }
}

} // namespace

BENCHMARK(bm_gradient_serial)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_gradient_omp)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_divergence_serial)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_divergence_omp)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_laplacian_serial)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_laplacian_omp)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_advect_serial)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_advect_omp)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_dot_serial)->Arg(128)->Arg(512);
BENCHMARK(bm_dot_omp)->Arg(128)->Arg(512);
BENCHMARK(bm_axpby_serial)->Arg(128)->Arg(512);
BENCHMARK(bm_axpby_omp)->Arg(128)->Arg(512);

BENCHMARK_MAIN();

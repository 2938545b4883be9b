#include <benchmark/benchmark.h>

#include <vector>

#include "air/kernels.hpp"
#include "air/rng.hpp"

namespace {

std::vector<double> random_vec(std::size_t n) {
    air::Rng rng(n);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Shapes from a batched GRU step: (batch*agents) x input times input x 3*hidden.
template <auto Kernel>
void BM_Matmul(benchmark::State& state) {
    const std::size_t m = state.range(0), k = state.range(1), n = state.range(2);
    const auto a = random_vec(m * k);
    const auto b = random_vec(k * n);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        Kernel(a, b, c, m, k, n);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m * k * n));
}

BENCHMARK(BM_Matmul<air::kernels::matmul_reference>)->Args({96, 64, 192})->Args({512, 64, 192});
BENCHMARK(BM_Matmul<air::kernels::matmul>)->Args({96, 64, 192})->Args({512, 64, 192});

// Weight gradient: a^T g with a (m x k), g (m x n).
template <auto Kernel>
void BM_AtB(benchmark::State& state) {
    const std::size_t m = state.range(0), k = state.range(1), n = state.range(2);
    const auto a = random_vec(m * k);
    const auto g = random_vec(m * n);
    std::vector<double> c(k * n);
    for (auto _ : state) {
        Kernel(a, g, c, m, k, n);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m * k * n));
}

BENCHMARK(BM_AtB<air::kernels::matmul_at_b_reference>)->Args({96, 64, 192})->Args({512, 64, 192});
BENCHMARK(BM_AtB<air::kernels::matmul_at_b>)->Args({96, 64, 192})->Args({512, 64, 192});

// Input gradient: g b^T with g (m x n), b (k x n).
template <auto Kernel>
void BM_ABt(benchmark::State& state) {
    const std::size_t m = state.range(0), k = state.range(1), n = state.range(2);
    const auto g = random_vec(m * n);
    const auto b = random_vec(k * n);
    std::vector<double> c(m * k);
    for (auto _ : state) {
        Kernel(g, b, c, m, k, n);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m * k * n));
}

BENCHMARK(BM_ABt<air::kernels::matmul_a_bt_reference>)->Args({96, 64, 192})->Args({512, 64, 192});
BENCHMARK(BM_ABt<air::kernels::matmul_a_bt>)->Args({96, 64, 192})->Args({512, 64, 192});

// Oracle enumeration: |O|=2, |U|=3, horizon from the argument.
template <auto Kernel>
void BM_TrajectoryMasses(benchmark::State& state) {
    const std::size_t n_obs = 2, n_actions = 3, horizon = state.range(0);
    const auto w = random_vec(horizon * n_obs);
    std::vector<double> pi(n_obs * n_actions, 1.0 / n_actions);
    std::size_t size = 1;
    for (std::size_t t = 0; t < horizon; ++t) size *= n_obs * n_actions;
    std::vector<double> out(size);
    for (auto _ : state) {
        Kernel(w, pi, n_obs, n_actions, horizon, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(size));
}

BENCHMARK(BM_TrajectoryMasses<air::kernels::trajectory_masses_reference>)->Arg(4)->Arg(8);
BENCHMARK(BM_TrajectoryMasses<air::kernels::trajectory_masses>)->Arg(4)->Arg(8);

template <auto Kernel>
void BM_Sum(benchmark::State& state) {
    const auto x = random_vec(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_Sum<air::kernels::sum_reference>)->Arg(1 << 20);
BENCHMARK(BM_Sum<air::kernels::sum>)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();

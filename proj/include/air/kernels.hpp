#pragma once

#include <cstddef>
#include <span>

// Dense f64 kernels. Each kernel has a plain serial reference kept for
// testing and benchmarking, and an OpenMP version used by the library.
// Every output element of the parallel kernels is produced by a single
// thread with a fixed summation order, so results do not depend on the
// thread count.
namespace air::kernels {

// c (m x n) = a (m x k) * b (k x n)
void matmul_reference(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

// c (k x n) += a^T * g, with a (m x k) and g (m x n)
void matmul_at_b_reference(std::span<const double> a, std::span<const double> g,
                           std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// c (m x k) += g * b^T, with g (m x n) and b (k x n)
void matmul_a_bt_reference(std::span<const double> g, std::span<const double> b,
                           std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// Per-step factorised trajectory masses. For every index of the mixed-radix
// space of (o_0, u_0, ..., o_{T-1}, u_{T-1}) sequences (step 0 most
// significant, observation before action):
//   out[i] = prod_t policy[o_t * n_actions + u_t] * step_weight[t * n_obs + o_t]
void trajectory_masses_reference(std::span<const double> step_weight, std::span<const double> policy,
                                 std::size_t n_obs, std::size_t n_actions, std::size_t horizon,
                                 std::span<double> out);
void trajectory_masses(std::span<const double> step_weight, std::span<const double> policy,
                       std::size_t n_obs, std::size_t n_actions, std::size_t horizon, std::span<double> out);

// Sum with a fixed block partition, so the rounding does not depend on the
// number of threads.
double sum_reference(std::span<const double> x);
double sum(std::span<const double> x);

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace air::kernels

#include "air/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace air::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

// Eight doubles; GCC/Clang lower this to one AVX-512 register or to pairs
// of narrower ones.
using v8 = double __attribute__((vector_size(64)));
// Unaligned view for loads and stores. memcpy here made GCC keep the
// accumulator tile in memory and spill it on every k step.
using v8u = double __attribute__((vector_size(64), aligned(8), may_alias));

inline v8 load8(const double* p) { return *reinterpret_cast<const v8u*>(p); }

inline void store8(double* p, v8 v) { *reinterpret_cast<v8u*>(p) = v; }

// Register tile of MR rows by 8*NV columns of c += a * b. Every element is
// c + a[i,0] b[0,j] + a[i,1] b[1,j] + ... in that order, whatever the tile.
template <int MR, int NV>
inline void tile(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
    // the unroll pragmas let GCC keep acc in registers instead of
    // spilling the whole tile to the stack on every k step
    v8 acc[MR][NV];
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) acc[r][v] = load8(c + r * n + 8 * v);
    }
    for (std::size_t p = 0; p < k; ++p) {
        v8 bv[NV];
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) bv[v] = load8(b + p * n + 8 * v);
#pragma GCC unroll 8
        for (int r = 0; r < MR; ++r) {
            const double av = a[r * k + p];
#pragma GCC unroll 8
            for (int v = 0; v < NV; ++v) acc[r][v] += av * bv[v];
        }
    }
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) store8(c + r * n + 8 * v, acc[r][v]);
    }
}

// Columns left over after the 8-wide tiles: dot products of a row with a
// column of b, both contiguous once b's tail is transposed into bt
// (cols x k). Lanes accumulate p = l mod 8, then fold in a fixed order.
inline void narrow_cols(const double* a, const double* bt, double* c, std::size_t k, std::size_t n,
                        std::size_t cols, std::size_t rows) {
    const std::size_t k8 = k - k % 8;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a + r * k;
        for (std::size_t j = 0; j < cols; ++j) {
            const double* bj = bt + j * k;
            v8 acc{};
            for (std::size_t p = 0; p < k8; p += 8) acc += load8(ar + p) * load8(bj + p);
            double s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
            for (std::size_t p = k8; p < k; ++p) s += ar[p] * bj[p];
            c[r * n + j] += s;
        }
    }
}

template <int MR>
inline void row_block(const double* a, const double* b, const double* bt_tail, double* c, std::size_t k,
                      std::size_t n) {
    std::size_t j = 0;
    for (; j + 32 <= n; j += 32) tile<MR, 4>(a, b + j, c + j, k, n);
    for (; j + 16 <= n; j += 16) tile<MR, 2>(a, b + j, c + j, k, n);
    for (; j + 8 <= n; j += 8) tile<MR, 1>(a, b + j, c + j, k, n);
    if (j < n) narrow_cols(a, bt_tail, c + j, k, n, n - j, MR);
}

template <int MR>
void row_range(const double* a, const double* b, const double* bt_tail, double* c, std::size_t k, std::size_t n,
               std::size_t rows) {
    if constexpr (MR > 0) {
        if (rows == MR) {
            row_block<MR>(a, b, bt_tail, c, k, n);
        } else {
            row_range<MR - 1>(a, b, bt_tail, c, k, n, rows);
        }
    }
}

// c (m x n) += a (m x k) * b (k x n), all row-major and contiguous.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kRows = 6;
    // transposed copy of the columns the 8-wide tiles do not cover
    const std::size_t tail = n % 8;
    thread_local std::vector<double> bt;
    bt.resize(tail * k);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < tail; ++j) bt[j * k + p] = b[p * n + (n - tail) + j];
    }
    const double* bt_tail = bt.data();
    const long blocks = static_cast<long>((m + kRows - 1) / kRows);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
    for (long blk = 0; blk < blocks; ++blk) {
        const std::size_t i = static_cast<std::size_t>(blk) * kRows;
        const std::size_t rows = std::min(kRows, m - i);
        row_range<kRows>(a + i * k, b, bt_tail, c + i * n, k, n, rows);
    }
}

void transpose(const double* x, std::size_t rows, std::size_t cols, std::vector<double>& out) {
    out.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
    }
}

}  // namespace

void matmul_reference(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
    std::fill(c.begin(), c.begin() + static_cast<long>(m * n), 0.0);
    gemm_acc(a.data(), b.data(), c.data(), m, k, n);
}

void matmul_at_b_reference(std::span<const double> a, std::span<const double> g,
                           std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * g[i * n + j];
            c[p * n + j] += acc;
        }
    }
}

void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
    thread_local std::vector<double> at;
    transpose(a.data(), m, k, at);
    gemm_acc(at.data(), g.data(), c.data(), k, m, n);
}

void matmul_a_bt_reference(std::span<const double> g, std::span<const double> b,
                           std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
            c[i * k + p] += acc;
        }
    }
}

void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
    thread_local std::vector<double> bt;
    transpose(b.data(), k, n, bt);
    gemm_acc(g.data(), bt.data(), c.data(), m, n, k);
}

namespace {

inline double trajectory_mass(std::size_t index, const double* step_weight, const double* policy,
                              std::size_t n_obs, std::size_t n_actions, std::size_t horizon) {
    const std::size_t radix = n_obs * n_actions;
    // decode from the last step (least significant) backwards
    double mass = 1.0;
    for (std::size_t t = horizon; t-- > 0;) {
        const std::size_t digit = index % radix;
        index /= radix;
        const std::size_t o = digit / n_actions;
        const std::size_t u = digit % n_actions;
        mass *= policy[o * n_actions + u] * step_weight[t * n_obs + o];
    }
    return mass;
}

}  // namespace

void trajectory_masses_reference(std::span<const double> step_weight, std::span<const double> policy,
                                 std::size_t n_obs, std::size_t n_actions, std::size_t horizon,
                                 std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = trajectory_mass(i, step_weight.data(), policy.data(), n_obs, n_actions, horizon);
    }
}

void trajectory_masses(std::span<const double> step_weight, std::span<const double> policy,
                       std::size_t n_obs, std::size_t n_actions, std::size_t horizon, std::span<double> out) {
    const long count = static_cast<long>(out.size());
    const double* sw = step_weight.data();
    const double* pol = policy.data();
    double* o = out.data();
#pragma omp parallel for schedule(static) if (count >= 4096)
    for (long i = 0; i < count; ++i) o[i] = trajectory_mass(i, sw, pol, n_obs, n_actions, horizon);
}

double sum_reference(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

double sum(std::span<const double> x) {
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (x.size() + kBlock - 1) / kBlock;
    if (blocks <= 1) return sum_reference(x);
    std::vector<double> partial(blocks, 0.0);
    const long nb = static_cast<long>(blocks);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nb; ++b) {
        const std::size_t lo = b * kBlock, hi = std::min(x.size(), lo + kBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += x[i];
        partial[b] = s;
    }
    return sum_reference(partial);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, n));
#else
    (void)n;
#endif
}

}  // namespace air::kernels

#include "vmath.hpp"

#include <cmath>

#if defined(__AVX512F__) && defined(AIR_HAVE_LIBMVEC)
#include <immintrin.h>
extern "C" __m512d _ZGVeN8v_exp(__m512d);
extern "C" __m512d _ZGVeN8v_tanh(__m512d);
#define AIR_VMATH_AVX512 1
#endif

namespace air::vmath {

#ifdef AIR_VMATH_AVX512

namespace {

template <class V, class S>
void apply(const double* x, double* y, std::size_t n, V vec, S scalar_tail) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm512_storeu_pd(y + i, vec(_mm512_loadu_pd(x + i)));
    if (i < n) {
        // tail through the same vector routine so every element sees one code path
        const __mmask8 m = static_cast<__mmask8>((1u << (n - i)) - 1);
        const __m512d v = _mm512_mask_loadu_pd(_mm512_set1_pd(scalar_tail), m, x + i);
        _mm512_mask_storeu_pd(y + i, m, vec(v));
    }
}

}  // namespace

void exp(const double* x, double* y, std::size_t n) { apply(x, y, n, _ZGVeN8v_exp, 0.0); }
void tanh(const double* x, double* y, std::size_t n) { apply(x, y, n, _ZGVeN8v_tanh, 0.0); }
void logistic(const double* x, double* y, std::size_t n) {
    const __m512d one = _mm512_set1_pd(1.0);
    apply(x, y, n, [one](__m512d v) {
        const __m512d e = _ZGVeN8v_exp(_mm512_sub_pd(_mm512_setzero_pd(), v));
        return _mm512_div_pd(one, _mm512_add_pd(one, e));
    }, 0.0);
}

#else

void exp(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}
void tanh(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}
void logistic(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

#endif

}  // namespace air::vmath

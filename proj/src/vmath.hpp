#pragma once

#include <cstddef>

// Array exp/tanh/logistic. On AVX-512 builds these go through glibc's
// vector math library (within 4 ulp of libm); elsewhere they call libm
// per element. Results depend only on the input value, not on position
// or array length.
namespace air::vmath {

void exp(const double* x, double* y, std::size_t n);
void tanh(const double* x, double* y, std::size_t n);
// 1 / (1 + exp(-x)); saturates to exactly 0 or 1, never NaN
void logistic(const double* x, double* y, std::size_t n);

}  // namespace air::vmath

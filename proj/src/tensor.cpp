#include "air/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>

#include "air/error.hpp"

namespace air {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != element_count(shape_)) {
        throw ContractViolation("Tensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + air::shape_string(shape_));
    }
}

Tensor Tensor::uninitialized(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.resize(element_count(t.shape_));
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ContractViolation("Tensor::matrix: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
    if (shape_.size() != 2) throw ContractViolation("Tensor::rows on rank-" + std::to_string(rank()));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() != 2) throw ContractViolation("Tensor::cols on rank-" + std::to_string(rank()));
    return shape_[1];
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ContractViolation("Tensor::item on tensor of shape " + shape_string());
    }
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    // x * 0 is 0 for finite x and NaN for NaN or Inf, and NaN is sticky
    // under addition. Four independent vector sums keep the adds pipelined.
    using v8 = double __attribute__((vector_size(64)));
    using v8u = double __attribute__((vector_size(64), aligned(8), may_alias));
    const double* p = data_.data();
    const std::size_t n = data_.size();
    v8 s0{}, s1{}, s2{}, s3{};
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        s0 += *reinterpret_cast<const v8u*>(p + i) * 0.0;
        s1 += *reinterpret_cast<const v8u*>(p + i + 8) * 0.0;
        s2 += *reinterpret_cast<const v8u*>(p + i + 16) * 0.0;
        s3 += *reinterpret_cast<const v8u*>(p + i + 24) * 0.0;
    }
    const v8 s = (s0 + s1) + (s2 + s3);
    double tail = 0.0;
    for (int l = 0; l < 8; ++l) tail += s[l];
    for (; i < n; ++i) tail += p[i] * 0.0;
    return tail == 0.0;
}

std::string Tensor::shape_string() const { return air::shape_string(shape_); }

}  // namespace air

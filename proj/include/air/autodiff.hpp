#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "air/tensor.hpp"

// Minimal reverse-mode differentiation over rank-2 f64 tensors.
//
// A Tape is rebuilt for every forward pass. Parameters live in a
// ParameterStore outside the tape; backward() accumulates into
// Parameter::grad, so two backward passes without zero_grad() add up.
namespace air::ad {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Named tensors with paired gradient buffers. Copying a store yields an
// independent snapshot.
class ParameterStore {
public:
    Parameter& add(std::string name, std::vector<std::size_t> shape);
    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;
    bool contains(std::string_view name) const;

    void zero_grad();
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const noexcept;

    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    // Overwrite values from a store with identical names and shapes.
    void copy_values_from(const ParameterStore& other);
    // All parameters whose name starts with prefix.
    ParameterStore subset(std::string_view prefix) const;
    void merge(const ParameterStore& other);

private:
    std::deque<Parameter> params_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

enum class GradMode { enabled, disabled };

class Tape;

// Handle to a node on a Tape.
class Var {
public:
    Var() = default;
    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(GradMode mode = GradMode::enabled) : mode_(mode) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // One leaf per parameter per tape; repeated calls return the same node.
    Var parameter(Parameter& p);

    // Writes d loss / d p into every parameter reached from loss.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    bool grad_enabled() const noexcept { return mode_ == GradMode::enabled; }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    // Gradient of the last backward pass w.r.t. node id (empty if unreached).
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }

    // For primitive implementations.
    Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    Tensor& grad_buffer(std::size_t id);

private:
    struct Node {
        const char* op = "";
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    GradMode mode_;
    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
// Same shape, or b is a 1 x cols row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// scale * a + shift
Var affine(Var a, double scale, double shift = 0.0);
Var square(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var elu(Var a);
// GRU gate arithmetic for one step. gi = x W_ih + b_ih (R x 3H), hw = h W_hh
// (R x 3H, or a default Var when h is all zeros), b_hh (1 x 3H), h (R x H):
//   r = sigmoid(gi_r + gh_r), z = sigmoid(gi_z + gh_z),
//   c = tanh(gi_c + r gh_c), h' = c + z (h - c), with gh = hw + b_hh.
Var gru_gates(Var gi, Var hw, Var b_hh, Var h);
Var absolute(Var a);
// Row-wise log-softmax over consecutive column groups of width `group`
// (0 means the whole row).
Var log_softmax(Var a, std::size_t group = 0);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var a, std::size_t rows, std::size_t cols);
// out[r] = a[r, index[r]]
Var gather_cols(Var a, std::span<const std::size_t> index);
// Per-row vector-matrix product: out[b, j] = sum_i q[b, i] * w[b, i * m + j].
Var rowwise_bmm(Var q, Var w, std::size_t m);
Var row_sum(Var a);
Var sum(Var a);
// sum_ij weights_ij * a_ij
Var weighted_sum(Var a, const Tensor& weights);

}  // namespace air::ad

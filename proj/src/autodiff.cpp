#include "air/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "air/error.hpp"
#include "air/kernels.hpp"
#include "vmath.hpp"

namespace air::ad {

// --- ParameterStore -------------------------------------------------------

Parameter& ParameterStore::add(std::string name, std::vector<std::size_t> shape) {
    if (index_.contains(name)) throw ContractViolation("duplicate parameter name: " + name);
    index_.emplace(name, params_.size());
    Tensor value(shape);
    Tensor grad(std::move(shape));
    params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("unknown parameter: " + std::string(name));
    return params_[it->second];
}

const Parameter& ParameterStore::get(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("unknown parameter: " + std::string(name));
    return params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
    if (other.size() != size()) throw ContractViolation("copy_values_from: stores differ in size");
    for (auto& p : params_) {
        const Parameter& src = other.get(p.name);
        if (!src.value.same_shape(p.value)) {
            throw ContractViolation("copy_values_from: shape mismatch for " + p.name + ": " +
                                    p.value.shape_string() + " vs " + src.value.shape_string());
        }
        p.value = src.value;
    }
}

ParameterStore ParameterStore::subset(std::string_view prefix) const {
    ParameterStore out;
    for (const auto& p : params_) {
        if (p.name.starts_with(prefix)) out.add(p.name, p.value.shape()).value = p.value;
    }
    return out;
}

void ParameterStore::merge(const ParameterStore& other) {
    for (const auto& p : other) add(p.name, p.value.shape()).value = p.value;
}

// --- Tape -----------------------------------------------------------------

const Tensor& Var::value() const {
    if (!tape_) throw ContractViolation("Var: null handle");
    return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NumericFault("non-finite constant fed to tape");
    Node node;
    node.op = "constant";
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    if (p.value.rank() != 2) throw ContractViolation("parameter " + p.name + " is not rank-2");
    if (!p.value.all_finite()) throw NumericFault("non-finite value in parameter " + p.name);
    Node node;
    node.op = "parameter";
    node.value = p.value;
    node.param = grad_enabled() ? &p : nullptr;
    node.needs_grad = grad_enabled();
    nodes_.push_back(std::move(node));
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
    if (!value.all_finite()) throw NumericFault(std::string("non-finite output from ") + op);
    Node node;
    node.op = op;
    node.value = std::move(value);
    if (grad_enabled()) {
        for (const Var& v : inputs) {
            if (v.tape() != this) throw ContractViolation(std::string(op) + ": input from another tape");
            node.needs_grad = node.needs_grad || nodes_[v.id()].needs_grad;
        }
        if (node.needs_grad) node.backward = std::move(fn);
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractViolation("backward: loss belongs to another tape");
    const Tensor& lv = value(loss.id());
    if (lv.size() != 1) throw ContractViolation("backward: loss must be scalar, got " + lv.shape_string());
    if (!grad_enabled()) throw ContractViolation("backward: tape recorded without gradients");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(loss.id()).fill(1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.needs_grad) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
}

// --- primitives -----------------------------------------------------------

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ContractViolation(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                            b.shape_string());
}

template <class F>
Var unary(const char* op, Var a, F&& f, Tape::BackwardFn back) {
    const Tensor& av = a.value();
    Tensor out = Tensor::uninitialized(av.shape());
    auto in = av.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
    return a.tape()->record(op, std::move(out), {a}, std::move(back));
}

// Backward for y = f(x) where dy/dx is a function of (x, y).
template <class D>
Tape::BackwardFn pointwise_backward(std::size_t in, D&& dydx) {
    return [in, dydx](Tape& t, std::size_t self) {
        if (!t.needs_grad(in)) return;
        const auto x = t.value(in).data();
        const auto y = t.value(self).data();
        const auto g = t.grad(self).data();
        auto dx = t.grad_buffer(in).data();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * dydx(x[i], y[i]);
    };
}

}  // namespace

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out = Tensor::uninitialized({m, n});
    kernels::matmul(av.data(), bv.data(), out.data(), m, k, n);
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record("matmul", std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
        const auto g = t.grad(self).data();
        if (t.needs_grad(ia)) kernels::matmul_a_bt(g, t.value(ib).data(), t.grad_buffer(ia).data(), m, k, n);
        if (t.needs_grad(ib)) kernels::matmul_at_b(t.value(ia).data(), g, t.grad_buffer(ib).data(), m, k, n);
    });
}

Var add(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool broadcast = !av.same_shape(bv);
    if (broadcast && !(bv.rank() == 2 && av.rank() == 2 && bv.rows() == 1 && bv.cols() == av.cols())) {
        shape_error("add", av, bv);
    }
    Tensor out = av;
    auto o = out.data();
    auto bd = bv.data();
    if (broadcast) {
        const std::size_t c = av.cols();
        for (std::size_t i = 0; i < o.size(); i += c) {
            for (std::size_t j = 0; j < c; ++j) o[i + j] += bd[j];
        }
    } else {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record("add", std::move(out), {a, b}, [ia, ib, broadcast](Tape& t, std::size_t self) {
        const auto g = t.grad(self).data();
        if (t.needs_grad(ia)) {
            auto da = t.grad_buffer(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        }
        if (t.needs_grad(ib)) {
            auto db = t.grad_buffer(ib).data();
            if (broadcast) {
                const std::size_t c = db.size();
                for (std::size_t i = 0; i < g.size(); i += c) {
                    for (std::size_t j = 0; j < c; ++j) db[j] += g[i + j];
                }
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
            }
        }
    });
}

Var sub(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out = av;
    auto o = out.data();
    auto bd = bv.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record("sub", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
        const auto g = t.grad(self).data();
        if (t.needs_grad(ia)) {
            auto da = t.grad_buffer(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        }
        if (t.needs_grad(ib)) {
            auto db = t.grad_buffer(ib).data();
            for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out = av;
    auto o = out.data();
    auto bd = bv.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
        const auto g = t.grad(self).data();
        const auto x = t.value(ia).data();
        const auto y = t.value(ib).data();
        if (t.needs_grad(ia)) {
            auto da = t.grad_buffer(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
        }
        if (t.needs_grad(ib)) {
            auto db = t.grad_buffer(ib).data();
            for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
        }
    });
}

Var affine(Var a, double scale, double shift) {
    return unary("affine", a, [scale, shift](double x) { return scale * x + shift; },
                 pointwise_backward(a.id(), [scale](double, double) { return scale; }));
}

Var square(Var a) {
    return unary("square", a, [](double x) { return x * x; },
                 pointwise_backward(a.id(), [](double x, double) { return 2.0 * x; }));
}

namespace {

// Elementwise op whose forward runs over the whole array at once.
template <class F>
Var unary_array(const char* op, Var a, F&& f, Tape::BackwardFn back) {
    const Tensor& av = a.value();
    Tensor out = Tensor::uninitialized(av.shape());
    f(av.raw(), out.raw(), out.size());
    return a.tape()->record(op, std::move(out), {a}, std::move(back));
}

}  // namespace

Var sigmoid(Var a) {
    return unary_array("sigmoid", a, vmath::logistic,
                 pointwise_backward(a.id(), [](double, double y) { return y * (1.0 - y); }));
}

Var gru_gates(Var gi, Var hw, Var b_hh, Var h) {
    const bool has_hw = hw.tape() != nullptr;
    const std::size_t R = h.rows(), H = h.cols();
    if (gi.rows() != R || gi.cols() != 3 * H || b_hh.rows() != 1 || b_hh.cols() != 3 * H ||
        (has_hw && (hw.rows() != R || hw.cols() != 3 * H))) {
        throw ContractViolation("gru_gates: projected input " + gi.value().shape_string() + ", hidden product " +
                                (has_hw ? hw.value().shape_string() : std::string("none")) + ", bias " +
                                b_hh.value().shape_string() + ", state " + h.value().shape_string());
    }
    const double* x = gi.value().raw();
    const double* hp = has_hw ? hw.value().raw() : nullptr;
    const double* b = b_hh.value().raw();
    const double* hv = h.value().raw();
    Tensor out = Tensor::uninitialized({R, H});
    // saved per row: reset r, update z, candidate c, hidden candidate term gh_c
    auto saved = std::make_shared<Tensor>(Tensor::uninitialized({R, 4 * H}));
    double* o = out.raw();
    double* s = saved->raw();
    for (std::size_t i = 0; i < R; ++i) {
        const double* xi = x + i * 3 * H;
        const double* pi = hp ? hp + i * 3 * H : nullptr;
        double* si = s + i * 4 * H;
        // gh_c into the last block, r and z pre-activations into the first two
        for (std::size_t j = 0; j < 2 * H; ++j) si[j] = xi[j] + (pi ? pi[j] + b[j] : b[j]);
        for (std::size_t j = 0; j < H; ++j) si[3 * H + j] = pi ? pi[2 * H + j] + b[2 * H + j] : b[2 * H + j];
        vmath::logistic(si, si, 2 * H);
        for (std::size_t j = 0; j < H; ++j) si[2 * H + j] = xi[2 * H + j] + si[j] * si[3 * H + j];
        vmath::tanh(si + 2 * H, si + 2 * H, H);
        const double* prev = hv + i * H;
        double* oi = o + i * H;
        for (std::size_t j = 0; j < H; ++j) {
            const double z = si[H + j], cand = si[2 * H + j];
            oi[j] = cand + z * (prev[j] - cand);
        }
    }
    std::vector<Var> inputs{gi, b_hh, h};
    if (has_hw) inputs.push_back(hw);
    const std::size_t igi = gi.id(), ib = b_hh.id(), ih = h.id(), ihw = has_hw ? hw.id() : 0;
    return h.tape()->record("gru_gates", std::move(out), inputs, [=](Tape& t, std::size_t self) {
        const double* g = t.grad(self).raw();
        const double* hv2 = t.value(ih).raw();
        const double* sv = saved->raw();
        double* dgi = t.needs_grad(igi) ? t.grad_buffer(igi).raw() : nullptr;
        double* db = t.needs_grad(ib) ? t.grad_buffer(ib).raw() : nullptr;
        double* dh = t.needs_grad(ih) ? t.grad_buffer(ih).raw() : nullptr;
        double* dhw = has_hw && t.needs_grad(ihw) ? t.grad_buffer(ihw).raw() : nullptr;
        for (std::size_t i = 0; i < R; ++i) {
            const double* si = sv + i * 4 * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double gv = g[i * H + j];
                const double r = si[j], z = si[H + j], cand = si[2 * H + j], gc = si[3 * H + j];
                const double a_c = gv * (1.0 - z) * (1.0 - cand * cand);
                const double a_z = gv * (hv2[i * H + j] - cand) * z * (1.0 - z);
                const double a_r = a_c * gc * r * (1.0 - r);
                const double a_gc = a_c * r;
                if (dh) dh[i * H + j] += gv * z;
                if (dgi) {
                    double* d = dgi + i * 3 * H;
                    d[j] += a_r;
                    d[H + j] += a_z;
                    d[2 * H + j] += a_c;
                }
                if (dhw) {
                    double* d = dhw + i * 3 * H;
                    d[j] += a_r;
                    d[H + j] += a_z;
                    d[2 * H + j] += a_gc;
                }
                if (db) {
                    db[j] += a_r;
                    db[H + j] += a_z;
                    db[2 * H + j] += a_gc;
                }
            }
        }
    });
}

Var tanh(Var a) {
    return unary_array("tanh", a, vmath::tanh,
                 pointwise_backward(a.id(), [](double, double y) { return 1.0 - y * y; }));
}

Var relu(Var a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 pointwise_backward(a.id(), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }));
}

Var elu(Var a) {
    return unary("elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
                 pointwise_backward(a.id(), [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; }));
}

Var absolute(Var a) {
    return unary("abs", a, [](double x) { return std::abs(x); },
                 pointwise_backward(a.id(), [](double x, double) {
                     return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                 }));
}

Var log_softmax(Var a, std::size_t group) {
    const Tensor& av = a.value();
    const std::size_t cols = av.cols();
    if (group == 0) group = cols;
    if (cols % group != 0) {
        throw ContractViolation("log_softmax: width " + std::to_string(cols) +
                                " not divisible by group " + std::to_string(group));
    }
    Tensor out = Tensor::uninitialized(av.shape());
    const auto x = av.data();
    auto y = out.data();
    for (std::size_t start = 0; start < x.size(); start += group) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < group; ++j) mx = std::max(mx, x[start + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < group; ++j) s += std::exp(x[start + j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < group; ++j) y[start + j] = x[start + j] - lse;
    }
    const std::size_t ia = a.id();
    return a.tape()->record("log_softmax", std::move(out), {a}, [ia, group](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const auto g = t.grad(self).data();
        const auto y = t.value(self).data();
        auto dx = t.grad_buffer(ia).data();
        for (std::size_t start = 0; start < g.size(); start += group) {
            double gs = 0.0;
            for (std::size_t j = 0; j < group; ++j) gs += g[start + j];
            for (std::size_t j = 0; j < group; ++j) {
                dx[start + j] += g[start + j] - std::exp(y[start + j]) * gs;
            }
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
    }
    Tensor out = Tensor::uninitialized({rows, cols});
    std::vector<std::size_t> ids, widths;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        const std::size_t w = v.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(v.raw() + r * w, w, out.raw() + r * cols + offset);
        }
        ids.push_back(p.id());
        widths.push_back(w);
        offset += w;
    }
    return parts[0].tape()->record("concat_cols", std::move(out), parts,
                                   [ids, widths, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t off = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            const std::size_t w = widths[p];
            if (t.needs_grad(ids[p])) {
                Tensor& d = t.grad_buffer(ids[p]);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < w; ++c) d.raw()[r * w + c] += g.raw()[r * cols + off + c];
                }
            }
            off += w;
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Tensor& av = a.value();
    if (begin > end || end > av.cols()) {
        throw ContractViolation("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") outside " + av.shape_string());
    }
    const std::size_t rows = av.rows(), cols = av.cols(), w = end - begin;
    Tensor out = Tensor::uninitialized({rows, w});
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.raw() + r * cols + begin, w, out.raw() + r * w);
    const std::size_t ia = a.id();
    return a.tape()->record("slice_cols", std::move(out), {a}, [ia, rows, cols, begin, w](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const Tensor& g = t.grad(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) d.raw()[r * cols + begin + c] += g.raw()[r * w + c];
        }
    });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& av = a.value();
    if (begin > end || end > av.rows()) {
        throw ContractViolation("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") outside " + av.shape_string());
    }
    const std::size_t cols = av.cols();
    Tensor out = Tensor::uninitialized({end - begin, cols});
    std::copy(av.raw() + begin * cols, av.raw() + end * cols, out.raw());
    const std::size_t ia = a.id();
    return a.tape()->record("slice_rows", std::move(out), {a}, [ia, begin, cols](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const auto g = t.grad(self).data();
        double* d = t.grad_buffer(ia).raw() + begin * cols;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ContractViolation("concat_rows: no inputs");
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
    }
    Tensor out = Tensor::uninitialized({rows, cols});
    double* dst = out.raw();
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        const auto v = p.value().data();
        dst = std::copy(v.begin(), v.end(), dst);
        ids.push_back(p.id());
    }
    return parts[0].tape()->record("concat_rows", std::move(out), parts,
                                   [ids](Tape& t, std::size_t self) {
        const double* g = t.grad(self).raw();
        for (std::size_t id : ids) {
            const std::size_t n = t.value(id).size();
            if (t.needs_grad(id)) {
                double* d = t.grad_buffer(id).raw();
                for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
            }
            g += n;
        }
    });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    const Tensor& av = a.value();
    if (rows * cols != av.size()) {
        throw ContractViolation("reshape: " + av.shape_string() + " cannot become [" + std::to_string(rows) +
                                "x" + std::to_string(cols) + "]");
    }
    Tensor out = Tensor::uninitialized({rows, cols});
    std::copy(av.data().begin(), av.data().end(), out.raw());
    const std::size_t ia = a.id();
    return a.tape()->record("reshape", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const auto g = t.grad(self).data();
        auto d = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
}

Var gather_cols(Var a, std::span<const std::size_t> index) {
    const Tensor& av = a.value();
    const std::size_t rows = av.rows(), cols = av.cols();
    if (index.size() != rows) {
        throw ContractViolation("gather_cols: " + std::to_string(index.size()) + " indices for " +
                                av.shape_string());
    }
    Tensor out = Tensor::matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        if (index[r] >= cols) throw ContractViolation("gather_cols: index out of range");
        out[r] = av.at(r, index[r]);
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    const std::size_t ia = a.id();
    return a.tape()->record("gather_cols", std::move(out), {a}, [ia, idx = std::move(idx), cols](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const auto g = t.grad(self).data();
        auto d = t.grad_buffer(ia).data();
        for (std::size_t r = 0; r < idx.size(); ++r) d[r * cols + idx[r]] += g[r];
    });
}

Var rowwise_bmm(Var q, Var w, std::size_t m) {
    const Tensor& qv = q.value();
    const Tensor& wv = w.value();
    const std::size_t rows = qv.rows(), n = qv.cols();
    if (wv.rows() != rows || wv.cols() != n * m) shape_error("rowwise_bmm", qv, wv);
    Tensor out = Tensor::matrix(rows, m);
    for (std::size_t b = 0; b < rows; ++b) {
        const double* wr = wv.raw() + b * n * m;
        double* o = out.raw() + b * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double qi = qv.raw()[b * n + i];
            for (std::size_t j = 0; j < m; ++j) o[j] += qi * wr[i * m + j];
        }
    }
    const std::size_t iq = q.id(), iw = w.id();
    return q.tape()->record("rowwise_bmm", std::move(out), {q, w}, [iq, iw, rows, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(iq);
        const Tensor& wv = t.value(iw);
        if (t.needs_grad(iq)) {
            Tensor& dq = t.grad_buffer(iq);
            for (std::size_t b = 0; b < rows; ++b) {
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += g.raw()[b * m + j] * wv.raw()[b * n * m + i * m + j];
                    dq.raw()[b * n + i] += acc;
                }
            }
        }
        if (t.needs_grad(iw)) {
            Tensor& dw = t.grad_buffer(iw);
            for (std::size_t b = 0; b < rows; ++b) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double qi = qv.raw()[b * n + i];
                    for (std::size_t j = 0; j < m; ++j) dw.raw()[b * n * m + i * m + j] += qi * g.raw()[b * m + j];
                }
            }
        }
    });
}

Var row_sum(Var a) {
    const Tensor& av = a.value();
    const std::size_t rows = av.rows(), cols = av.cols();
    Tensor out = Tensor::matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += av.at(r, c);
        out[r] = s;
    }
    const std::size_t ia = a.id();
    return a.tape()->record("row_sum", std::move(out), {a}, [ia, cols](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const auto g = t.grad(self).data();
        auto d = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i / cols];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    const std::size_t ia = a.id();
    return a.tape()->record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const double g = t.grad(self)[0];
        for (double& d : t.grad_buffer(ia).data()) d += g;
    });
}

Var weighted_sum(Var a, const Tensor& weights) {
    const Tensor& av = a.value();
    if (!av.same_shape(weights)) shape_error("weighted_sum", av, weights);
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) s += weights[i] * av[i];
    const std::size_t ia = a.id();
    return a.tape()->record("weighted_sum", Tensor::scalar(s), {a}, [ia, weights](Tape& t, std::size_t self) {
        if (!t.needs_grad(ia)) return;
        const double g = t.grad(self)[0];
        auto d = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * weights[i];
    });
}

}  // namespace air::ad

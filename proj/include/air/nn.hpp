#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "air/autodiff.hpp"
#include "air/rng.hpp"

namespace air::nn {

enum class Activation { relu, identity, abs };

// widths = {in, h1, ..., out}; one activation per affine layer.
struct MlpSpec {
    std::vector<std::size_t> widths;
    std::vector<Activation> activations;

    void validate() const;
};

// Stack of affine layers. Parameters live in a store under
// "<prefix>.w<i>" (in x out) and "<prefix>.b<i>" (1 x out).
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, MlpSpec spec);

    void declare(ad::ParameterStore& store) const;
    void init(ad::ParameterStore& store, Rng& rng) const;
    ad::Var forward(ad::Tape& tape, ad::ParameterStore& store, ad::Var x) const;

    std::size_t in_width() const { return spec_.widths.front(); }
    std::size_t out_width() const { return spec_.widths.back(); }
    const MlpSpec& spec() const { return spec_; }

private:
    std::string prefix_;
    MlpSpec spec_;
};

struct GruCellSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 64;
};

// GRU cell with fused gate matrices, gate order (reset, update, candidate):
//   r  = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//   z  = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//   c  = tanh(x W_ic + b_ic + r * (h W_hc + b_hc))
//   h' = (1 - z) * c + z * h
class GruCell {
public:
    GruCell() = default;
    GruCell(std::string prefix, GruCellSpec spec);

    void declare(ad::ParameterStore& store) const;
    void init(ad::ParameterStore& store, Rng& rng) const;
    ad::Var step(ad::Tape& tape, ad::ParameterStore& store, ad::Var x, ad::Var h) const;
    // x W_ih + b_ih; lets an unroll project every timestep in one product.
    ad::Var input_projection(ad::Tape& tape, ad::ParameterStore& store, ad::Var x) const;
    // zero_hidden: h is known to be all zeros, so the hidden product is skipped
    ad::Var step_projected(ad::Tape& tape, ad::ParameterStore& store, ad::Var projected_x, ad::Var h,
                           bool zero_hidden = false) const;

    const GruCellSpec& spec() const { return spec_; }

private:
    std::string prefix_;
    GruCellSpec spec_;
};

// relu(x W + b) -> GRU -> linear head. Shared by the agent utilities and
// the identity classifier.
class RecurrentNet {
public:
    RecurrentNet() = default;
    RecurrentNet(std::string prefix, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim = 64);

    void declare(ad::ParameterStore& store) const;
    void init(ad::ParameterStore& store, Rng& rng) const;

    struct StepOut {
        ad::Var out;
        ad::Var hidden;
    };
    StepOut step(ad::Tape& tape, ad::ParameterStore& store, ad::Var input, ad::Var hidden) const;
    // inputs stacks `steps` blocks of `rows` rows, time-major; the hidden
    // state starts at zero. Returns the outputs stacked the same way.
    ad::Var unroll(ad::Tape& tape, ad::ParameterStore& store, ad::Var inputs, std::size_t steps,
                   std::size_t rows) const;
    ad::Var initial_hidden(ad::Tape& tape, std::size_t rows) const;

    std::size_t input_dim() const { return input_.in_width(); }
    std::size_t output_dim() const { return head_.out_width(); }
    std::size_t hidden_dim() const { return gru_.spec().hidden_dim; }

private:
    Mlp input_;
    GruCell gru_;
    Mlp head_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform(ad::Parameter& p, std::size_t fan_in, Rng& rng);

// Checkpoint encoding: "AIRCKPT1", u64 tensor count, then per tensor a
// u64-length-prefixed UTF-8 name, u64 rank, u64 dims and f64 data. All
// integers and floats little-endian.
std::vector<std::uint8_t> save_params(const ad::ParameterStore& store);
// Parses a whole checkpoint; throws FormatError without side effects.
ad::ParameterStore load_params(std::span<const std::uint8_t> bytes);
// Restores values into an existing store whose names and shapes must match
// the checkpoint exactly. Nothing is modified if validation fails.
void load_params_into(ad::ParameterStore& store, std::span<const std::uint8_t> bytes);

// Write via a temporary file and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace air::nn

#include "air/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "air/error.hpp"

namespace air::nn {

using ad::Var;

void MlpSpec::validate() const {
    if (widths.size() < 2) throw ContractViolation("MlpSpec: need at least one layer");
    if (activations.size() != widths.size() - 1) {
        throw ContractViolation("MlpSpec: " + std::to_string(widths.size() - 1) + " layers but " +
                                std::to_string(activations.size()) + " activations");
    }
    for (std::size_t w : widths) {
        if (w == 0) throw ContractViolation("MlpSpec: zero width");
    }
}

Mlp::Mlp(std::string prefix, MlpSpec spec) : prefix_(std::move(prefix)), spec_(std::move(spec)) {
    spec_.validate();
}

void Mlp::declare(ad::ParameterStore& store) const {
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        store.add(prefix_ + ".w" + std::to_string(l), {spec_.widths[l], spec_.widths[l + 1]});
        store.add(prefix_ + ".b" + std::to_string(l), {1, spec_.widths[l + 1]});
    }
}

void Mlp::init(ad::ParameterStore& store, Rng& rng) const {
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        init_uniform(store.get(prefix_ + ".w" + std::to_string(l)), spec_.widths[l], rng);
        init_uniform(store.get(prefix_ + ".b" + std::to_string(l)), spec_.widths[l], rng);
    }
}

Var Mlp::forward(ad::Tape& tape, ad::ParameterStore& store, Var x) const {
    if (x.cols() != in_width()) {
        throw ContractViolation(prefix_ + ": input width " + std::to_string(x.cols()) + ", expected " +
                                std::to_string(in_width()));
    }
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        Var w = tape.parameter(store.get(prefix_ + ".w" + std::to_string(l)));
        Var b = tape.parameter(store.get(prefix_ + ".b" + std::to_string(l)));
        x = ad::add(ad::matmul(x, w), b);
        switch (spec_.activations[l]) {
            case Activation::relu: x = ad::relu(x); break;
            case Activation::abs: x = ad::absolute(x); break;
            case Activation::identity: break;
        }
    }
    return x;
}

GruCell::GruCell(std::string prefix, GruCellSpec spec) : prefix_(std::move(prefix)), spec_(spec) {
    if (spec_.input_dim == 0 || spec_.hidden_dim == 0) throw ContractViolation("GruCellSpec: zero dimension");
}

void GruCell::declare(ad::ParameterStore& store) const {
    const std::size_t h3 = 3 * spec_.hidden_dim;
    store.add(prefix_ + ".w_ih", {spec_.input_dim, h3});
    store.add(prefix_ + ".w_hh", {spec_.hidden_dim, h3});
    store.add(prefix_ + ".b_ih", {1, h3});
    store.add(prefix_ + ".b_hh", {1, h3});
}

void GruCell::init(ad::ParameterStore& store, Rng& rng) const {
    for (const char* name : {".w_ih", ".w_hh", ".b_ih", ".b_hh"}) {
        init_uniform(store.get(prefix_ + name), spec_.hidden_dim, rng);
    }
}

Var GruCell::input_projection(ad::Tape& tape, ad::ParameterStore& store, Var x) const {
    if (x.cols() != spec_.input_dim) {
        throw ContractViolation(prefix_ + ": gru input " + x.value().shape_string() + ", expected [Bx" +
                                std::to_string(spec_.input_dim) + "]");
    }
    return ad::add(ad::matmul(x, tape.parameter(store.get(prefix_ + ".w_ih"))),
                   tape.parameter(store.get(prefix_ + ".b_ih")));
}

Var GruCell::step_projected(ad::Tape& tape, ad::ParameterStore& store, Var gi, Var h, bool zero_hidden) const {
    const std::size_t H = spec_.hidden_dim;
    if (gi.cols() != 3 * H || h.cols() != H || gi.rows() != h.rows()) {
        throw ContractViolation(prefix_ + ": gru_step got projected x " + gi.value().shape_string() + " and h " +
                                h.value().shape_string() + ", hidden width " + std::to_string(H));
    }
    Var hw = zero_hidden ? Var{} : ad::matmul(h, tape.parameter(store.get(prefix_ + ".w_hh")));
    return ad::gru_gates(gi, hw, tape.parameter(store.get(prefix_ + ".b_hh")), h);
}

Var GruCell::step(ad::Tape& tape, ad::ParameterStore& store, Var x, Var h) const {
    if (x.rows() != h.rows() || h.cols() != spec_.hidden_dim) {
        throw ContractViolation(prefix_ + ": gru_step got x " + x.value().shape_string() + " and h " +
                                h.value().shape_string() + ", expected [Bx" + std::to_string(spec_.input_dim) +
                                "] and [Bx" + std::to_string(spec_.hidden_dim) + "]");
    }
    return step_projected(tape, store, input_projection(tape, store, x), h);
}

RecurrentNet::RecurrentNet(std::string prefix, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim)
    : input_(prefix + ".fc_in", {{input_dim, hidden_dim}, {Activation::relu}}),
      gru_(prefix + ".gru", {hidden_dim, hidden_dim}),
      head_(prefix + ".head", {{hidden_dim, output_dim}, {Activation::identity}}) {}

void RecurrentNet::declare(ad::ParameterStore& store) const {
    input_.declare(store);
    gru_.declare(store);
    head_.declare(store);
}

void RecurrentNet::init(ad::ParameterStore& store, Rng& rng) const {
    input_.init(store, rng);
    gru_.init(store, rng);
    head_.init(store, rng);
}

RecurrentNet::StepOut RecurrentNet::step(ad::Tape& tape, ad::ParameterStore& store, Var input, Var hidden) const {
    Var h = gru_.step(tape, store, input_.forward(tape, store, input), hidden);
    return {head_.forward(tape, store, h), h};
}

Var RecurrentNet::unroll(ad::Tape& tape, ad::ParameterStore& store, Var inputs, std::size_t steps,
                         std::size_t rows) const {
    if (inputs.rows() != steps * rows) {
        throw ContractViolation("unroll: " + std::to_string(inputs.rows()) + " input rows for " +
                                std::to_string(steps) + " steps of " + std::to_string(rows));
    }
    // project every step at once; only the hidden-to-hidden product is sequential
    Var projected = gru_.input_projection(tape, store, input_.forward(tape, store, inputs));
    Var h = initial_hidden(tape, rows);
    std::vector<Var> hs;
    hs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        h = gru_.step_projected(tape, store, ad::slice_rows(projected, t * rows, (t + 1) * rows), h, t == 0);
        hs.push_back(h);
    }
    return head_.forward(tape, store, ad::concat_rows(hs));
}

Var RecurrentNet::initial_hidden(ad::Tape& tape, std::size_t rows) const {
    return tape.constant(Tensor::matrix(rows, gru_.spec().hidden_dim));
}

void init_uniform(ad::Parameter& p, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : p.value.data()) x = rng.uniform(-bound, bound);
}

// --- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'I', 'R', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(std::uint64_t len, const char* what) {
        need(len, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::uint64_t n, const char* what) {
        if (n > bytes_.size() - pos_) {
            throw FormatError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                              std::to_string(pos_));
        }
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_params(const ad::ParameterStore& store) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u64(out, store.size());
    for (const auto& p : store) {
        put_u64(out, p.name.size());
        out.insert(out.end(), p.name.begin(), p.name.end());
        put_u64(out, p.value.rank());
        for (std::size_t d : p.value.shape()) put_u64(out, d);
        for (double x : p.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
    }
    return out;
}

ad::ParameterStore load_params(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not an AIRCKPT1 checkpoint (bad magic/version)");
    }
    Reader in(bytes.subspan(sizeof(kMagic)));
    const std::uint64_t count = in.u64("tensor count");
    ad::ParameterStore store;
    for (std::uint64_t t = 0; t < count; ++t) {
        const std::uint64_t len = in.u64("name length");
        std::string name = in.str(len, "name");
        if (store.contains(name)) throw FormatError("checkpoint repeats tensor name " + name);
        const std::uint64_t rank = in.u64("rank");
        if (rank > 8) throw FormatError("checkpoint tensor " + name + " has implausible rank");
        std::vector<std::size_t> shape;
        std::uint64_t elems = 1;
        for (std::uint64_t r = 0; r < rank; ++r) {
            shape.push_back(in.u64("dims"));
            elems *= shape.back();
        }
        if (elems > in.remaining() / 8) throw FormatError("checkpoint truncated in data of " + name);
        std::vector<double> data(elems);
        for (auto& x : data) x = in.f64("data");
        ad::Parameter& p = store.add(name, shape);
        p.value = Tensor(std::move(shape), std::move(data));
    }
    if (!in.at_end()) throw FormatError("checkpoint has trailing bytes");
    return store;
}

void load_params_into(ad::ParameterStore& store, std::span<const std::uint8_t> bytes) {
    const ad::ParameterStore loaded = load_params(bytes);
    if (loaded.size() != store.size()) {
        throw FormatError("checkpoint holds " + std::to_string(loaded.size()) + " tensors, model expects " +
                          std::to_string(store.size()));
    }
    for (const auto& p : store) {
        if (!loaded.contains(p.name)) throw FormatError("checkpoint lacks tensor " + p.name);
        const auto& src = loaded.get(p.name);
        if (!src.value.same_shape(p.value)) {
            throw FormatError("checkpoint tensor " + p.name + " has shape " + src.value.shape_string() +
                              ", model expects " + p.value.shape_string());
        }
    }
    store.copy_values_from(loaded);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace air::nn

#include "air/value_decomposition.hpp"

#include <algorithm>
#include <limits>

#include "air/error.hpp"

namespace air::vd {

using ad::Var;

MixerKind parse_mixer(const std::string& name) {
    if (name == "vdn") return MixerKind::vdn;
    if (name == "qmix") return MixerKind::qmix;
    throw ContractViolation("unknown mixer '" + name + "' (expected vdn or qmix)");
}

const char* mixer_name(MixerKind kind) { return kind == MixerKind::vdn ? "vdn" : "qmix"; }

AgentQNet::AgentQNet(std::size_t obs_dim, std::size_t n_actions, std::size_t hidden_dim)
    : obs_dim_(obs_dim), n_actions_(n_actions), net_("agent", obs_dim + n_actions, n_actions, hidden_dim) {}

QmixMixer::QmixMixer(std::size_t n_agents, std::size_t state_dim, std::size_t embed_dim, std::size_t hyper_dim)
    : n_agents_(n_agents),
      state_dim_(state_dim),
      embed_dim_(embed_dim),
      hyper_w1_("mixer.hyper_w1", {{state_dim, hyper_dim, n_agents * embed_dim},
                                   {nn::Activation::relu, nn::Activation::abs}}),
      hyper_b1_("mixer.hyper_b1", {{state_dim, embed_dim}, {nn::Activation::identity}}),
      hyper_w2_("mixer.hyper_w2", {{state_dim, hyper_dim, embed_dim}, {nn::Activation::relu, nn::Activation::abs}}),
      hyper_b2_("mixer.hyper_b2", {{state_dim, embed_dim, 1}, {nn::Activation::relu, nn::Activation::identity}}) {}

void QmixMixer::declare(ad::ParameterStore& store) const {
    hyper_w1_.declare(store);
    hyper_b1_.declare(store);
    hyper_w2_.declare(store);
    hyper_b2_.declare(store);
}

void QmixMixer::init(ad::ParameterStore& store, Rng& rng) const {
    hyper_w1_.init(store, rng);
    hyper_b1_.init(store, rng);
    hyper_w2_.init(store, rng);
    hyper_b2_.init(store, rng);
}

Var QmixMixer::mix(ad::Tape& tape, ad::ParameterStore& store, Var q_chosen, Var state) const {
    if (q_chosen.cols() != n_agents_ || state.cols() != state_dim_ || q_chosen.rows() != state.rows()) {
        throw ContractViolation("qmix: q " + q_chosen.value().shape_string() + " and state " +
                                state.value().shape_string() + " do not fit " + std::to_string(n_agents_) +
                                " agents and state width " + std::to_string(state_dim_));
    }
    Var w1 = hyper_w1_.forward(tape, store, state);  // abs is the last activation
    Var b1 = hyper_b1_.forward(tape, store, state);
    Var hidden = ad::elu(ad::add(ad::rowwise_bmm(q_chosen, w1, embed_dim_), b1));
    Var w2 = hyper_w2_.forward(tape, store, state);
    Var b2 = hyper_b2_.forward(tape, store, state);
    return ad::add(ad::rowwise_bmm(hidden, w2, 1), b2);
}

double vdn_mix(std::span<const double> q_chosen) {
    if (q_chosen.empty()) throw ContractViolation("vdn_mix: no agents");
    double s = 0.0;
    for (double q : q_chosen) s += q;
    return s;
}

Var vdn_mix(Var q_chosen) { return ad::row_sum(q_chosen); }

ValueNets::ValueNets(MixerKind kind_, std::size_t n_agents, std::size_t obs_dim, std::size_t state_dim,
                     std::size_t n_actions, std::size_t hidden_dim, std::size_t embed_dim, std::size_t hyper_dim)
    : kind(kind_), agent(obs_dim, n_actions, hidden_dim) {
    if (kind == MixerKind::qmix) mixer = QmixMixer(n_agents, state_dim, embed_dim, hyper_dim);
}

void ValueNets::declare(ad::ParameterStore& store) const {
    agent.declare(store);
    if (kind == MixerKind::qmix) mixer.declare(store);
}

void ValueNets::init(ad::ParameterStore& store, Rng& rng) const {
    agent.init(store, rng);
    if (kind == MixerKind::qmix) mixer.init(store, rng);
}

Var ValueNets::mix(ad::Tape& tape, ad::ParameterStore& store, Var q_chosen, Var state) const {
    return kind == MixerKind::qmix ? mixer.mix(tape, store, q_chosen, state) : vdn_mix(q_chosen);
}

Tensor batch_inputs(const replay::EpisodeBatch& b, bool strip_id) {
    const std::size_t n = b.n_agents, U = b.n_actions, B = b.batch;
    const std::size_t feat = strip_id ? b.obs_dim - n : b.obs_dim;
    const std::size_t width = feat + U;
    const std::size_t steps = b.max_len + 1;
    Tensor x = Tensor::matrix(steps * B * n, width);
    double* out = x.raw();
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t row = (t * B + i) * n + k;
                const double* o = b.obs.data() + row * b.obs_dim;
                std::copy_n(o, feat, out + row * width);
                if (t > 0) {
                    const int prev = b.actions[((t - 1) * B + i) * n + k];
                    out[row * width + feat + static_cast<std::size_t>(prev)] = 1.0;
                }
            }
        }
    }
    return x;
}

std::vector<int> greedy_actions(const Tensor& q, std::span<const std::uint8_t> avail) {
    const std::size_t rows = q.rows(), U = q.cols();
    if (avail.size() != rows * U) throw ContractViolation("greedy_actions: mask size mismatch");
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        int best = -1;
        for (std::size_t u = 0; u < U; ++u) {
            if (!avail[r * U + u]) continue;
            if (best < 0 || q.at(r, u) > q.at(r, static_cast<std::size_t>(best))) best = static_cast<int>(u);
        }
        if (best < 0) throw ContractViolation("greedy_actions: row " + std::to_string(r) + " has no available action");
        out[r] = best;
    }
    return out;
}

std::vector<double> masked_max(const Tensor& q, std::span<const std::uint8_t> avail) {
    const auto idx = greedy_actions(q, avail);
    std::vector<double> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = q.at(r, static_cast<std::size_t>(idx[r]));
    return out;
}

TdLoss td_loss(ad::Tape& tape, const ValueNets& nets, ad::ParameterStore& online, ad::ParameterStore& target,
               const replay::EpisodeBatch& batch, double gamma) {
    const double valid = batch.valid_steps();
    if (batch.batch == 0 || valid <= 0.0) throw ContractViolation("td_loss: batch has no valid steps");
    const std::size_t n = batch.n_agents, U = batch.n_actions, B = batch.batch, L = batch.max_len;
    const std::size_t S = batch.state_dim;
    const std::size_t rows = B * n;
    const Tensor inputs = batch_inputs(batch, false);
    const std::size_t width = inputs.cols();

    // target side: utilities for steps 0..L, greedy per agent at t + 1.
    // Skipped when no real step bootstraps, e.g. one-shot games.
    Tensor y = Tensor::matrix(L * B, 1);
    for (std::size_t i = 0; i < L * B; ++i) y[i] = batch.reward[i];
    bool bootstraps = false;
    for (std::size_t i = 0; i < L * B; ++i) bootstraps = bootstraps || (batch.mask[i] > 0.0 && !batch.terminal[i]);
    TdLoss result;
    if (bootstraps) {
        ad::Tape frozen(ad::GradMode::disabled);
        Var q_next_all = nets.agent.unroll(frozen, target, frozen.constant(inputs), L + 1, rows);
        const Tensor& qv = q_next_all.value();
        const Tensor q_next({L * rows, U}, std::vector<double>(qv.raw() + rows * U, qv.raw() + (L + 1) * rows * U));
        const std::span<const std::uint8_t> avail_next(batch.avail.data() + rows * U, L * rows * U);
        result.target_actions = greedy_actions(q_next, avail_next);
        Tensor best = Tensor::matrix(L * B, n);
        for (std::size_t r = 0; r < L * rows; ++r) {
            best[r] = q_next.at(r, static_cast<std::size_t>(result.target_actions[r]));
        }
        const Tensor next_state({L * B, S}, std::vector<double>(batch.state.begin() + static_cast<long>(B * S),
                                                                batch.state.begin() + static_cast<long>((L + 1) * B * S)));
        const Tensor q_tot_next = nets.mix(frozen, target, frozen.constant(best), frozen.constant(next_state)).value();
        for (std::size_t i = 0; i < L * B; ++i) {
            if (!batch.terminal[i]) y[i] += gamma * q_tot_next[i];
        }
    }

    const Tensor head({L * rows, width}, std::vector<double>(inputs.raw(), inputs.raw() + L * rows * width));
    Var q_all = nets.agent.unroll(tape, online, tape.constant(head), L, rows);
    std::vector<std::size_t> chosen(batch.actions.begin(), batch.actions.end());
    Var q_chosen = ad::reshape(ad::gather_cols(q_all, chosen), L * B, n);
    const Tensor state({L * B, S}, std::vector<double>(batch.state.begin(), batch.state.begin() + static_cast<long>(L * B * S)));
    Var q_tot = nets.mix(tape, online, q_chosen, tape.constant(state));
    Tensor weights = Tensor::matrix(L * B, 1);
    for (std::size_t i = 0; i < L * B; ++i) weights[i] = batch.mask[i] / valid;
    result.loss = ad::weighted_sum(ad::square(ad::sub(q_tot, tape.constant(std::move(y)))), weights);
    return result;
}

}  // namespace air::vd

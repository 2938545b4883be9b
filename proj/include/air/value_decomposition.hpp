#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "air/autodiff.hpp"
#include "air/nn.hpp"
#include "air/replay.hpp"

namespace air::vd {

enum class MixerKind { vdn, qmix };

MixerKind parse_mixer(const std::string& name);
const char* mixer_name(MixerKind kind);

// Shared per-agent utility network over (observation with id, previous
// action one-hot). Parameters under "agent.".
class AgentQNet {
public:
    AgentQNet() = default;
    AgentQNet(std::size_t obs_dim, std::size_t n_actions, std::size_t hidden_dim = 64);

    void declare(ad::ParameterStore& store) const { net_.declare(store); }
    void init(ad::ParameterStore& store, Rng& rng) const { net_.init(store, rng); }

    // rows x input_dim() -> (q: rows x n_actions, hidden')
    nn::RecurrentNet::StepOut step(ad::Tape& tape, ad::ParameterStore& store, ad::Var input, ad::Var hidden) const {
        return net_.step(tape, store, input, hidden);
    }
    ad::Var unroll(ad::Tape& tape, ad::ParameterStore& store, ad::Var inputs, std::size_t steps,
                   std::size_t rows) const {
        return net_.unroll(tape, store, inputs, steps, rows);
    }
    ad::Var initial_hidden(ad::Tape& tape, std::size_t rows) const { return net_.initial_hidden(tape, rows); }

    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t input_dim() const { return obs_dim_ + n_actions_; }

private:
    std::size_t obs_dim_ = 0;
    std::size_t n_actions_ = 0;
    nn::RecurrentNet net_;
};

// Monotone mixer: hidden = elu(q W1(s) + b1(s)), Q_tot = hidden W2(s) + b2(s)
// with W1 = |hyper_w1(s)|, W2 = |hyper_w2(s)|. Parameters under "mixer.".
class QmixMixer {
public:
    QmixMixer() = default;
    QmixMixer(std::size_t n_agents, std::size_t state_dim, std::size_t embed_dim = 32, std::size_t hyper_dim = 64);

    void declare(ad::ParameterStore& store) const;
    void init(ad::ParameterStore& store, Rng& rng) const;
    // q_chosen: R x n, state: R x state_dim -> R x 1
    ad::Var mix(ad::Tape& tape, ad::ParameterStore& store, ad::Var q_chosen, ad::Var state) const;

    std::size_t n_agents() const { return n_agents_; }
    std::size_t state_dim() const { return state_dim_; }

private:
    std::size_t n_agents_ = 0;
    std::size_t state_dim_ = 0;
    std::size_t embed_dim_ = 0;
    nn::Mlp hyper_w1_, hyper_b1_, hyper_w2_, hyper_b2_;
};

double vdn_mix(std::span<const double> q_chosen);
// R x n -> R x 1
ad::Var vdn_mix(ad::Var q_chosen);

// The learner's networks. Agent and mixer parameters share one store.
struct ValueNets {
    MixerKind kind = MixerKind::qmix;
    AgentQNet agent;
    QmixMixer mixer;  // unused for VDN

    ValueNets() = default;
    ValueNets(MixerKind kind, std::size_t n_agents, std::size_t obs_dim, std::size_t state_dim,
              std::size_t n_actions, std::size_t hidden_dim = 64, std::size_t embed_dim = 32,
              std::size_t hyper_dim = 64);

    void declare(ad::ParameterStore& store) const;
    void init(ad::ParameterStore& store, Rng& rng) const;
    ad::Var mix(ad::Tape& tape, ad::ParameterStore& store, ad::Var q_chosen, ad::Var state) const;
};

// Agent inputs for every step 0..max_len of a batch: rows (t, episode, agent),
// columns = observation (id stripped when strip_id) then previous action
// one-hot (zero at t = 0).
Tensor batch_inputs(const replay::EpisodeBatch& batch, bool strip_id);

// Lowest-index argmax over available actions, one per row.
std::vector<int> greedy_actions(const Tensor& q, std::span<const std::uint8_t> avail);
// Max over available actions, one per row.
std::vector<double> masked_max(const Tensor& q, std::span<const std::uint8_t> avail);

struct TdLoss {
    ad::Var loss;
    // Per-agent greedy target actions at t + 1, rows (t, episode), n per row.
    // Empty when no valid step bootstraps.
    std::vector<int> target_actions;
};

// Mean over valid steps of (r + gamma (1 - terminal) Q_tot^-(tau', argmax) - Q_tot(tau, u))^2.
// The target maximizes each agent's target utility separately over its
// available actions and is treated as a constant. Recorded on `tape`.
TdLoss td_loss(ad::Tape& tape, const ValueNets& nets, ad::ParameterStore& online, ad::ParameterStore& target,
               const replay::EpisodeBatch& batch, double gamma);

}  // namespace air::vd

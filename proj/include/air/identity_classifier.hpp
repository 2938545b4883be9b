#pragma once

#include <vector>

#include "air/adam.hpp"
#include "air/nn.hpp"
#include "air/replay.hpp"

namespace air::clf {

// q(z | tau, u): recurrent encoder over (observation without id, previous
// action one-hot) with a |U| * n head. Entry u * n + k of a row is
// log q(z_k | tau, u); each group of n entries is a log-distribution.
// Parameters under "clf.".
class IdentityClassifier {
public:
    IdentityClassifier() = default;
    IdentityClassifier(std::size_t features, std::size_t n_agents, std::size_t n_actions, std::size_t hidden_dim = 64);

    void declare(ad::ParameterStore& store) const { net_.declare(store); }
    void init(ad::ParameterStore& store, Rng& rng) const { net_.init(store, rng); }

    // rows x input_dim() -> (log_q: rows x (n_actions * n_agents), hidden')
    nn::RecurrentNet::StepOut classify(ad::Tape& tape, ad::ParameterStore& store, ad::Var input,
                                       ad::Var hidden) const;
    ad::Var unroll(ad::Tape& tape, ad::ParameterStore& store, ad::Var inputs, std::size_t steps,
                   std::size_t rows) const;
    ad::Var initial_hidden(ad::Tape& tape, std::size_t rows) const { return net_.initial_hidden(tape, rows); }

    std::size_t features() const { return features_; }
    std::size_t n_agents() const { return n_agents_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t input_dim() const { return features_ + n_actions_; }

private:
    std::size_t features_ = 0;
    std::size_t n_agents_ = 0;
    std::size_t n_actions_ = 0;
    nn::RecurrentNet net_;
};

struct ClassifierStats {
    double mean_nll = 0.0;  // mean over valid (t, episode, agent) of -log q(z_k | tau_t, u_t)
    double accuracy = 0.0;  // argmax_k of the executed action's row equals the true id (ties: lowest k)
    // Per-agent mean of log q(z_k | tau_t, u_t); the overall mean is -mean_nll.
    std::vector<double> mean_log_q_per_agent;
    std::size_t count = 0;
};

// Statistics of the current parameters on a batch; no update.
ClassifierStats classifier_evaluate(const IdentityClassifier& net, ad::ParameterStore& store,
                                    const replay::EpisodeBatch& batch);

// One Adam step on the mean NLL. The returned statistics come from the
// forward pass before the update.
ClassifierStats classifier_train_step(const IdentityClassifier& net, ad::ParameterStore& store,
                                      ad::AdamState& adam, const replay::EpisodeBatch& batch, double lr);

}  // namespace air::clf

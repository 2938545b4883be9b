#include "air/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "air/error.hpp"

namespace air::replay {

double Episode::total_reward() const { return std::accumulate(reward.begin(), reward.end(), 0.0); }

void Episode::validate() const {
    const std::size_t L = length();
    auto expect = [](std::size_t got, std::size_t want, const char* what) {
        if (got != want) {
            throw ContractViolation(std::string("episode: ") + what + " has " + std::to_string(got) +
                                    " entries, expected " + std::to_string(want));
        }
    };
    if (L == 0) throw ContractViolation("episode: no steps");
    if (n_agents == 0 || n_actions == 0) throw ContractViolation("episode: no agents or actions");
    expect(obs.size(), (L + 1) * n_agents * obs_dim, "obs");
    expect(state.size(), (L + 1) * state_dim, "state");
    expect(avail.size(), (L + 1) * n_agents * n_actions, "avail");
    expect(actions.size(), L * n_agents, "actions");
    expect(terminal.size(), L, "terminal");
    for (std::size_t t = 0; t < L; ++t) {
        if ((terminal[t] != 0) != (t + 1 == L)) {
            throw ContractViolation("episode: terminal flag must be set exactly on the last step");
        }
        if (!std::isfinite(reward[t])) throw ContractViolation("episode: non-finite reward");
        for (std::size_t k = 0; k < n_agents; ++k) {
            const int u = actions[t * n_agents + k];
            if (u < 0 || static_cast<std::size_t>(u) >= n_actions ||
                !avail[(t * n_agents + k) * n_actions + static_cast<std::size_t>(u)]) {
                throw ContractViolation("episode: step " + std::to_string(t) + " agent " + std::to_string(k) +
                                        " took unavailable action " + std::to_string(u));
            }
        }
    }
    for (double x : obs) {
        if (!std::isfinite(x)) throw ContractViolation("episode: non-finite observation");
    }
}

double EpisodeBatch::valid_steps() const { return std::accumulate(mask.begin(), mask.end(), 0.0); }

EpisodeBatch make_batch(const std::vector<const Episode*>& episodes) {
    if (episodes.empty()) throw ContractViolation("make_batch: no episodes");
    const Episode& first = *episodes.front();
    EpisodeBatch b;
    b.batch = episodes.size();
    b.n_agents = first.n_agents;
    b.n_actions = first.n_actions;
    b.obs_dim = first.obs_dim;
    b.state_dim = first.state_dim;
    for (const Episode* e : episodes) {
        if (e->n_agents != b.n_agents || e->n_actions != b.n_actions || e->obs_dim != b.obs_dim ||
            e->state_dim != b.state_dim) {
            throw ContractViolation("make_batch: episodes from different environments");
        }
        b.max_len = std::max(b.max_len, e->length());
    }
    const std::size_t B = b.batch, n = b.n_agents, U = b.n_actions, O = b.obs_dim, S = b.state_dim;
    const std::size_t L = b.max_len;
    b.obs.assign((L + 1) * B * n * O, 0.0);
    b.state.assign((L + 1) * B * S, 0.0);
    b.avail.assign((L + 1) * B * n * U, 1);
    b.actions.assign(L * B * n, 0);
    b.reward.assign(L * B, 0.0);
    b.terminal.assign(L * B, 0);
    b.mask.assign(L * B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        const Episode& e = *episodes[i];
        const std::size_t len = e.length();
        for (std::size_t t = 0; t <= len; ++t) {
            std::copy_n(e.obs.begin() + static_cast<long>(t * n * O), n * O, b.obs.begin() + static_cast<long>((t * B + i) * n * O));
            std::copy_n(e.state.begin() + static_cast<long>(t * S), S, b.state.begin() + static_cast<long>((t * B + i) * S));
            std::copy_n(e.avail.begin() + static_cast<long>(t * n * U), n * U,
                        b.avail.begin() + static_cast<long>((t * B + i) * n * U));
        }
        for (std::size_t t = 0; t < len; ++t) {
            std::copy_n(e.actions.begin() + static_cast<long>(t * n), n, b.actions.begin() + static_cast<long>((t * B + i) * n));
            b.reward[t * B + i] = e.reward[t];
            b.terminal[t * B + i] = e.terminal[t];
            b.mask[t * B + i] = 1.0;
        }
    }
    return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push_episode(Episode episode) {
    episode.validate();
    if (!episodes_.empty()) {
        const Episode& f = episodes_.front();
        if (f.n_agents != episode.n_agents || f.n_actions != episode.n_actions || f.obs_dim != episode.obs_dim ||
            f.state_dim != episode.state_dim) {
            throw ContractViolation("ReplayBuffer: episode dimensions differ from stored episodes");
        }
    }
    if (episodes_.size() == capacity_) episodes_.pop_front();
    episodes_.push_back(std::move(episode));
    ++pushed_;
}

std::optional<std::vector<std::size_t>> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) throw ContractViolation("sample_batch: batch size must be positive");
    if (episodes_.size() < batch_size) return std::nullopt;
    // partial Fisher-Yates: the first batch_size slots are the draw
    std::vector<std::size_t> idx(episodes_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < batch_size; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(batch_size);
    return idx;
}

std::optional<EpisodeBatch> ReplayBuffer::sample_batch(std::size_t batch_size, Rng& rng) const {
    auto idx = sample_indices(batch_size, rng);
    if (!idx) return std::nullopt;
    std::vector<const Episode*> picked;
    for (std::size_t i : *idx) picked.push_back(&episodes_[i]);
    return make_batch(picked);
}

}  // namespace air::replay

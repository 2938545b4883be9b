#pragma once

#include <vector>

#include "air/env.hpp"
#include "air/replay.hpp"
#include "air/rng.hpp"

namespace air::testing {

// Episode with random observations (id suffix appended), states, rewards
// and actions; action `masked_action` is unavailable to every agent when >= 0.
inline replay::Episode random_episode(std::size_t n, std::size_t U, std::size_t features, std::size_t state_dim,
                                      std::size_t length, Rng& rng, int masked_action = -1) {
    replay::Episode e;
    e.n_agents = n;
    e.n_actions = U;
    e.obs_dim = features + n;
    e.state_dim = state_dim;
    for (std::size_t t = 0; t <= length; ++t) {
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> f(features);
            for (double& x : f) x = rng.normal();
            const auto o = env::append_agent_id(std::move(f), k, n);
            e.obs.insert(e.obs.end(), o.begin(), o.end());
            for (std::size_t u = 0; u < U; ++u) e.avail.push_back(static_cast<int>(u) != masked_action);
        }
        for (std::size_t i = 0; i < state_dim; ++i) e.state.push_back(rng.normal());
    }
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t k = 0; k < n; ++k) {
            int u;
            do {
                u = static_cast<int>(rng.index(U));
            } while (u == masked_action);
            e.actions.push_back(u);
        }
        e.reward.push_back(rng.normal());
        e.terminal.push_back(t + 1 == length);
    }
    return e;
}

inline replay::EpisodeBatch random_batch(std::size_t B, std::size_t n, std::size_t U, std::size_t features,
                                         std::size_t state_dim, std::size_t max_len, Rng& rng,
                                         int masked_action = -1) {
    std::vector<replay::Episode> eps;
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t len = 1 + rng.index(max_len);
        eps.push_back(random_episode(n, U, features, state_dim, len, rng, masked_action));
    }
    std::vector<const replay::Episode*> ptrs;
    for (const auto& e : eps) ptrs.push_back(&e);
    return replay::make_batch(ptrs);
}

}  // namespace air::testing

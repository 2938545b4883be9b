#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "air/rng.hpp"

namespace air::replay {

// One finished episode of L steps. Observation, state and mask arrays hold
// L + 1 entries: the last one is what the env emitted after the final step.
struct Episode {
    std::size_t n_agents = 0;
    std::size_t n_actions = 0;
    std::size_t obs_dim = 0;
    std::size_t state_dim = 0;

    std::vector<double> obs;             // [L+1][n][obs_dim]
    std::vector<double> state;           // [L+1][state_dim]
    std::vector<std::uint8_t> avail;     // [L+1][n][n_actions]
    std::vector<int> actions;            // [L][n]
    std::vector<double> reward;          // [L]
    std::vector<std::uint8_t> terminal;  // [L]; exactly the last entry set

    std::size_t length() const noexcept { return reward.size(); }
    double total_reward() const;
    // Sizes line up, actions are available, and only the last step is terminal.
    void validate() const;

    bool operator==(const Episode&) const = default;
};

// Time-major padded batch of B episodes. Rows at time t are ordered
// (episode, agent). Padded steps have mask 0, zero observations, action 0
// and every action available.
struct EpisodeBatch {
    std::size_t batch = 0;
    std::size_t max_len = 0;
    std::size_t n_agents = 0;
    std::size_t n_actions = 0;
    std::size_t obs_dim = 0;
    std::size_t state_dim = 0;

    std::vector<double> obs;             // [max_len+1][B][n][obs_dim]
    std::vector<double> state;           // [max_len+1][B][state_dim]
    std::vector<std::uint8_t> avail;     // [max_len+1][B][n][n_actions]
    std::vector<int> actions;            // [max_len][B][n]
    std::vector<double> reward;          // [max_len][B]
    std::vector<std::uint8_t> terminal;  // [max_len][B]
    std::vector<double> mask;            // [max_len][B], 1 on real steps

    double valid_steps() const;
};

// Pads episodes to the longest one, keeping their order.
EpisodeBatch make_batch(const std::vector<const Episode*>& episodes);

inline constexpr std::size_t kDefaultCapacity = 5000;
inline constexpr std::size_t kDefaultBatchSize = 32;

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity);

    // Validates, then appends; evicts the oldest episode at capacity.
    void push_episode(Episode episode);

    std::size_t size() const noexcept { return episodes_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    // Total episodes ever pushed.
    std::uint64_t pushed() const noexcept { return pushed_; }
    const Episode& at(std::size_t i) const { return episodes_.at(i); }

    // Indices of a uniform draw without replacement, in draw order;
    // nullopt while fewer than batch_size episodes are stored.
    std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size, Rng& rng) const;
    std::optional<EpisodeBatch> sample_batch(std::size_t batch_size, Rng& rng) const;

private:
    std::size_t capacity_;
    std::uint64_t pushed_ = 0;
    std::deque<Episode> episodes_;
};

}  // namespace air::replay

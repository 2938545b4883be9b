#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "air/rng.hpp"

namespace air::explore {

// Signed temperature and the running-mean target entropy it is anchored to.
struct TemperatureState {
    double alpha = 0.0;
    double target_entropy = 0.0;  // H-bar
    double ema_decay = 0.99;
};

// H-bar starts at ln n, the surprisal of a uniform classifier.
TemperatureState initial_temperature(std::size_t n_agents, double alpha0 = 0.0, double ema_decay = 0.99);

// q(u) - alpha * log q(z_k | tau, u); masked entries -inf.
std::vector<double> shaped_q(std::span<const double> q, std::span<const double> log_q_row, double alpha,
                             std::span<const std::uint8_t> mask);

// Lowest-index argmax over finite entries.
int greedy(std::span<const double> shaped);

// With probability epsilon a uniform draw over unmasked actions, otherwise
// the greedy action. The uniform draw is consumed only when exploring.
int select_action(std::span<const double> shaped, std::span<const std::uint8_t> mask, double epsilon, Rng& rng);

// H-bar <- decay * H-bar + (1 - decay) * stat, stat = mean -log q >= 0.
TemperatureState update_target_entropy(TemperatureState s, double batch_neg_log_q);

// alpha <- alpha + lr * (mean log q + H-bar). Returns the gradient through `grad`.
TemperatureState temperature_step(TemperatureState s, double mean_log_q, double lr, double* grad = nullptr);
TemperatureState temperature_step(TemperatureState s, std::span<const double> batch_log_q, double lr,
                                  double* grad = nullptr);

inline constexpr double kEpsilonStart = 1.0;
inline constexpr double kEpsilonFinish = 0.05;
inline constexpr double kEpsilonAnneal = 50000.0;

// max(finish, start - (start - finish) * step / anneal); with the defaults
// max(0.05, 1 - 0.95 * step / 50000).
double epsilon_at(std::uint64_t step, double start = kEpsilonStart, double finish = kEpsilonFinish,
                  double anneal_steps = kEpsilonAnneal);

}  // namespace air::explore

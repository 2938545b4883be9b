#include "air/air_explore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "air/error.hpp"

namespace air::explore {

TemperatureState initial_temperature(std::size_t n_agents, double alpha0, double ema_decay) {
    if (n_agents == 0) throw ContractViolation("initial_temperature: no agents");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ContractViolation("initial_temperature: decay must lie in (0, 1)");
    return {alpha0, std::log(static_cast<double>(n_agents)), ema_decay};
}

std::vector<double> shaped_q(std::span<const double> q, std::span<const double> log_q_row, double alpha,
                             std::span<const std::uint8_t> mask) {
    if (q.size() != log_q_row.size() || q.size() != mask.size()) {
        throw ContractViolation("shaped_q: q, log_q and mask sizes differ");
    }
    std::vector<double> out(q.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t u = 0; u < q.size(); ++u) {
        if (mask[u]) out[u] = alpha == 0.0 ? q[u] : q[u] - alpha * log_q_row[u];
    }
    return out;
}

int greedy(std::span<const double> shaped) {
    int best = -1;
    for (std::size_t u = 0; u < shaped.size(); ++u) {
        if (shaped[u] == -std::numeric_limits<double>::infinity()) continue;
        if (best < 0 || shaped[u] > shaped[static_cast<std::size_t>(best)]) best = static_cast<int>(u);
    }
    if (best < 0) throw ContractViolation("select_action: no available action");
    return best;
}

int select_action(std::span<const double> shaped, std::span<const std::uint8_t> mask, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("select_action: epsilon outside [0, 1]");
    if (shaped.size() != mask.size()) throw ContractViolation("select_action: mask size mismatch");
    std::size_t open = 0;
    for (auto m : mask) open += m ? 1 : 0;
    if (open == 0) throw ContractViolation("select_action: empty action mask");
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
        std::size_t pick = rng.index(open);
        for (std::size_t u = 0; u < mask.size(); ++u) {
            if (mask[u] && pick-- == 0) return static_cast<int>(u);
        }
    }
    return greedy(shaped);
}

TemperatureState update_target_entropy(TemperatureState s, double batch_neg_log_q) {
    if (!std::isfinite(batch_neg_log_q) || batch_neg_log_q < 0.0) {
        throw ContractViolation("update_target_entropy: statistic " + std::to_string(batch_neg_log_q) +
                                " is not a finite surprisal");
    }
    s.target_entropy = s.ema_decay * s.target_entropy + (1.0 - s.ema_decay) * batch_neg_log_q;
    return s;
}

TemperatureState temperature_step(TemperatureState s, double mean_log_q, double lr, double* grad) {
    if (!std::isfinite(mean_log_q) || mean_log_q > 0.0) {
        throw ContractViolation("temperature_step: mean log q must be finite and <= 0");
    }
    const double g = mean_log_q + s.target_entropy;
    s.alpha += lr * g;
    if (grad) *grad = g;
    return s;
}

TemperatureState temperature_step(TemperatureState s, std::span<const double> batch_log_q, double lr, double* grad) {
    if (batch_log_q.empty()) throw ContractViolation("temperature_step: empty batch");
    double sum = 0.0;
    for (double v : batch_log_q) {
        if (!std::isfinite(v) || v > 0.0) throw ContractViolation("temperature_step: log q must be finite and <= 0");
        sum += v;
    }
    return temperature_step(s, sum / static_cast<double>(batch_log_q.size()), lr, grad);
}

double epsilon_at(std::uint64_t step, double start, double finish, double anneal_steps) {
    const double e = start - (start - finish) * static_cast<double>(step) / anneal_steps;
    return std::max(finish, e);
}

}  // namespace air::explore

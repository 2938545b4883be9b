#include "air/matrix_game.hpp"

#include <algorithm>
#include <cmath>

#include "air/error.hpp"

namespace air::env {

void MatrixGameSpec::validate() const {
    if (n_agents == 0 || n_actions == 0) throw ContractViolation("matrix game: empty agent or action set");
    std::size_t joint = 1;
    for (std::size_t k = 0; k < n_agents; ++k) joint *= n_actions;
    if (payoff.size() != joint) {
        throw ContractViolation("matrix game " + name + ": payoff has " + std::to_string(payoff.size()) +
                                " entries, expected " + std::to_string(joint));
    }
    for (double p : payoff) {
        if (!std::isfinite(p)) throw ContractViolation("matrix game " + name + ": non-finite payoff");
    }
}

double MatrixGameSpec::max_payoff() const { return *std::max_element(payoff.begin(), payoff.end()); }
double MatrixGameSpec::min_payoff() const { return *std::min_element(payoff.begin(), payoff.end()); }

double MatrixGameSpec::payoff_at(std::span<const int> joint) const {
    std::size_t idx = 0;
    for (int u : joint) idx = idx * n_actions + static_cast<std::size_t>(u);
    return payoff.at(idx);
}

MatrixGameSpec climb_game() {
    return {"climb", 2, 3, {11, -30, 0,
                            -30, 7, 6,
                            0, 0, 5}};
}

MatrixGameSpec penalty_game(double k) {
    return {"penalty", 2, 3, {10, 0, k,
                              0, 2, 0,
                              k, 0, 10}};
}

MatrixGame::MatrixGame(MatrixGameSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

StepResult MatrixGame::observe() const {
    StepResult r;
    for (std::size_t k = 0; k < spec_.n_agents; ++k) r.observations.push_back(append_agent_id({1.0}, k, spec_.n_agents));
    r.state = {1.0};
    r.avail = all_available(spec_.n_agents, spec_.n_actions);
    return r;
}

StepResult MatrixGame::do_reset(std::uint64_t) {
    solved_ = false;
    return observe();
}

StepResult MatrixGame::do_step(std::span<const int> joint_action) {
    StepResult r = observe();
    r.reward = spec_.payoff_at(joint_action);
    r.terminated = true;
    solved_ = r.reward == spec_.max_payoff();
    return r;
}

}  // namespace air::env

#include "air/env.hpp"

#include <cmath>
#include <filesystem>

#include "air/error.hpp"
#include "air/matrix_game.hpp"
#include "air/spread_grid.hpp"
#include "air/tabular.hpp"

namespace air::env {

StepResult Environment::reset(std::uint64_t seed) {
    t_ = 0;
    StepResult r = do_reset(seed);
    avail_ = r.avail;
    done_ = false;
    return r;
}

StepResult Environment::step(std::span<const int> joint_action) {
    if (done_) throw ContractViolation(name() + ": step called on a finished episode; reset first");
    if (joint_action.size() != n_agents()) {
        throw ContractViolation(name() + ": joint action has " + std::to_string(joint_action.size()) +
                                " entries, expected " + std::to_string(n_agents()));
    }
    for (std::size_t k = 0; k < joint_action.size(); ++k) {
        const int u = joint_action[k];
        if (u < 0 || static_cast<std::size_t>(u) >= n_actions() || !avail_[k][u]) {
            throw ContractViolation(name() + ": agent " + std::to_string(k) + " chose unavailable action " +
                                    std::to_string(u));
        }
    }
    StepResult r = do_step(joint_action);
    ++t_;
    if (t_ >= horizon()) r.terminated = true;
    done_ = r.terminated;
    avail_ = r.avail;
    if (!std::isfinite(r.reward)) throw NumericFault(name() + ": non-finite reward");
    return r;
}

std::vector<double> append_agent_id(std::vector<double> features, std::size_t agent, std::size_t n_agents) {
    const std::size_t base = features.size();
    features.resize(base + n_agents, 0.0);
    features[base + agent] = 1.0;
    return features;
}

std::span<const double> strip_agent_id(std::span<const double> obs, std::size_t n_agents) {
    if (obs.size() < n_agents) throw ContractViolation("strip_agent_id: observation shorter than id block");
    return obs.first(obs.size() - n_agents);
}

std::vector<ActionMask> all_available(std::size_t n_agents, std::size_t n_actions) {
    return std::vector<ActionMask>(n_agents, ActionMask(n_actions, 1));
}

std::unique_ptr<Environment> make_env(std::string_view name) {
    if (name == "climb") return std::make_unique<MatrixGame>(climb_game());
    if (name == "penalty") return std::make_unique<MatrixGame>(penalty_game());
    if (name == "spread") return std::make_unique<SpreadGrid>(SpreadGridSpec{});
    const std::filesystem::path path(name);
    if (std::filesystem::exists(path)) return std::make_unique<TabularDecPomdp>(load_tabular_spec(path));
    throw ContractViolation("unknown environment '" + std::string(name) +
                            "' (expected climb, penalty, spread or a tabular spec file)");
}

}  // namespace air::env

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace air::env {

using ActionMask = std::vector<std::uint8_t>;

struct StepResult {
    // Per agent; every observation ends with the agent's one-hot id.
    std::vector<std::vector<double>> observations;
    std::vector<double> state;
    double reward = 0.0;
    bool terminated = false;
    std::vector<ActionMask> avail;
};

// Dec-POMDP environment with a shared global reward.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual std::size_t n_agents() const = 0;
    virtual std::size_t n_actions() const = 0;
    // Includes the n_agents-wide id suffix.
    virtual std::size_t obs_dim() const = 0;
    virtual std::size_t state_dim() const = 0;
    virtual std::size_t horizon() const = 0;
    virtual std::unique_ptr<Environment> clone() const = 0;

    // Deterministic given seed; zeroes the step counter.
    StepResult reset(std::uint64_t seed);
    // Rejects actions outside the current masks with a ContractViolation
    // naming the agent and action.
    StepResult step(std::span<const int> joint_action);

    std::size_t t() const noexcept { return t_; }
    // Whether the episode that just terminated reached the task optimum.
    virtual bool solved() const { return false; }

protected:
    virtual StepResult do_reset(std::uint64_t seed) = 0;
    virtual StepResult do_step(std::span<const int> joint_action) = 0;

    std::size_t t_ = 0;

private:
    std::vector<ActionMask> avail_;
    bool done_ = true;
};

std::vector<double> append_agent_id(std::vector<double> features, std::size_t agent, std::size_t n_agents);
// Observation without its trailing id block.
std::span<const double> strip_agent_id(std::span<const double> obs, std::size_t n_agents);
std::vector<ActionMask> all_available(std::size_t n_agents, std::size_t n_actions);

// "climb", "penalty", "spread", or a path to a tabular spec file.
std::unique_ptr<Environment> make_env(std::string_view name);

}  // namespace air::env

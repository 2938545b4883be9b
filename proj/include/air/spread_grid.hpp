#pragma once

#include <array>
#include <vector>

#include "air/env.hpp"

namespace air::env {

// Landmark-spread gridworld. Agents move {up, down, left, right, stay};
// each step pays -(sum over landmarks of the nearest agent's Manhattan
// distance) / (n_landmarks * (width - 1 + height - 1)), and the final step
// adds the number of landmarks occupied by exactly one agent.
struct SpreadGridSpec {
    std::size_t width = 4;
    std::size_t height = 4;
    std::size_t n_agents = 3;
    std::size_t n_landmarks = 3;
    std::size_t horizon = 8;

    void validate() const;
};

class SpreadGrid final : public Environment {
public:
    using Cell = std::array<int, 2>;  // (x, y)

    enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };

    explicit SpreadGrid(SpreadGridSpec spec);

    std::string name() const override { return "spread"; }
    std::size_t n_agents() const override { return spec_.n_agents; }
    std::size_t n_actions() const override { return 5; }
    std::size_t obs_dim() const override;
    std::size_t state_dim() const override;
    std::size_t horizon() const override { return spec_.horizon; }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<SpreadGrid>(*this); }
    bool solved() const override { return solved_; }

    const SpreadGridSpec& spec() const { return spec_; }
    const std::vector<Cell>& agents() const { return agents_; }
    const std::vector<Cell>& landmarks() const { return landmarks_; }
    // Landmarks holding exactly one agent.
    std::size_t covered_landmarks() const;

protected:
    StepResult do_reset(std::uint64_t seed) override;
    StepResult do_step(std::span<const int> joint_action) override;

private:
    StepResult observe() const;
    double shaping() const;

    SpreadGridSpec spec_;
    std::vector<Cell> agents_;
    std::vector<Cell> landmarks_;
    bool solved_ = false;
};

}  // namespace air::env

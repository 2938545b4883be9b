#pragma once

#include <string>
#include <vector>

#include "air/env.hpp"

namespace air::env {

// One-shot cooperative game; payoff indexed by joint action in mixed radix
// with agent 0 most significant.
struct MatrixGameSpec {
    std::string name;
    std::size_t n_agents = 2;
    std::size_t n_actions = 3;
    std::vector<double> payoff;

    void validate() const;
    double max_payoff() const;
    double min_payoff() const;
    double payoff_at(std::span<const int> joint) const;
};

// Classic climb game, optimum 11 at (0, 0).
MatrixGameSpec climb_game();
// Penalty game with off-diagonal penalty k at (0, 2) and (2, 0); optimum 10.
MatrixGameSpec penalty_game(double k = -100.0);

class MatrixGame final : public Environment {
public:
    explicit MatrixGame(MatrixGameSpec spec);

    std::string name() const override { return spec_.name; }
    std::size_t n_agents() const override { return spec_.n_agents; }
    std::size_t n_actions() const override { return spec_.n_actions; }
    std::size_t obs_dim() const override { return 1 + spec_.n_agents; }
    std::size_t state_dim() const override { return 1; }
    std::size_t horizon() const override { return 1; }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<MatrixGame>(*this); }
    bool solved() const override { return solved_; }

    const MatrixGameSpec& spec() const { return spec_; }

protected:
    StepResult do_reset(std::uint64_t seed) override;
    StepResult do_step(std::span<const int> joint_action) override;

private:
    StepResult observe() const;
    MatrixGameSpec spec_;
    bool solved_ = false;
};

}  // namespace air::env

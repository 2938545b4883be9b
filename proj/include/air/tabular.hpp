#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "air/env.hpp"
#include "air/rng.hpp"

namespace air::env {

// Fully enumerable Dec-POMDP. Joint actions are indexed in mixed radix with
// agent 0 most significant.
struct TabularDecPomdpSpec {
    std::size_t n_agents = 1;
    std::size_t n_states = 1;
    std::size_t n_actions = 1;
    std::size_t n_obs = 1;
    std::size_t horizon = 1;
    double gamma = 0.99;
    std::vector<double> initial;      // [s]
    std::vector<double> transition;   // [s][joint][s']
    std::vector<double> observation;  // [k][s][o]
    std::vector<double> reward;       // [s][joint]

    std::size_t joint_count() const;
    std::size_t joint_index(std::span<const int> joint) const;
    double p(std::size_t s, std::size_t joint, std::size_t next) const {
        return transition[(s * joint_count() + joint) * n_states + next];
    }
    double o(std::size_t agent, std::size_t s, std::size_t obs) const {
        return observation[(agent * n_states + s) * n_obs + obs];
    }
    double r(std::size_t s, std::size_t joint) const { return reward[s * joint_count() + joint]; }

    // Probability rows sum to 1 within 1e-12, tables are finite and sized.
    void validate() const;
    bool shared_observation() const;
};

// FNV-1a 64 over the little-endian bytes of initial, transition,
// observation and reward, in that order.
std::uint64_t table_checksum(const TabularDecPomdpSpec& spec);

// JSON text with a "checksum" entry ahead of the tables.
std::string dump_tabular_spec(const TabularDecPomdpSpec& spec);
TabularDecPomdpSpec parse_tabular_spec(const std::string& text);
TabularDecPomdpSpec load_tabular_spec(const std::filesystem::path& path);

// Random spec with Dirichlet(1)-style rows; shared O when requested.
TabularDecPomdpSpec random_tabular_spec(std::size_t n_agents, std::size_t n_states, std::size_t n_actions,
                                        std::size_t n_obs, std::size_t horizon, bool shared_obs, Rng& rng);

// Reactive tabular policy pi(u | o).
struct TabularPolicy {
    std::size_t n_obs = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;  // [o][u]

    double operator()(std::size_t obs, std::size_t action) const { return probs[obs * n_actions + action]; }
    void validate() const;

    static TabularPolicy uniform(std::size_t n_obs, std::size_t n_actions);
    static TabularPolicy deterministic(std::size_t n_obs, std::size_t n_actions, std::size_t action);
    // Softmax of N(0, scale^2) logits.
    static TabularPolicy random_softmax(std::size_t n_obs, std::size_t n_actions, Rng& rng, double scale = 1.5);
};

// Observation/action sequences (o_0, u_0, ..., o_{T-1}, u_{T-1}) of one
// agent, indexed in mixed radix with step 0 most significant.
struct TrajectorySpace {
    std::size_t n_obs = 0;
    std::size_t n_actions = 0;
    std::size_t horizon = 0;

    std::uint64_t size() const;
    void decode(std::uint64_t index, std::span<int> obs, std::span<int> actions) const;
    std::uint64_t encode(std::span<const int> obs, std::span<const int> actions) const;
};

constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;

// |S|^T * |U|^(nT) * |O|^T, saturating at UINT64_MAX.
std::uint64_t enumeration_size(const TabularDecPomdpSpec& spec);

struct SupportEnumeration {
    TrajectorySpace space;
    // P(s_t) by forward filtering under the joint policy: [t][s].
    std::vector<std::vector<double>> state_marginals;
    // sum_s P(s_t) O(o | s, k): [k][t * n_obs + o].
    std::vector<std::vector<double>> obs_marginals;
    // Per-agent mass prod_t pi^k(u_t | o_t) sum_s P(s_t) O(o_t | s_t, k),
    // indexed by TrajectorySpace: [k][index].
    std::vector<std::vector<double>> masses;
};

enum class Execution { serial, parallel };

// Throws BudgetExceeded when enumeration_size(spec) > budget.
SupportEnumeration enumerate_support(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                                     std::uint64_t budget = kDefaultEnumerationBudget,
                                     Execution exec = Execution::parallel);

// Environment wrapper: observation = one-hot(o) + id, state = one-hot(s).
class TabularDecPomdp final : public Environment {
public:
    explicit TabularDecPomdp(TabularDecPomdpSpec spec);

    std::string name() const override { return "tabular"; }
    std::size_t n_agents() const override { return spec_.n_agents; }
    std::size_t n_actions() const override { return spec_.n_actions; }
    std::size_t obs_dim() const override { return spec_.n_obs + spec_.n_agents; }
    std::size_t state_dim() const override { return spec_.n_states; }
    std::size_t horizon() const override { return spec_.horizon; }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularDecPomdp>(*this); }

    const TabularDecPomdpSpec& spec() const { return spec_; }
    std::size_t current_state() const { return state_; }

protected:
    StepResult do_reset(std::uint64_t seed) override;
    StepResult do_step(std::span<const int> joint_action) override;

private:
    StepResult observe();
    std::size_t sample(std::span<const double> probs);

    TabularDecPomdpSpec spec_;
    Rng rng_;
    std::size_t state_ = 0;
};

}  // namespace air::env

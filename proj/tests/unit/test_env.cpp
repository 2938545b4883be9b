#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "air/error.hpp"
#include "air/matrix_game.hpp"
#include "air/spread_grid.hpp"
#include "air/tabular.hpp"
#include "doctest.h"

using namespace air;
using namespace air::env;

namespace {

// Two-action env where action 1 of agent 1 is masked off.
class MaskedToy final : public Environment {
public:
    std::string name() const override { return "masked"; }
    std::size_t n_agents() const override { return 2; }
    std::size_t n_actions() const override { return 2; }
    std::size_t obs_dim() const override { return 3; }
    std::size_t state_dim() const override { return 1; }
    std::size_t horizon() const override { return 3; }
    std::unique_ptr<Environment> clone() const override { return std::make_unique<MaskedToy>(*this); }

protected:
    StepResult do_reset(std::uint64_t) override { return obs(); }
    StepResult do_step(std::span<const int>) override { return obs(); }

private:
    static StepResult obs() {
        StepResult r;
        r.observations = {append_agent_id({1.0}, 0, 2), append_agent_id({1.0}, 1, 2)};
        r.state = {1.0};
        r.avail = {{1, 1}, {1, 0}};
        return r;
    }
};

TabularDecPomdpSpec chain(std::size_t horizon) {
    // 2 states, 1 agent, 2 actions, 2 observations; action 1 flips the state
    TabularDecPomdpSpec s;
    s.n_agents = 1;
    s.n_states = 2;
    s.n_actions = 2;
    s.n_obs = 2;
    s.horizon = horizon;
    s.initial = {0.7, 0.3};
    s.transition = {0.9, 0.1, 0.2, 0.8, 0.4, 0.6, 0.5, 0.5};
    s.observation = {0.75, 0.25, 0.1, 0.9};
    s.reward = {1, 0, 0, 2};
    return s;
}

}  // namespace

TEST_CASE("reset is deterministic given the seed") {
    for (const char* name : {"climb", "penalty", "spread"}) {
        auto a = make_env(name);
        auto b = make_env(name);
        CHECK(a->reset(17).observations == b->reset(17).observations);
        CHECK(a->reset(17).state == b->reset(17).state);
    }
    SpreadGrid g{SpreadGridSpec{}};
    CHECK(g.reset(1).observations != g.reset(2).observations);
}

TEST_CASE("matrix game observation is a constant plus the agent id") {
    auto env = make_env("climb");
    auto r = env->reset(0);
    REQUIRE(r.observations.size() == 2);
    CHECK(r.observations[0] == std::vector<double>{1.0, 1.0, 0.0});
    CHECK(r.observations[1] == std::vector<double>{1.0, 0.0, 1.0});
    CHECK(env->obs_dim() == 3);
}

TEST_CASE("climb payoffs match the fixed table") {
    const double expected[3][3] = {{11, -30, 0}, {-30, 7, 6}, {0, 0, 5}};
    MatrixGame g(climb_game());
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            g.reset(0);
            const int joint[2] = {a, b};
            auto r = g.step(joint);
            CHECK(r.reward == expected[a][b]);
            CHECK(r.terminated);
            CHECK(g.solved() == (a == 0 && b == 0));
        }
    }
    CHECK(climb_game().max_payoff() == 11.0);
    const auto pen = penalty_game();
    CHECK(pen.max_payoff() == 10.0);
    CHECK(pen.min_payoff() == -100.0);
    const int corner[2] = {0, 2};
    CHECK(pen.payoff_at(corner) == -100.0);
}

TEST_CASE("spread grid seed 0 matches the recorded layout") {
    // recorded from an independent mt19937_64 + Fisher-Yates implementation
    SpreadGrid g{SpreadGridSpec{}};
    g.reset(0);
    using C = SpreadGrid::Cell;
    CHECK(g.landmarks() == std::vector<C>{{3, 1}, {0, 2}, {1, 2}});
    CHECK(g.agents() == std::vector<C>{{3, 3}, {2, 2}, {0, 3}});
    CHECK(g.obs_dim() == 16);
    CHECK(g.state_dim() == 13);
}

TEST_CASE("spread grid pays n when every landmark holds one agent") {
    SpreadGrid g{SpreadGridSpec{}};
    g.reset(0);
    using A = SpreadGrid::Action;
    const std::vector<std::array<int, 3>> plan = {
        {A::kUp, A::kLeft, A::kUp}, {A::kUp, A::kStay, A::kStay}};
    double total = 0.0;
    StepResult r;
    for (std::size_t t = 0; t < g.horizon(); ++t) {
        const auto& j = t < plan.size() ? plan[t] : std::array<int, 3>{A::kStay, A::kStay, A::kStay};
        r = g.step(j);
        total += r.reward;
        CHECK(r.terminated == (t + 1 == g.horizon()));
    }
    CHECK(r.reward == doctest::Approx(3.0));
    CHECK(g.covered_landmarks() == 3);
    CHECK(g.solved());
    CHECK(total <= 3.0);
}

TEST_CASE("spread returns stay within [-T, n] under random play") {
    SpreadGrid g{SpreadGridSpec{}};
    Rng rng(3);
    for (std::uint64_t ep = 0; ep < 200; ++ep) {
        g.reset(ep);
        double ret = 0.0;
        bool done = false;
        while (!done) {
            std::array<int, 3> j{};
            for (int& u : j) u = static_cast<int>(rng.index(5));
            auto r = g.step(j);
            ret += r.reward;
            done = r.terminated;
        }
        CHECK(ret >= -static_cast<double>(g.horizon()));
        CHECK(ret <= 3.0);
    }
}

TEST_CASE("step terminates at the horizon and refuses further steps") {
    SpreadGrid g{SpreadGridSpec{}};
    g.reset(5);
    const std::array<int, 3> stay{4, 4, 4};
    for (std::size_t t = 0; t + 1 < g.horizon(); ++t) CHECK_FALSE(g.step(stay).terminated);
    CHECK(g.step(stay).terminated);
    CHECK_THROWS_AS(g.step(stay), ContractViolation);
}

TEST_CASE("masked action is rejected naming agent and action") {
    MaskedToy env;
    env.reset(0);
    const int ok[2] = {1, 0};
    CHECK_NOTHROW(env.step(ok));
    const int bad[2] = {0, 1};
    try {
        env.step(bad);
        FAIL("masked action accepted");
    } catch (const ContractViolation& e) {
        CHECK(std::string(e.what()).find("agent 1 chose unavailable action 1") != std::string::npos);
    }
    const int out_of_range[2] = {2, 0};
    CHECK_THROWS_AS(env.step(out_of_range), ContractViolation);
}

TEST_CASE("strip_agent_id drops exactly the id block") {
    const auto obs = append_agent_id({0.5, 0.25}, 1, 3);
    CHECK(obs == std::vector<double>{0.5, 0.25, 0, 1, 0});
    auto s = strip_agent_id(obs, 3);
    CHECK(std::vector<double>(s.begin(), s.end()) == std::vector<double>{0.5, 0.25});
}

TEST_CASE("enumerate_support: degenerate chain gives the policy") {
    TabularDecPomdpSpec s;
    s.initial = {1.0};
    s.n_actions = 2;
    s.transition = {1.0, 1.0};
    s.observation = {1.0};
    s.reward = {0.0, 0.0};
    const TabularPolicy pi{1, 2, {0.3, 0.7}};
    const auto e = enumerate_support(s, std::span(&pi, 1));
    REQUIRE(e.masses[0].size() == 2);
    CHECK(e.masses[0][0] == 0.3);
    CHECK(e.masses[0][1] == 0.7);
}

TEST_CASE("enumerate_support: uniform two-step policy gives four quarters") {
    TabularDecPomdpSpec s;
    s.n_actions = 2;
    s.horizon = 2;
    s.initial = {1.0};
    s.transition = {1.0, 1.0};
    s.observation = {1.0};
    s.reward = {0.0, 0.0};
    const auto pi = TabularPolicy::uniform(1, 2);
    const auto e = enumerate_support(s, std::span(&pi, 1));
    REQUIRE(e.masses[0].size() == 4);
    for (double m : e.masses[0]) CHECK(m == 0.25);
}

TEST_CASE("enumerate_support: stochastic chain normalizes and filters forward") {
    const auto s = chain(3);
    const TabularPolicy pi{2, 2, {0.6, 0.4, 0.2, 0.8}};
    const auto e = enumerate_support(s, std::span(&pi, 1), kDefaultEnumerationBudget, Execution::serial);
    double total = 0.0;
    for (double m : e.masses[0]) total += m;
    CHECK(std::abs(total - 1.0) <= 1e-12);

    // P(s_1) by hand: action law in state s is sum_o O(o|s) pi(u|o)
    const double a0[2] = {0.75 * 0.4 + 0.25 * 0.8, 0.1 * 0.4 + 0.9 * 0.8};  // P(u=1 | s)
    const double p1 = 0.7 * ((1 - a0[0]) * 0.9 + a0[0] * 0.2) + 0.3 * ((1 - a0[1]) * 0.4 + a0[1] * 0.5);
    CHECK(e.state_marginals[1][0] == doctest::Approx(p1).epsilon(1e-14));

    const auto par = enumerate_support(s, std::span(&pi, 1), kDefaultEnumerationBudget, Execution::parallel);
    CHECK(par.masses == e.masses);
}

TEST_CASE("enumerate_support: random multi-agent specs normalize") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_tabular_spec(2, 2, 2, 2, 2, trial % 2 == 0, rng);
        std::vector<TabularPolicy> pis;
        for (int k = 0; k < 2; ++k) pis.push_back(TabularPolicy::random_softmax(2, 2, rng));
        const auto e = enumerate_support(s, pis);
        for (const auto& m : e.masses) {
            CHECK(std::abs(std::accumulate(m.begin(), m.end(), 0.0) - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("enumerate_support refuses over budget with the computed size") {
    const auto s = chain(4);
    const auto pi = TabularPolicy::uniform(2, 2);
    CHECK(enumeration_size(s) == 16 * 16 * 16);
    try {
        enumerate_support(s, std::span(&pi, 1), 1000);
        FAIL("budget ignored");
    } catch (const BudgetExceeded& e) {
        CHECK(e.required() == 4096);
        CHECK(e.budget() == 1000);
    }
}

TEST_CASE("trajectory index round-trips") {
    const TrajectorySpace sp{3, 2, 3};
    CHECK(sp.size() == 216);
    std::vector<int> o(3), u(3);
    for (std::uint64_t i = 0; i < sp.size(); ++i) {
        sp.decode(i, o, u);
        CHECK(sp.encode(o, u) == i);
    }
    sp.decode(1, o, u);
    CHECK(u[2] == 1);  // last step is least significant
}

TEST_CASE("tabular spec file round-trip and refusal") {
    Rng rng(4);
    const auto spec = random_tabular_spec(2, 3, 2, 2, 2, false, rng);
    const std::string text = dump_tabular_spec(spec);
    const auto back = parse_tabular_spec(text);
    CHECK(back.transition == spec.transition);
    CHECK(back.observation == spec.observation);
    CHECK(table_checksum(back) == table_checksum(spec));

    CHECK_THROWS_AS(parse_tabular_spec("{not json"), FormatError);
    CHECK_THROWS_AS(parse_tabular_spec(text.substr(0, text.size() / 2)), FormatError);

    std::string tampered = text;
    const auto pos = tampered.find("\"reward\"");
    REQUIRE(pos != std::string::npos);
    const auto digit = tampered.find_first_of("123456789", pos);
    tampered[digit] = tampered[digit] == '9' ? '8' : static_cast<char>(tampered[digit] + 1);
    try {
        parse_tabular_spec(tampered);
        FAIL("tampered table accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }

    std::string missing = text;
    missing.replace(missing.find("\"horizon\""), 9, "\"horizin\"");
    try {
        parse_tabular_spec(missing);
        FAIL("missing key accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("horizon") != std::string::npos);
    }

    const auto path = std::filesystem::temp_directory_path() / "air_test_spec.json";
    std::ofstream(path) << text;
    auto env = make_env(path.string());
    CHECK(env->n_agents() == 2);
    CHECK(env->obs_dim() == 4);
    std::filesystem::remove(path);
}

TEST_CASE("bad probability rows are refused") {
    auto s = chain(2);
    s.transition[0] = 0.95;
    CHECK_THROWS_AS(s.validate(), ContractViolation);
    s = chain(2);
    s.observation[3] = -0.1;
    CHECK_THROWS_AS(s.validate(), ContractViolation);
}

TEST_CASE("tabular env samples its tables") {
    auto s = chain(2);
    s.observation = {1, 0, 0, 1};  // state fully observed
    TabularDecPomdp env(s);
    std::size_t state0 = 0;
    const int n = 4000;
    for (int ep = 0; ep < n; ++ep) {
        auto r = env.reset(static_cast<std::uint64_t>(ep));
        CHECK(r.observations[0][env.current_state()] == 1.0);
        state0 += env.current_state() == 0;
    }
    CHECK(static_cast<double>(state0) / n == doctest::Approx(0.7).epsilon(0.05));
    env.reset(1);
    const std::size_t before = env.current_state();
    const int u[1] = {1};
    CHECK(env.step(u).reward == s.r(before, 1));
}

#include <numeric>

#include "air/error.hpp"
#include "air/replay.hpp"
#include "doctest.h"
#include "stats.hpp"

using namespace air;
using replay::Episode;

namespace {

// 2 agents, 3 actions, obs width 2, state width 1; `tag` makes episodes distinct.
Episode make_episode(std::size_t length, double tag) {
    Episode e;
    e.n_agents = 2;
    e.n_actions = 3;
    e.obs_dim = 2;
    e.state_dim = 1;
    for (std::size_t t = 0; t <= length; ++t) {
        for (int k = 0; k < 2; ++k) {
            e.obs.push_back(tag);
            e.obs.push_back(static_cast<double>(t));
        }
        e.state.push_back(tag + 0.5);
        e.avail.insert(e.avail.end(), 6, 1);
    }
    for (std::size_t t = 0; t < length; ++t) {
        e.actions.push_back(static_cast<int>(t % 3));
        e.actions.push_back(static_cast<int>((t + 1) % 3));
        e.reward.push_back(tag * 0.25 + static_cast<double>(t));
        e.terminal.push_back(t + 1 == length);
    }
    return e;
}

}  // namespace

TEST_CASE("push, capacity and FIFO eviction") {
    replay::ReplayBuffer buf;
    CHECK(buf.capacity() == 5000);
    buf.push_episode(make_episode(2, 0));
    CHECK(buf.size() == 1);
    for (int i = 1; i <= 5000; ++i) buf.push_episode(make_episode(1, i));
    CHECK(buf.size() == 5000);
    CHECK(buf.pushed() == 5001);
    CHECK(buf.at(0).obs[0] == 1.0);  // episode 0 is gone
    CHECK(buf.at(4999).obs[0] == 5000.0);
}

TEST_CASE("stored episodes come back bit-identical") {
    replay::ReplayBuffer buf(4);
    Episode e = make_episode(3, 0.1);
    e.reward[1] = -0.0;
    e.reward[2] = 4.9406564584124654e-324;
    buf.push_episode(e);
    CHECK(buf.at(0) == e);
    CHECK(std::signbit(buf.at(0).reward[1]));
}

TEST_CASE("malformed episodes are refused") {
    replay::ReplayBuffer buf(4);
    Episode e = make_episode(3, 0);
    e.terminal[0] = 1;
    CHECK_THROWS_AS(buf.push_episode(e), ContractViolation);
    e = make_episode(3, 0);
    e.obs.pop_back();
    CHECK_THROWS_AS(buf.push_episode(e), ContractViolation);
    e = make_episode(3, 0);
    e.avail[0] = 0;  // action 0 of agent 0 at t = 0 becomes illegal
    CHECK_THROWS_AS(buf.push_episode(e), ContractViolation);
    CHECK(buf.size() == 0);
}

TEST_CASE("not ready below batch size") {
    replay::ReplayBuffer buf(100);
    Rng rng(1);
    for (int i = 0; i < 31; ++i) buf.push_episode(make_episode(2, i));
    CHECK_FALSE(buf.sample_batch(32, rng).has_value());
    buf.push_episode(make_episode(2, 31));
    CHECK(buf.sample_batch(32, rng).has_value());
}

TEST_CASE("exhaustive draw returns every episode once, shuffled") {
    replay::ReplayBuffer buf(100);
    for (int i = 0; i < 32; ++i) buf.push_episode(make_episode(2, i));
    Rng rng(7);
    auto idx = *buf.sample_indices(32, rng);
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> all(32);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(sorted == all);
    CHECK(idx != all);
}

TEST_CASE("padding: masks count true lengths and padded slots are inert") {
    std::vector<Episode> eps{make_episode(3, 1), make_episode(1, 2), make_episode(5, 3)};
    const auto b = replay::make_batch({&eps[0], &eps[1], &eps[2]});
    CHECK(b.max_len == 5);
    for (std::size_t i = 0; i < 3; ++i) {
        double len = 0.0;
        for (std::size_t t = 0; t < b.max_len; ++t) len += b.mask[t * 3 + i];
        CHECK(len == static_cast<double>(eps[i].length()));
        for (std::size_t t = 0; t < b.max_len; ++t) {
            const bool real = t < eps[i].length();
            CHECK((b.mask[t * 3 + i] == 1.0) == real);
            if (!real) {
                CHECK(b.reward[t * 3 + i] == 0.0);
                CHECK(b.terminal[t * 3 + i] == 0);
            } else {
                CHECK(b.reward[t * 3 + i] == eps[i].reward[t]);
                CHECK(b.actions[(t * 3 + i) * 2 + 1] == eps[i].actions[t * 2 + 1]);
            }
        }
    }
    CHECK(b.valid_steps() == 9.0);
    // the episode of length 1 has its post-terminal observation at t = 1 and zeros after
    CHECK(b.obs[((1 * 3) + 1) * 2 * 2 + 1] == 1.0);
    CHECK(b.obs[((2 * 3) + 1) * 2 * 2] == 0.0);
}

TEST_CASE("sampling is uniform over episodes") {
    replay::ReplayBuffer buf(40);
    for (int i = 0; i < 40; ++i) buf.push_episode(make_episode(1, i));
    Rng rng(2024);
    std::vector<double> counts(40, 0.0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const auto idx = buf.sample_indices(8, rng);
        for (std::size_t i : *idx) counts[i] += 1.0;
    }
    const std::vector<double> expected(40, draws * 8.0 / 40.0);
    CHECK(testing::chi_square(counts, expected) < testing::chi_square_critical_99(39));
}

TEST_CASE("sampling is deterministic under a seeded rng") {
    replay::ReplayBuffer buf(50);
    for (int i = 0; i < 50; ++i) buf.push_episode(make_episode(1 + i % 4, i));
    Rng a(9), b(9);
    for (int d = 0; d < 10; ++d) CHECK(buf.sample_indices(32, a) == buf.sample_indices(32, b));
}

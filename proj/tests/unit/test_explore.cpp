#include <cmath>
#include <limits>

#include "air/air_explore.hpp"
#include "air/error.hpp"
#include "doctest.h"
#include "stats.hpp"

using namespace air;
using namespace air::explore;

TEST_CASE("shaped q examples") {
    const std::vector<double> q{1.0, 1.0};
    const std::vector<double> lq{std::log(0.9), std::log(0.1)};
    const std::vector<std::uint8_t> open{1, 1};
    const auto up = shaped_q(q, lq, 1.0, open);
    CHECK(up[0] == doctest::Approx(1.105).epsilon(1e-3));
    CHECK(up[1] == doctest::Approx(3.303).epsilon(1e-3));
    CHECK(greedy(up) == 1);
    const auto down = shaped_q(q, lq, -1.0, open);
    CHECK(down[0] == doctest::Approx(0.895).epsilon(1e-3));
    CHECK(down[1] == doctest::Approx(-1.303).epsilon(1e-3));
    CHECK(greedy(down) == 0);
    const auto same = shaped_q(std::vector{0.3, -2.0, 5.0}, std::vector{-0.1, -3.0, -0.2}, 0.0, std::vector<std::uint8_t>{1, 1, 1});
    CHECK(same == std::vector{0.3, -2.0, 5.0});
}

TEST_CASE("shaped q is exact and masks with -inf") {
    const std::vector<double> q{0.7, -1.2, 2.5};
    const std::vector<double> lq{-0.2, -1.7, -0.05};
    const auto s = shaped_q(q, lq, 0.37, std::vector<std::uint8_t>{1, 0, 1});
    CHECK(s[0] == q[0] - 0.37 * lq[0]);
    CHECK(s[1] == -std::numeric_limits<double>::infinity());
    CHECK(s[2] == q[2] - 0.37 * lq[2]);
}

TEST_CASE("select_action: greedy, ties and masks") {
    Rng rng(1);
    CHECK(select_action(std::vector{1.0, 3.0, 2.0}, std::vector<std::uint8_t>{1, 1, 1}, 0.0, rng) == 1);
    CHECK(select_action(std::vector{4.0, 4.0, 4.0}, std::vector<std::uint8_t>{1, 1, 1}, 0.0, rng) == 0);
    const auto s = shaped_q(std::vector{9.0, 1.0, 2.0}, std::vector{0.0, 0.0, 0.0}, 1.0, std::vector<std::uint8_t>{0, 1, 1});
    CHECK(select_action(s, std::vector<std::uint8_t>{0, 1, 1}, 0.0, rng) == 2);
    CHECK_THROWS_AS(select_action(std::vector{0.0, 0.0}, std::vector<std::uint8_t>{0, 0}, 0.5, rng), ContractViolation);
    CHECK_THROWS_AS(select_action(std::vector{0.0}, std::vector<std::uint8_t>{1}, 1.5, rng), ContractViolation);
}

TEST_CASE("epsilon 1 is uniform over unmasked actions") {
    Rng rng(2);
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 1};
    const auto s = shaped_q(std::vector{5.0, 0.0, 0.0, 0.0, 0.0}, std::vector(5, 0.0), 0.0, mask);
    std::vector<double> counts(5, 0.0);
    for (int i = 0; i < 10000; ++i) counts[static_cast<std::size_t>(select_action(s, mask, 1.0, rng))] += 1.0;
    CHECK(counts[1] == 0.0);
    const std::vector<double> observed{counts[0], counts[2], counts[3], counts[4]};
    CHECK(testing::chi_square(observed, std::vector(4, 2500.0)) < testing::chi_square_critical_99(3));
}

TEST_CASE("greedy choice is invariant to constant shifts") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> q(4), lq(4);
        for (double& v : q) v = rng.normal();
        for (double& v : lq) v = -std::abs(rng.normal());
        const double alpha = rng.normal();
        const double c = 3.0 * rng.normal();
        const std::vector<std::uint8_t> m{1, 1, 1, 1};
        const int base = greedy(shaped_q(q, lq, alpha, m));
        auto q2 = q;
        for (double& v : q2) v += c;
        auto lq2 = lq;
        for (double& v : lq2) v -= std::abs(c);
        CHECK(greedy(shaped_q(q2, lq, alpha, m)) == base);
        CHECK(greedy(shaped_q(q, lq2, alpha, m)) == base);
    }
}

TEST_CASE("raising alpha favours the least identifiable action") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> q(3), lq(3);
        for (double& v : q) v = rng.normal();
        for (double& v : lq) v = -std::abs(rng.normal()) - 0.01;
        std::size_t lowest = 0;
        for (std::size_t u = 1; u < 3; ++u) {
            if (lq[u] < lq[lowest]) lowest = u;
        }
        const std::vector<std::uint8_t> m{1, 1, 1};
        double prev_margin = -1e300;
        for (double alpha = -2.0; alpha <= 2.0; alpha += 0.25) {
            const auto s = shaped_q(q, lq, alpha, m);
            double other = -1e300;
            for (std::size_t u = 0; u < 3; ++u) {
                if (u != lowest) other = std::max(other, s[u]);
            }
            const double margin = s[lowest] - other;
            CHECK(margin >= prev_margin - 1e-12);
            prev_margin = margin;
        }
    }
}

TEST_CASE("target entropy moving average") {
    auto s = initial_temperature(3);
    CHECK(s.target_entropy == std::log(3.0));
    CHECK(update_target_entropy(s, std::log(3.0)).target_entropy == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    TemperatureState half{0.0, 1.0, 0.5};
    CHECK(update_target_entropy(half, 3.0).target_entropy == 2.0);
    TemperatureState e{0.0, 5.0, 0.9};
    for (int i = 0; i < 400; ++i) e = update_target_entropy(e, 0.25);
    CHECK(e.target_entropy == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(update_target_entropy(s, -0.1), ContractViolation);
}

TEST_CASE("temperature step arithmetic") {
    TemperatureState s{0.3, 0.7, 0.99};
    double g = 0.0;
    CHECK(temperature_step(s, -0.7, 0.0005, &g).alpha == 0.3);
    CHECK(g == 0.0);
    auto up = temperature_step(s, -0.5, 0.0005, &g);
    CHECK(g == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(up.alpha > 0.3);
    auto down = temperature_step(s, -2.0, 0.0005, &g);
    CHECK(g == doctest::Approx(-1.3).epsilon(1e-15));
    CHECK(down.alpha < 0.3);
    const std::vector<double> batch{-0.1, -0.4, -1.0};
    const auto b = temperature_step(s, batch, 0.01, &g);
    CHECK(std::abs(b.alpha - (0.3 + 0.01 * (-0.5 + 0.7))) <= 1e-12);
    CHECK_THROWS_AS(temperature_step(s, std::vector{0.2}, 0.01), ContractViolation);
}

TEST_CASE("epsilon schedule") {
    CHECK(epsilon_at(0) == 1.0);
    for (std::uint64_t step : {0ull, 1ull, 777ull, 20000ull, 25000ull, 49999ull, 50000ull, 50001ull, 200000ull}) {
        CHECK(epsilon_at(step) == std::max(0.05, 1.0 - 0.95 * static_cast<double>(step) / 50000.0));
    }
    CHECK(epsilon_at(50000) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(epsilon_at(60000) == 0.05);
    CHECK(epsilon_at(20000) == doctest::Approx(0.62).epsilon(1e-15));
}

#include <cmath>

#include "air/error.hpp"
#include "air/identity_classifier.hpp"
#include "air/oracle.hpp"
#include "air/value_decomposition.hpp"
#include "batches.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace air;
using ad::Var;

namespace {

void randomize(ad::ParameterStore& s, Rng& rng, double scale) {
    for (auto& p : s) {
        for (double& x : p.value.data()) x = scale * rng.normal();
    }
}

// Every agent observes the same noise; agent k plays action k with
// probability `bias`, otherwise uniformly.
replay::EpisodeBatch behaviour_batch(std::size_t B, double bias, Rng& rng) {
    std::vector<replay::Episode> eps;
    for (std::size_t i = 0; i < B; ++i) {
        auto e = testing::random_episode(2, 2, 2, 1, 3, rng);
        for (std::size_t t = 0; t < 3; ++t) {
            for (std::size_t k = 0; k < 2; ++k) {
                e.actions[t * 2 + k] = rng.uniform() < bias ? static_cast<int>(k) : static_cast<int>(rng.index(2));
            }
        }
        eps.push_back(std::move(e));
    }
    std::vector<const replay::Episode*> ptrs;
    for (const auto& e : eps) ptrs.push_back(&e);
    return replay::make_batch(ptrs);
}

}  // namespace

TEST_CASE("zero parameters give -ln n everywhere") {
    clf::IdentityClassifier net(4, 3, 5);
    ad::ParameterStore s;
    net.declare(s);
    ad::Tape t;
    Rng rng(1);
    Tensor x = Tensor::matrix(2, net.input_dim());
    for (double& v : x.data()) v = rng.normal();
    auto out = net.classify(t, s, t.constant(x), net.initial_hidden(t, 2));
    CHECK(out.out.cols() == 15);
    for (double v : out.out.value().data()) CHECK(v == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("every (history, action) row is a normalized identity distribution") {
    Rng rng(2);
    clf::IdentityClassifier net(3, 3, 4, 16);
    ad::ParameterStore s;
    net.declare(s);
    net.init(s, rng);
    randomize(s, rng, 2.0);
    Tensor x = Tensor::matrix(5 * 6, net.input_dim());
    for (double& v : x.data()) v = rng.normal();
    ad::Tape t;
    const Tensor lq = net.unroll(t, s, t.constant(x), 5, 6).value();
    for (std::size_t r = 0; r < lq.rows(); ++r) {
        for (std::size_t u = 0; u < 4; ++u) {
            double total = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(std::isfinite(lq.at(r, u * 3 + k)));
                total += std::exp(lq.at(r, u * 3 + k));
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("classifier loss gradcheck through encoder and head") {
    Rng rng(3);
    clf::IdentityClassifier net(2, 2, 3, 5);
    ad::ParameterStore s;
    net.declare(s);
    net.init(s, rng);
    randomize(s, rng, 0.5);
    const auto batch = testing::random_batch(3, 2, 3, 2, 1, 3, rng);
    auto res = testing::gradcheck(s, [&](ad::Tape& t, ad::ParameterStore& st) {
        // same loss as classifier_train_step, rebuilt from public pieces
        const std::size_t L = batch.max_len, rows = batch.batch * 2;
        const Tensor all = vd::batch_inputs(batch, true);
        const Tensor x({L * rows, all.cols()}, std::vector<double>(all.raw(), all.raw() + L * rows * all.cols()));
        Var lq = net.unroll(t, st, t.constant(x), L, rows);
        std::vector<std::size_t> col(L * rows);
        Tensor w = Tensor::matrix(L * rows, 1);
        for (std::size_t r = 0; r < L * rows; ++r) {
            col[r] = static_cast<std::size_t>(batch.actions[r]) * 2 + r % 2;
            w[r] = -batch.mask[r / 2];
        }
        return ad::weighted_sum(ad::gather_cols(lq, col), w);
    });
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("train step reports pre-update statistics") {
    Rng rng(4);
    clf::IdentityClassifier net(2, 2, 2, 8);
    ad::ParameterStore s;
    net.declare(s);
    net.init(s, rng);
    auto adam = ad::make_adam_state(s);
    const auto batch = behaviour_batch(8, 0.9, rng);
    const auto before = clf::classifier_evaluate(net, s, batch);
    const auto during = clf::classifier_train_step(net, s, adam, batch, 0.01);
    CHECK(during.mean_nll == before.mean_nll);
    CHECK(during.accuracy == before.accuracy);
    CHECK(adam.step == 1);
    const double mean_log_q = 0.5 * (during.mean_log_q_per_agent[0] + during.mean_log_q_per_agent[1]);
    CHECK(mean_log_q == doctest::Approx(-during.mean_nll).epsilon(1e-14));
    CHECK(clf::classifier_evaluate(net, s, batch).mean_nll != before.mean_nll);
}

TEST_CASE("separable behaviour is learned to near-perfect accuracy") {
    Rng rng(5);
    clf::IdentityClassifier net(2, 2, 2, 16);
    ad::ParameterStore s;
    net.declare(s);
    net.init(s, rng);
    auto adam = ad::make_adam_state(s);
    const auto batch = behaviour_batch(16, 1.0, rng);
    for (int i = 0; i < 300; ++i) clf::classifier_train_step(net, s, adam, batch, 0.01);
    const auto st = clf::classifier_evaluate(net, s, batch);
    CHECK(st.accuracy == 1.0);
    CHECK(st.mean_nll < 0.05);
}

TEST_CASE("indistinguishable behaviour plateaus at ln n") {
    Rng rng(6);
    clf::IdentityClassifier net(2, 2, 2, 16);
    ad::ParameterStore s;
    net.declare(s);
    net.init(s, rng);
    auto adam = ad::make_adam_state(s);
    for (int i = 0; i < 300; ++i) clf::classifier_train_step(net, s, adam, behaviour_batch(32, 0.0, rng), 0.003);
    const auto st = clf::classifier_evaluate(net, s, behaviour_batch(512, 0.0, rng));
    CHECK(std::abs(st.mean_nll - std::log(2.0)) < 0.05);
}

TEST_CASE("all-masked batch is refused") {
    Rng rng(7);
    clf::IdentityClassifier net(2, 2, 3, 4);
    ad::ParameterStore s;
    net.declare(s);
    auto batch = testing::random_batch(2, 2, 3, 2, 1, 2, rng);
    std::fill(batch.mask.begin(), batch.mask.end(), 0.0);
    CHECK_THROWS_AS(clf::classifier_evaluate(net, s, batch), ContractViolation);
}

TEST_CASE("any classifier parameters respect the identity lower bound") {
    // On a tabular spec the last-step output over full histories is a
    // trajectory-level classifier table the oracle can score exactly.
    Rng rng(8);
    const std::size_t n = 2, U = 2, O = 2, T = 2;
    const auto spec = env::random_tabular_spec(n, 2, U, O, T, false, rng);
    std::vector<env::TabularPolicy> pis;
    for (std::size_t k = 0; k < n; ++k) pis.push_back(env::TabularPolicy::random_softmax(O, U, rng));
    const auto d = oracle::trajectory_dist(spec, pis);
    const std::size_t count = d.system.space.size();

    clf::IdentityClassifier net(O, n, U, 8);
    Tensor x = Tensor::matrix(T * count, net.input_dim());
    std::vector<int> obs(T), acts(T);
    for (std::size_t i = 0; i < count; ++i) {
        d.system.space.decode(i, obs, acts);
        for (std::size_t t = 0; t < T; ++t) {
            x.at(t * count + i, static_cast<std::size_t>(obs[t])) = 1.0;
            if (t > 0) x.at(t * count + i, O + static_cast<std::size_t>(acts[t - 1])) = 1.0;
        }
    }
    for (int draw = 0; draw < 20; ++draw) {
        ad::ParameterStore s;
        net.declare(s);
        net.init(s, rng);
        randomize(s, rng, 1.5);
        ad::Tape t(ad::GradMode::disabled);
        const Tensor lq = net.unroll(t, s, t.constant(x), T, count).value();
        std::vector<double> table(count * n);
        for (std::size_t i = 0; i < count; ++i) {
            d.system.space.decode(i, obs, acts);
            const std::size_t row = (T - 1) * count + i;
            for (std::size_t k = 0; k < n; ++k) {
                table[i * n + k] = std::exp(lq.at(row, static_cast<std::size_t>(acts[T - 1]) * n + k));
            }
            // renormalize the rounding of exp(log_softmax)
            const double z = table[i * n] + table[i * n + 1];
            for (std::size_t k = 0; k < n; ++k) table[i * n + k] /= z;
        }
        CHECK(oracle::check_elbo(d, table).error >= -1e-9);
    }
}

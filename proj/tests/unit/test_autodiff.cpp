#include <cmath>
#include <limits>
#include <numbers>

#include "air/adam.hpp"
#include "air/autodiff.hpp"
#include "air/error.hpp"
#include "air/rng.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace air;
using ad::Var;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::matrix(r, c);
    for (double& x : t.data()) x = scale * rng.normal();
    return t;
}

ad::Parameter& random_param(ad::ParameterStore& s, const std::string& name, std::size_t r, std::size_t c,
                            Rng& rng) {
    auto& p = s.add(name, {r, c});
    p.value = random_matrix(r, c, rng);
    return p;
}

}  // namespace

TEST_CASE("forward examples") {
    ad::Tape tape;
    Var a = tape.constant(Tensor::matrix({{1, 2}}));
    Var b = tape.constant(Tensor::matrix({{3}, {4}}));
    CHECK(ad::matmul(a, b).value().item() == 11.0);

    Var z = tape.constant(Tensor::matrix({{0, 0}}));
    Var ls = ad::log_softmax(z);
    CHECK(ls.value()[0] == doctest::Approx(-std::numbers::ln2).epsilon(1e-15));
    CHECK(ls.value()[1] == doctest::Approx(-std::numbers::ln2).epsilon(1e-15));

    CHECK(ad::relu(tape.constant(Tensor::scalar(-3.5))).value().item() == 0.0);
}

TEST_CASE("shape mismatch names both shapes") {
    ad::Tape tape;
    Var a = tape.constant(Tensor::matrix(2, 3));
    Var b = tape.constant(Tensor::matrix(4, 5));
    try {
        ad::matmul(a, b);
        FAIL("expected ContractViolation");
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::add(a, b), ContractViolation);
    CHECK_THROWS_AS(ad::log_softmax(a, 2), ContractViolation);
}

TEST_CASE("non-finite output is a numeric fault naming the primitive") {
    ad::Tape tape;
    Var a = tape.constant(Tensor::scalar(1e308));
    try {
        ad::affine(a, 10.0);
        FAIL("expected NumericFault");
    } catch (const NumericFault& e) {
        CHECK(std::string(e.what()).find("affine") != std::string::npos);
    }
}

TEST_CASE("finiteness scan catches a bad entry anywhere") {
    const double inf = std::numeric_limits<double>::infinity();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t n : {1ul, 7ul, 32ul, 45ul, 100ul}) {
        Tensor t = Tensor::matrix(1, n);
        for (std::size_t i = 0; i < n; ++i) t[i] = i % 2 ? std::numeric_limits<double>::max() : -1e-310;
        CHECK(t.all_finite());
        for (std::size_t i = 0; i < n; ++i) {
            for (double bad : {inf, -inf, nan}) {
                Tensor u = t;
                u[i] = bad;
                CHECK_FALSE(u.all_finite());
            }
        }
    }
    CHECK(Tensor::matrix(0, 3).all_finite());
}

TEST_CASE("backward closed forms") {
    ad::ParameterStore s;
    auto& x = s.add("x", {1, 1});
    x.value[0] = 3.0;
    {
        ad::Tape tape;
        Var v = tape.parameter(x);
        tape.backward(ad::square(v));
    }
    CHECK(x.grad[0] == 6.0);

    SUBCASE("repeated backward accumulates") {
        ad::Tape tape;
        tape.backward(ad::square(tape.parameter(x)));
        CHECK(x.grad[0] == 12.0);
    }

    SUBCASE("non-scalar loss refused") {
        ad::Tape tape;
        Var m = tape.constant(Tensor::matrix(2, 2));
        CHECK_THROWS_AS(tape.backward(m), ContractViolation);
    }
}

TEST_CASE("negative log-likelihood gradient is softmax minus onehot") {
    Rng rng(7);
    ad::ParameterStore s;
    auto& z = random_param(s, "z", 4, 5, rng);
    const std::vector<std::size_t> labels{0, 3, 4, 1};
    ad::Tape tape;
    Var lp = ad::log_softmax(tape.parameter(z));
    tape.backward(ad::affine(ad::sum(ad::gather_cols(lp, labels)), -1.0));
    for (std::size_t r = 0; r < 4; ++r) {
        double mx = -1e300, denom = 0.0;
        for (std::size_t c = 0; c < 5; ++c) mx = std::max(mx, z.value.at(r, c));
        for (std::size_t c = 0; c < 5; ++c) denom += std::exp(z.value.at(r, c) - mx);
        for (std::size_t c = 0; c < 5; ++c) {
            const double sm = std::exp(z.value.at(r, c) - mx) / denom;
            const double expected = sm - (c == labels[r] ? 1.0 : 0.0);
            CHECK(z.grad.at(r, c) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("every primitive matches central differences") {
    Rng rng(11);
    ad::ParameterStore s;
    auto& a = random_param(s, "a", 3, 4, rng);
    auto& b = random_param(s, "b", 4, 6, rng);
    auto& bias = random_param(s, "bias", 1, 6, rng);
    auto& c = random_param(s, "c", 3, 6, rng);
    auto& w = random_param(s, "w", 3, 12, rng);
    const std::vector<std::size_t> idx{1, 0, 1};
    const Tensor weights = random_matrix(3, 1, rng);

    auto loss = [&](ad::Tape& t, ad::ParameterStore& st) {
        Var x = ad::add(ad::matmul(t.parameter(st.get("a")), t.parameter(st.get("b"))), t.parameter(st.get("bias")));
        Var y = ad::mul(ad::tanh(x), ad::sigmoid(t.parameter(st.get("c"))));
        y = ad::add(y, ad::elu(ad::sub(x, t.parameter(st.get("c")))));
        y = ad::add(y, ad::affine(ad::absolute(t.parameter(st.get("c"))), 0.3, 1.0));
        Var parts[] = {ad::slice_cols(y, 0, 3), ad::relu(ad::slice_cols(y, 3, 6))};
        Var cat = ad::concat_cols(parts);
        Var ls = ad::log_softmax(cat, 3);
        Var mixed = ad::rowwise_bmm(ad::reshape(ls, 3, 6), t.parameter(st.get("w")), 2);
        Var g = ad::gather_cols(mixed, idx);
        return ad::add(ad::weighted_sum(ad::square(g), weights), ad::sum(ad::row_sum(ad::square(ls))));
    };
    (void)a; (void)b; (void)bias; (void)c; (void)w;
    auto res = testing::gradcheck(s, loss);
    INFO(res.worst);
    CHECK(res.checked == s.scalar_count());
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        ad::ParameterStore s;
        random_param(s, "w", 3, 3, rng);
        random_param(s, "x", 2, 3, rng);
        auto l1 = [](ad::Tape& t, ad::ParameterStore& st) {
            return ad::sum(ad::tanh(ad::matmul(t.parameter(st.get("x")), t.parameter(st.get("w")))));
        };
        auto l2 = [](ad::Tape& t, ad::ParameterStore& st) {
            return ad::sum(ad::square(ad::matmul(t.parameter(st.get("x")), t.parameter(st.get("w")))));
        };
        const double ca = rng.normal(), cb = rng.normal();
        auto grads = [&](auto&& f) {
            s.zero_grad();
            ad::Tape t;
            t.backward(f(t, s));
            std::vector<double> g;
            for (auto& p : s) g.insert(g.end(), p.grad.data().begin(), p.grad.data().end());
            return g;
        };
        const auto g1 = grads(l1);
        const auto g2 = grads(l2);
        const auto g12 = grads([&](ad::Tape& t, ad::ParameterStore& st) {
            return ad::add(ad::affine(l1(t, st), ca), ad::affine(l2(t, st), cb));
        });
        for (std::size_t i = 0; i < g12.size(); ++i) {
            CHECK(g12[i] == doctest::Approx(ca * g1[i] + cb * g2[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("forward is deterministic") {
    auto run = [] {
        Rng rng(99);
        ad::ParameterStore s;
        random_param(s, "w", 8, 8, rng);
        random_param(s, "x", 5, 8, rng);
        ad::Tape t;
        return ad::tanh(ad::matmul(t.parameter(s.get("x")), t.parameter(s.get("w")))).value();
    };
    CHECK(run() == run());
}

TEST_CASE("adam") {
    ad::ParameterStore s;
    auto& x = s.add("x", {1, 2});
    x.value[0] = 1.0;
    x.value[1] = -2.0;
    auto state = ad::make_adam_state(s);

    SUBCASE("zero gradient leaves parameters unchanged") {
        ad::adam_step(s, state, 0.1);
        CHECK(x.value[0] == 1.0);
        CHECK(x.value[1] == -2.0);
        CHECK(state.step == 1);
    }
    SUBCASE("first step moves by lr against the gradient sign") {
        x.grad[0] = 0.3;
        x.grad[1] = -7.0;
        ad::adam_step(s, state, 0.01);
        CHECK(x.value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
        CHECK(x.value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
    }
    SUBCASE("non-finite gradient refused without update") {
        x.grad[0] = std::nan("");
        CHECK_THROWS_AS(ad::adam_step(s, state, 0.01), NumericFault);
        CHECK(x.value[0] == 1.0);
        CHECK(state.step == 0);
    }
}

TEST_CASE("adam on a 1-D quadratic tracks a scalar simulation") {
    // independent scalar Adam recurrence
    double xs = 1.0, m = 0.0, v = 0.0;
    std::vector<double> expected;
    for (int t = 1; t <= 500; ++t) {
        const double g = 2.0 * xs;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        xs -= 0.0005 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        expected.push_back(xs);
    }
    ad::ParameterStore s;
    auto& x = s.add("x", {1, 1});
    x.value[0] = 1.0;
    auto state = ad::make_adam_state(s);
    double prev = 1.0;
    for (int t = 0; t < 500; ++t) {
        s.zero_grad();
        ad::Tape tape;
        tape.backward(ad::square(tape.parameter(x)));
        ad::adam_step(s, state, 0.0005);
        CHECK(x.value[0] == doctest::Approx(expected[t]).epsilon(1e-12));
        CHECK(std::abs(x.value[0]) < std::abs(prev));
        prev = x.value[0];
    }
}

TEST_CASE("row slicing and stacking round-trip and differentiate") {
    Rng rng(12);
    ad::ParameterStore s;
    random_param(s, "a", 5, 3, rng);
    random_param(s, "b", 2, 3, rng);
    auto loss = [](ad::Tape& t, ad::ParameterStore& st) {
        Var a = t.parameter(st.get("a"));
        Var b = t.parameter(st.get("b"));
        const Var parts[] = {ad::slice_rows(a, 3, 5), b, ad::slice_rows(a, 0, 2)};
        Var stacked = ad::concat_rows(parts);
        return ad::sum(ad::tanh(ad::mul(stacked, ad::slice_rows(ad::concat_rows(std::vector{a, b}), 1, 7))));
    };
    auto res = testing::gradcheck(s, loss);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-4);

    ad::Tape t;
    Var a = t.parameter(s.get("a"));
    const Var halves[] = {ad::slice_rows(a, 0, 2), ad::slice_rows(a, 2, 5)};
    CHECK(ad::concat_rows(halves).value() == s.get("a").value);
    CHECK_THROWS_AS(ad::slice_rows(a, 4, 6), ContractViolation);
    const Var mismatched[] = {a, t.constant(Tensor::matrix(1, 2))};
    CHECK_THROWS_AS(ad::concat_rows(mismatched), ContractViolation);
}

TEST_CASE("fused gru gates match the composed primitives") {
    Rng rng(21);
    const std::size_t R = 5, H = 4;
    ad::ParameterStore s;
    for (const char* name : {"gi", "hw"}) {
        for (double& x : s.add(name, {R, 3 * H}).value.data()) x = rng.normal();
    }
    for (double& x : s.add("b", {1, 3 * H}).value.data()) x = rng.normal();
    for (double& x : s.add("h", {R, H}).value.data()) x = 0.8 * (2.0 * rng.uniform() - 1.0);

    auto composed = [&](ad::Tape& t, ad::ParameterStore& st, bool with_hw) {
        Var gi = t.parameter(st.get("gi"));
        Var h = t.parameter(st.get("h"));
        Var hw = with_hw ? t.parameter(st.get("hw")) : t.constant(Tensor::matrix(R, 3 * H));
        Var gh = ad::add(hw, t.parameter(st.get("b")));
        Var rz = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, 2 * H), ad::slice_cols(gh, 0, 2 * H)));
        Var r = ad::slice_cols(rz, 0, H);
        Var z = ad::slice_cols(rz, H, 2 * H);
        Var c = ad::tanh(ad::add(ad::slice_cols(gi, 2 * H, 3 * H), ad::mul(r, ad::slice_cols(gh, 2 * H, 3 * H))));
        return ad::add(c, ad::mul(z, ad::sub(h, c)));
    };
    auto fused = [&](ad::Tape& t, ad::ParameterStore& st, bool with_hw) {
        return ad::gru_gates(t.parameter(st.get("gi")), with_hw ? t.parameter(st.get("hw")) : Var{},
                             t.parameter(st.get("b")), t.parameter(st.get("h")));
    };
    for (bool with_hw : {true, false}) {
        ad::Tape t1, t2;
        const Tensor a = fused(t1, s, with_hw).value();
        const Tensor b = composed(t2, s, with_hw).value();
        // equal up to FMA contraction
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
        Tensor w = Tensor::matrix(R, H);
        for (double& x : w.data()) x = rng.normal();
        auto res = testing::gradcheck(s, [&](ad::Tape& t, ad::ParameterStore& st) {
            return ad::weighted_sum(fused(t, st, with_hw), w);
        });
        INFO(res.worst);
        CHECK(res.max_rel_error < 1e-4);
    }
}

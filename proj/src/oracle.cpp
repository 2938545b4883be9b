#include "air/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "air/error.hpp"
#include "air/kernels.hpp"

namespace air::oracle {

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

std::size_t n_agents(const Distributions& d) { return d.agents.size(); }

CheckResult make(const char* check, double lhs, double rhs, double tolerance) {
    CheckResult r;
    r.check = check;
    r.lhs = lhs;
    r.rhs = rhs;
    r.error = std::abs(lhs - rhs);
    r.tolerance = tolerance;
    r.passed = r.error <= tolerance;
    return r;
}

// Exact mass of agent k's own sequence: forward pass over the hidden state
// with the teammates' action laws marginalized into the transition.
std::vector<double> exact_law(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                              std::size_t k, const env::TrajectorySpace& space) {
    const std::size_t S = spec.n_states, U = spec.n_actions, O = spec.n_obs, n = spec.n_agents;
    const std::size_t J = spec.joint_count();
    std::vector<double> act(n * S * U, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t o = 0; o < O; ++o) {
                for (std::size_t u = 0; u < U; ++u) act[(i * S + s) * U + u] += spec.o(i, s, o) * policies[i](o, u);
            }
        }
    }
    // kernel[s][u_k][s'] = sum over teammates' actions of their law times P
    std::vector<double> kernel(S * U * S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < J; ++a) {
            std::size_t rem = a;
            std::size_t own = 0;
            double w = 1.0;
            for (std::size_t i = n; i-- > 0;) {
                const std::size_t u = rem % U;
                rem /= U;
                if (i == k) {
                    own = u;
                } else {
                    w *= act[(i * S + s) * U + u];
                }
            }
            if (w == 0.0) continue;
            for (std::size_t s2 = 0; s2 < S; ++s2) kernel[(s * U + own) * S + s2] += w * spec.p(s, a, s2);
        }
    }

    const std::uint64_t count = space.size();
    std::vector<double> out(count);
    const auto T = static_cast<std::ptrdiff_t>(space.horizon);
#pragma omp parallel for schedule(static) if (count >= 4096)
    for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(count); ++idx) {
        std::vector<int> obs(space.horizon), acts(space.horizon);
        space.decode(static_cast<std::uint64_t>(idx), obs, acts);
        std::vector<double> belief(S), next(S);
        for (std::size_t s = 0; s < S; ++s) belief[s] = spec.initial[s] * spec.o(k, s, obs[0]);
        for (std::ptrdiff_t t = 0; t < T; ++t) {
            const double pu = policies[k](obs[t], acts[t]);
            for (double& b : belief) b *= pu;
            if (t + 1 == T) break;
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t s = 0; s < S; ++s) {
                if (belief[s] == 0.0) continue;
                const double* row = &kernel[(s * U + acts[t]) * S];
                for (std::size_t s2 = 0; s2 < S; ++s2) next[s2] += belief[s] * row[s2];
            }
            for (std::size_t s2 = 0; s2 < S; ++s2) belief[s2] = next[s2] * spec.o(k, s2, obs[t + 1]);
        }
        double m = 0.0;
        for (double b : belief) m += b;
        out[static_cast<std::size_t>(idx)] = m;
    }
    return out;
}

}  // namespace

double TrajectoryDistribution::total() const { return kernels::sum(mass); }

Distributions trajectory_dist(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                              std::uint64_t budget, env::Execution exec) {
    auto support = env::enumerate_support(spec, policies, budget, exec);
    Distributions d;
    const std::size_t n = spec.n_agents;
    d.system.space = support.space;
    d.system.mass.assign(support.space.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryDistribution a{support.space, static_cast<int>(k), std::move(support.masses[k])};
        d.exact.push_back({support.space, static_cast<int>(k), exact_law(spec, policies, k, support.space)});
        d.agents.push_back(std::move(a));
    }
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < d.system.mass.size(); ++i) {
        double m = 0.0;
        for (std::size_t k = 0; k < n; ++k) m += d.agents[k].mass[i];
        d.system.mass[i] = w * m;
    }
    return d;
}

double kl_policy_difference(const TrajectoryDistribution& agent, const TrajectoryDistribution& system) {
    if (agent.mass.size() != system.mass.size()) throw ContractViolation("kl_policy_difference: spaces differ");
    double kl = 0.0;
    for (std::size_t i = 0; i < agent.mass.size(); ++i) {
        const double p = agent.mass[i];
        if (p > 0.0) kl += p * std::log(p / system.mass[i]);
    }
    return kl;
}

double entropy(const TrajectoryDistribution& d) {
    double h = 0.0;
    for (double p : d.mass) h -= xlogx(p);
    return h;
}

std::vector<double> identity_posterior(const Distributions& d) {
    const std::size_t n = n_agents(d), count = d.system.mass.size();
    std::vector<double> post(count * n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < count; ++i) {
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) z += d.agents[k].mass[i];
        if (z <= 0.0) continue;
        for (std::size_t k = 0; k < n; ++k) post[i * n + k] = d.agents[k].mass[i] / z;
    }
    return post;
}

InfoReport info_report(const Distributions& d) {
    const std::size_t n = n_agents(d), count = d.system.mass.size();
    const double prior = 1.0 / static_cast<double>(n);
    InfoReport r;
    r.h_rho = entropy(d.system);
    for (const auto& a : d.agents) {
        r.h_rho_given_z += prior * entropy(a);
        r.expected_kl += prior * kl_policy_difference(a, d.system);
    }
    // joint table p(tau, k) = rho^k(tau) / n
    std::vector<double> pz(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (double m : d.agents[k].mass) pz[k] += prior * m;
    }
    for (double p : pz) r.h_z -= xlogx(p);
    for (std::size_t i = 0; i < count; ++i) {
        double marginal = 0.0;
        for (std::size_t k = 0; k < n; ++k) marginal += prior * d.agents[k].mass[i];
        if (marginal <= 0.0) continue;
        for (std::size_t k = 0; k < n; ++k) {
            const double joint = prior * d.agents[k].mass[i];
            if (joint <= 0.0) continue;
            r.h_z_given_rho -= joint * std::log(joint / marginal);
            r.mi += joint * std::log(joint / (marginal * pz[k]));
        }
    }
    return r;
}

CheckResult check_normalization(const Distributions& d) {
    double worst = 0.0;
    for (const auto& a : d.agents) worst = std::max(worst, std::abs(a.total() - 1.0));
    for (const auto& a : d.exact) worst = std::max(worst, std::abs(a.total() - 1.0));
    worst = std::max(worst, std::abs(d.system.total() - 1.0));
    CheckResult r = make("normalization", 1.0 + worst, 1.0, kNormalizationTolerance);
    r.note = "largest |sum - 1| over per-agent, exact and system laws";
    return r;
}

CheckResult check_lemma1(const Distributions& d) {
    const InfoReport info = info_report(d);
    CheckResult r = make("lemma1", info.h_rho, info.expected_kl + info.h_rho_given_z, kIdentityTolerance);
    r.note = "H(rho) vs E_z[KL(rho^k||rho)] + H(rho|z)";
    return r;
}

CheckResult check_lemma2(const Distributions& d) {
    const InfoReport info = info_report(d);
    CheckResult r = make("lemma2", info.h_rho - info.h_rho_given_z, info.h_z - info.h_z_given_rho,
                         kIdentityTolerance);
    const double prior_error = std::abs(info.h_z - std::log(static_cast<double>(n_agents(d))));
    r.passed = r.passed && prior_error <= kPriorTolerance;
    r.note = "H(rho)-H(rho|z) vs H(z)-H(z|rho); |H(z)-ln n| = " + std::to_string(prior_error);
    return r;
}

CheckResult check_lemma3(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                         const Distributions& d) {
    CheckResult r;
    r.check = "lemma3";
    r.tolerance = kIdentityTolerance;
    if (!spec.shared_observation()) {
        r.skipped = true;
        r.passed = true;
        r.note =
            "skipped: observation function differs across agents, so sum_s P(s_t) O(o_t|s_t,k) does not cancel "
            "between agents and the policy-ratio form of the posterior is not exact";
        return r;
    }
    const std::size_t n = n_agents(d), T = d.system.space.horizon;
    const auto post = identity_posterior(d);
    std::vector<int> obs(T), acts(T);
    std::vector<double> prod(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.system.mass.size(); ++i) {
        if (d.system.mass[i] <= 0.0) continue;
        d.system.space.decode(i, obs, acts);
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double p = 1.0;
            for (std::size_t t = 0; t < T; ++t) p *= policies[k](obs[t], acts[t]);
            prod[k] = p;
            z += p;
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double err = std::abs(post[i * n + k] - prod[k] / z);
            if (err > worst) {
                worst = err;
                r.lhs = post[i * n + k];
                r.rhs = prod[k] / z;
            }
        }
    }
    r.error = worst;
    r.passed = worst <= r.tolerance;
    r.note = "max |Bayes posterior - policy-product ratio| over the support";
    return r;
}

CheckResult check_elbo(const Distributions& d, std::span<const double> classifier) {
    const std::size_t n = n_agents(d), count = d.system.mass.size();
    if (classifier.size() != count * n) {
        throw ContractViolation("check_elbo: classifier table has " + std::to_string(classifier.size()) +
                                " entries, expected " + std::to_string(count * n));
    }
    for (std::size_t i = 0; i < count; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double q = classifier[i * n + k];
            if (!(q >= 0.0)) throw ContractViolation("check_elbo: negative or NaN classifier entry");
            s += q;
        }
        if (std::abs(s - 1.0) > 1e-12) {
            throw ContractViolation("check_elbo: classifier row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
    const InfoReport info = info_report(d);
    const double prior = 1.0 / static_cast<double>(n);
    double expected_log_q = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double joint = prior * d.agents[k].mass[i];
            if (joint <= 0.0) continue;
            const double q = classifier[i * n + k];
            expected_log_q += q > 0.0 ? joint * std::log(q) : -std::numeric_limits<double>::infinity();
        }
    }
    CheckResult r;
    r.check = "elbo";
    r.lhs = info.h_z - info.h_z_given_rho;
    r.rhs = expected_log_q + std::log(static_cast<double>(n));
    r.error = r.lhs - r.rhs;  // margin, not an absolute error
    r.tolerance = kBoundTolerance;
    r.passed = r.error >= -kBoundTolerance;
    r.note = "margin = (H(z)-H(z|rho)) - (E[log q] + ln n)";
    return r;
}

CheckResult factorization_gap(const Distributions& d) {
    double worst = 0.0, tv = 0.0;
    for (std::size_t k = 0; k < d.agents.size(); ++k) {
        double t = 0.0;
        for (std::size_t i = 0; i < d.agents[k].mass.size(); ++i) {
            const double g = std::abs(d.agents[k].mass[i] - d.exact[k].mass[i]);
            worst = std::max(worst, g);
            t += g;
        }
        tv = std::max(tv, 0.5 * t);
    }
    CheckResult r;
    r.check = "factorization_gap";
    r.error = worst;
    r.tolerance = std::numeric_limits<double>::infinity();
    r.passed = true;
    r.note = "informational: max |per-step-marginal mass - exact mass| (total variation " + std::to_string(tv) + ")";
    return r;
}

std::vector<double> random_classifier(const Distributions& d, Rng& rng) {
    const std::size_t n = n_agents(d), count = d.system.mass.size();
    std::vector<double> q(count * n);
    for (std::size_t i = 0; i < count; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, q[i * n + k] = 2.0 * rng.normal());
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += (q[i * n + k] = std::exp(q[i * n + k] - mx));
        for (std::size_t k = 0; k < n; ++k) q[i * n + k] /= s;
    }
    return q;
}

std::vector<Fixture> fixtures_for(const TabularDecPomdpSpec& spec, const std::string& label) {
    const std::size_t n = spec.n_agents, O = spec.n_obs, U = spec.n_actions;
    std::vector<Fixture> out;
    Rng rng = Rng::stream(0x5eed, spec.n_agents * 1000 + spec.n_actions);
    const auto shared = TabularPolicy::random_softmax(O, U, rng);
    out.push_back({label + "/identical", spec, std::vector<TabularPolicy>(n, shared)});
    std::vector<TabularPolicy> disjoint;
    for (std::size_t k = 0; k < n; ++k) disjoint.push_back(TabularPolicy::deterministic(O, U, k % U));
    out.push_back({label + (n <= U ? "/disjoint" : "/deterministic"), spec, std::move(disjoint)});
    for (int seed = 0; seed < 20; ++seed) {
        Rng prng = Rng::stream(static_cast<std::uint64_t>(seed), 0xf1c5);
        std::vector<TabularPolicy> pis;
        for (std::size_t k = 0; k < n; ++k) pis.push_back(TabularPolicy::random_softmax(O, U, prng));
        out.push_back({label + "/random" + std::to_string(seed), spec, std::move(pis)});
    }
    return out;
}

std::vector<Fixture> default_fixtures() {
    Rng a = Rng::stream(2024, 1);
    Rng b = Rng::stream(2024, 2);
    auto out = fixtures_for(env::random_tabular_spec(2, 2, 2, 2, 2, true, a), "s2u2n2t2");
    auto more = fixtures_for(env::random_tabular_spec(3, 1, 3, 2, 1, true, b), "s1u3n3t1");
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

bool SuiteReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

double SuiteReport::max_identity_error() const {
    double worst = 0.0;
    for (const auto& c : checks) {
        if (!c.skipped && (c.check == "lemma1" || c.check == "lemma2" || c.check == "lemma3")) {
            worst = std::max(worst, c.error);
        }
    }
    return worst;
}

double SuiteReport::min_bound_margin() const {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& c : checks) {
        if (c.check == "elbo") worst = std::min(worst, c.error);
    }
    return worst;
}

SuiteReport run_suite(std::span<const Fixture> fixtures, std::size_t random_tables, std::uint64_t budget) {
    SuiteReport report;
    for (std::size_t fi = 0; fi < fixtures.size(); ++fi) {
        const Fixture& f = fixtures[fi];
        const Distributions d = trajectory_dist(f.spec, f.policies, budget);
        auto add = [&](CheckResult r) {
            r.fixture = f.name;
            report.checks.push_back(std::move(r));
        };
        add(check_normalization(d));
        add(check_lemma1(d));
        add(check_lemma2(d));
        add(check_lemma3(f.spec, f.policies, d));

        // the bound must hold for every table and be tight at the posterior
        CheckResult tight = check_elbo(d, identity_posterior(d));
        CheckResult worst = tight;
        const std::vector<double> uniform(d.system.mass.size() * d.agents.size(),
                                          1.0 / static_cast<double>(d.agents.size()));
        auto consider = [&worst](CheckResult r) {
            if (r.error < worst.error) worst = std::move(r);
        };
        consider(check_elbo(d, uniform));
        Rng rng = Rng::stream(0xe1b0, fi);
        for (std::size_t t = 0; t < random_tables; ++t) consider(check_elbo(d, random_classifier(d, rng)));
        worst.note += " (worst of posterior, uniform and " + std::to_string(random_tables) + " random tables)";
        add(worst);
        tight.check = "elbo_tight";
        tight.passed = std::abs(tight.error) <= kBoundTolerance;
        tight.note = "margin at the Bayes posterior";
        add(tight);
        add(factorization_gap(d));
    }
    return report;
}

}  // namespace air::oracle

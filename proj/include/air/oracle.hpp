#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "air/tabular.hpp"

namespace air::oracle {

using env::TabularDecPomdpSpec;
using env::TabularPolicy;

// Probability mass over one agent's (o_0, u_0, ..., o_{T-1}, u_{T-1})
// sequences, indexed by TrajectorySpace. agent < 0 marks the system mixture.
struct TrajectoryDistribution {
    env::TrajectorySpace space;
    int agent = -1;
    std::vector<double> mass;

    double total() const;
};

struct Distributions {
    // Per-step-marginal factorization: prod_t pi^k(u_t|o_t) sum_s P(s_t) O(o_t|s_t,k).
    std::vector<TrajectoryDistribution> agents;
    // Uniform mixture of the agents.
    TrajectoryDistribution system;
    // Exact law of each agent's own sequence, states and teammates marginalized.
    std::vector<TrajectoryDistribution> exact;
};

Distributions trajectory_dist(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                              std::uint64_t budget = env::kDefaultEnumerationBudget,
                              env::Execution exec = env::Execution::parallel);

// sum p log(p / q) with 0 log 0 = 0.
double kl_policy_difference(const TrajectoryDistribution& agent, const TrajectoryDistribution& system);
double entropy(const TrajectoryDistribution& d);

// All in nats.
struct InfoReport {
    double h_rho = 0.0;          // H(rho)
    double h_rho_given_z = 0.0;  // mean_k H(rho^k)
    double h_z = 0.0;            // from the identity marginal of the joint (tau, z) table
    double h_z_given_rho = 0.0;  // -sum p(tau, k) log p(k | tau)
    double expected_kl = 0.0;    // mean_k KL(rho^k || rho)
    double mi = 0.0;             // sum p(tau, k) log(p(tau, k) / (rho(tau) p(k)))
};

InfoReport info_report(const Distributions& d);

// Bayes posterior p(z_k | tau) = rho^k(tau) / sum_i rho^i(tau); [index * n + k].
// Trajectories outside the support get the uniform row.
std::vector<double> identity_posterior(const Distributions& d);

struct CheckResult {
    std::string check;
    std::string fixture;
    double lhs = 0.0;
    double rhs = 0.0;
    double error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    bool skipped = false;
    std::string note;
};

inline constexpr double kIdentityTolerance = 1e-10;
inline constexpr double kPriorTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-12;
inline constexpr double kBoundTolerance = 1e-9;

CheckResult check_normalization(const Distributions& d);
// H(rho) = E_z[KL(rho^k || rho)] + H(rho | z).
CheckResult check_lemma1(const Distributions& d);
// H(rho) - H(rho | z) = H(z) - H(z | rho), and H(z) = ln n.
CheckResult check_lemma2(const Distributions& d);
// Posterior against prod_t pi^k / sum_i prod_t pi^i. Skipped unless the
// observation function is shared by all agents.
CheckResult check_lemma3(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                         const Distributions& d);
// margin = (H(z) - H(z | rho)) - (E[log q] + ln n) for a classifier table
// q[index * n + k]; rows must sum to 1. Passes iff margin >= -1e-9.
CheckResult check_elbo(const Distributions& d, std::span<const double> classifier);
// Largest |Eq-1 mass - exact mass| over trajectories. Informational only.
CheckResult factorization_gap(const Distributions& d);

// Random normalized classifier table (softmax of N(0, 2^2) logits).
std::vector<double> random_classifier(const Distributions& d, Rng& rng);

struct Fixture {
    std::string name;
    TabularDecPomdpSpec spec;
    std::vector<TabularPolicy> policies;
};

// {identical, disjoint deterministic, 20 random softmax} policy sets on a
// (2 states, 2 actions, n=2, T=2) spec and a (1 state, 3 actions, n=3, T=1)
// spec, both with a shared observation function.
std::vector<Fixture> default_fixtures();
// Same policy families on a user-supplied spec.
std::vector<Fixture> fixtures_for(const TabularDecPomdpSpec& spec, const std::string& label);

struct SuiteReport {
    std::vector<CheckResult> checks;
    bool all_passed() const;
    double max_identity_error() const;
    double min_bound_margin() const;
};

// Normalization, Lemmas 1-3 and the bound (posterior, uniform and
// random_tables random classifiers) on every fixture, plus the
// factorization gap as a note.
SuiteReport run_suite(std::span<const Fixture> fixtures, std::size_t random_tables = 100,
                      std::uint64_t budget = env::kDefaultEnumerationBudget);

}  // namespace air::oracle

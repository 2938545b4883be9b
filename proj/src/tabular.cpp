#include "air/tabular.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "air/error.hpp"
#include "air/kernels.hpp"
#include "json.hpp"

namespace air::env {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr const char* kFormatName = "air-tabular-decpomdp";

void check_rows(const std::vector<double>& table, std::size_t width, const char* what) {
    for (std::size_t start = 0; start < table.size(); start += width) {
        double s = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double p = table[start + j];
            if (!std::isfinite(p) || p < 0.0) {
                throw ContractViolation(std::string(what) + ": entry " + std::to_string(start + j) +
                                        " is not a probability");
            }
            s += p;
        }
        if (std::abs(s - 1.0) > kRowTolerance) {
            throw ContractViolation(std::string(what) + ": row " + std::to_string(start / width) + " sums to " +
                                    std::to_string(s));
        }
    }
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
    return a * b;
}

std::uint64_t saturating_pow(std::uint64_t base, std::uint64_t exp) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < exp; ++i) r = saturating_mul(r, base);
    return r;
}

}  // namespace

// --- spec -----------------------------------------------------------------

std::size_t TabularDecPomdpSpec::joint_count() const {
    std::size_t j = 1;
    for (std::size_t k = 0; k < n_agents; ++k) j *= n_actions;
    return j;
}

std::size_t TabularDecPomdpSpec::joint_index(std::span<const int> joint) const {
    std::size_t idx = 0;
    for (int u : joint) idx = idx * n_actions + static_cast<std::size_t>(u);
    return idx;
}

void TabularDecPomdpSpec::validate() const {
    if (n_agents == 0 || n_states == 0 || n_actions == 0 || n_obs == 0) {
        throw ContractViolation("tabular spec: empty agent/state/action/observation set");
    }
    if (horizon == 0) throw ContractViolation("tabular spec: horizon must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("tabular spec: gamma must lie in [0, 1)");
    const std::size_t J = joint_count();
    auto expect = [](const std::vector<double>& v, std::size_t n, const char* what) {
        if (v.size() != n) {
            throw ContractViolation(std::string("tabular spec: ") + what + " has " + std::to_string(v.size()) +
                                    " entries, expected " + std::to_string(n));
        }
    };
    expect(initial, n_states, "initial");
    expect(transition, n_states * J * n_states, "transition");
    expect(observation, n_agents * n_states * n_obs, "observation");
    expect(reward, n_states * J, "reward");
    check_rows(initial, n_states, "initial");
    check_rows(transition, n_states, "transition");
    check_rows(observation, n_obs, "observation");
    for (double r : reward) {
        if (!std::isfinite(r)) throw ContractViolation("tabular spec: non-finite reward");
    }
}

bool TabularDecPomdpSpec::shared_observation() const {
    const std::size_t block = n_states * n_obs;
    for (std::size_t k = 1; k < n_agents; ++k) {
        for (std::size_t i = 0; i < block; ++i) {
            if (observation[k * block + i] != observation[i]) return false;
        }
    }
    return true;
}

std::uint64_t table_checksum(const TabularDecPomdpSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::vector<double>& v) {
        for (double x : v) {
            const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        }
    };
    feed(spec.initial);
    feed(spec.transition);
    feed(spec.observation);
    feed(spec.reward);
    return h;
}

namespace {

std::string checksum_string(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string dump_tabular_spec(const TabularDecPomdpSpec& spec) {
    spec.validate();
    const std::size_t J = spec.joint_count();
    nlohmann::ordered_json j;
    j["format"] = kFormatName;
    j["version"] = 1;
    j["checksum"] = checksum_string(table_checksum(spec));
    j["n_agents"] = spec.n_agents;
    j["n_states"] = spec.n_states;
    j["n_actions"] = spec.n_actions;
    j["n_observations"] = spec.n_obs;
    j["horizon"] = spec.horizon;
    j["gamma"] = spec.gamma;
    j["initial"] = spec.initial;
    auto transition = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        auto rows = nlohmann::ordered_json::array();
        for (std::size_t a = 0; a < J; ++a) {
            auto begin = spec.transition.begin() + static_cast<long>((s * J + a) * spec.n_states);
            rows.push_back(std::vector<double>(begin, begin + static_cast<long>(spec.n_states)));
        }
        transition.push_back(rows);
    }
    j["transition"] = transition;
    auto observation = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < spec.n_agents; ++k) {
        auto rows = nlohmann::ordered_json::array();
        for (std::size_t s = 0; s < spec.n_states; ++s) {
            auto begin = spec.observation.begin() + static_cast<long>((k * spec.n_states + s) * spec.n_obs);
            rows.push_back(std::vector<double>(begin, begin + static_cast<long>(spec.n_obs)));
        }
        observation.push_back(rows);
    }
    j["observation"] = observation;
    auto reward = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        auto begin = spec.reward.begin() + static_cast<long>(s * J);
        reward.push_back(std::vector<double>(begin, begin + static_cast<long>(J)));
    }
    j["reward"] = reward;
    return j.dump(2) + "\n";
}

TabularDecPomdpSpec parse_tabular_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("tabular spec: not valid JSON: ") + e.what());
    }
    auto field = [&j](const char* key) -> const nlohmann::json& {
        if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("tabular spec: missing key '") + key + "'");
        return j.at(key);
    };
    TabularDecPomdpSpec spec;
    try {
        if (field("format").get<std::string>() != kFormatName) throw FormatError("tabular spec: wrong format tag");
        if (field("version").get<int>() != 1) throw FormatError("tabular spec: unsupported version");
        spec.n_agents = field("n_agents").get<std::size_t>();
        spec.n_states = field("n_states").get<std::size_t>();
        spec.n_actions = field("n_actions").get<std::size_t>();
        spec.n_obs = field("n_observations").get<std::size_t>();
        spec.horizon = field("horizon").get<std::size_t>();
        spec.gamma = j.value("gamma", 0.99);
        spec.initial = field("initial").get<std::vector<double>>();
        for (const auto& per_state : field("transition")) {
            for (const auto& row : per_state) {
                auto v = row.get<std::vector<double>>();
                spec.transition.insert(spec.transition.end(), v.begin(), v.end());
            }
        }
        for (const auto& per_agent : field("observation")) {
            for (const auto& row : per_agent) {
                auto v = row.get<std::vector<double>>();
                spec.observation.insert(spec.observation.end(), v.begin(), v.end());
            }
        }
        for (const auto& row : field("reward")) {
            auto v = row.get<std::vector<double>>();
            spec.reward.insert(spec.reward.end(), v.begin(), v.end());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("tabular spec: ") + e.what());
    }
    try {
        spec.validate();
    } catch (const ContractViolation& e) {
        throw FormatError(e.what());
    }
    const std::string expected = checksum_string(table_checksum(spec));
    const std::string declared = field("checksum").get<std::string>();
    if (declared != expected) {
        throw FormatError("tabular spec: checksum mismatch (file says " + declared + ", tables hash to " + expected + ")");
    }
    return spec;
}

TabularDecPomdpSpec load_tabular_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open tabular spec " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_tabular_spec(ss.str());
}

namespace {

std::vector<double> random_simplex_rows(std::size_t rows, std::size_t width, Rng& rng) {
    std::vector<double> out(rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double e = -std::log(1.0 - rng.uniform());
            out[r * width + j] = e;
            s += e;
        }
        for (std::size_t j = 0; j < width; ++j) out[r * width + j] /= s;
        // push the rounding residue into the largest entry
        double t = 0.0;
        std::size_t big = 0;
        for (std::size_t j = 0; j < width; ++j) {
            t += out[r * width + j];
            if (out[r * width + j] > out[r * width + big]) big = j;
        }
        out[r * width + big] += 1.0 - t;
    }
    return out;
}

}  // namespace

TabularDecPomdpSpec random_tabular_spec(std::size_t n_agents, std::size_t n_states, std::size_t n_actions,
                                        std::size_t n_obs, std::size_t horizon, bool shared_obs, Rng& rng) {
    TabularDecPomdpSpec spec;
    spec.n_agents = n_agents;
    spec.n_states = n_states;
    spec.n_actions = n_actions;
    spec.n_obs = n_obs;
    spec.horizon = horizon;
    const std::size_t J = spec.joint_count();
    spec.initial = random_simplex_rows(1, n_states, rng);
    spec.transition = random_simplex_rows(n_states * J, n_states, rng);
    if (shared_obs) {
        const auto block = random_simplex_rows(n_states, n_obs, rng);
        for (std::size_t k = 0; k < n_agents; ++k) spec.observation.insert(spec.observation.end(), block.begin(), block.end());
    } else {
        spec.observation = random_simplex_rows(n_agents * n_states, n_obs, rng);
    }
    spec.reward.resize(n_states * J);
    for (double& r : spec.reward) r = rng.uniform(-1.0, 1.0);
    spec.validate();
    return spec;
}

// --- policies and trajectory spaces ---------------------------------------

void TabularPolicy::validate() const {
    if (probs.size() != n_obs * n_actions) throw ContractViolation("TabularPolicy: table size mismatch");
    check_rows(probs, n_actions, "policy");
}

TabularPolicy TabularPolicy::uniform(std::size_t n_obs, std::size_t n_actions) {
    return {n_obs, n_actions, std::vector<double>(n_obs * n_actions, 1.0 / static_cast<double>(n_actions))};
}

TabularPolicy TabularPolicy::deterministic(std::size_t n_obs, std::size_t n_actions, std::size_t action) {
    TabularPolicy p{n_obs, n_actions, std::vector<double>(n_obs * n_actions, 0.0)};
    for (std::size_t o = 0; o < n_obs; ++o) p.probs[o * n_actions + action] = 1.0;
    return p;
}

TabularPolicy TabularPolicy::random_softmax(std::size_t n_obs, std::size_t n_actions, Rng& rng, double scale) {
    TabularPolicy p{n_obs, n_actions, std::vector<double>(n_obs * n_actions)};
    for (std::size_t o = 0; o < n_obs; ++o) {
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> logits(n_actions);
        for (double& l : logits) {
            l = scale * rng.normal();
            mx = std::max(mx, l);
        }
        double s = 0.0;
        for (double& l : logits) s += (l = std::exp(l - mx));
        for (std::size_t u = 0; u < n_actions; ++u) p.probs[o * n_actions + u] = logits[u] / s;
    }
    return p;
}

std::uint64_t TrajectorySpace::size() const { return saturating_pow(n_obs * n_actions, horizon); }

void TrajectorySpace::decode(std::uint64_t index, std::span<int> obs, std::span<int> actions) const {
    const std::uint64_t radix = n_obs * n_actions;
    for (std::size_t t = horizon; t-- > 0;) {
        const std::uint64_t digit = index % radix;
        index /= radix;
        obs[t] = static_cast<int>(digit / n_actions);
        actions[t] = static_cast<int>(digit % n_actions);
    }
}

std::uint64_t TrajectorySpace::encode(std::span<const int> obs, std::span<const int> actions) const {
    std::uint64_t index = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
        index = index * (n_obs * n_actions) + static_cast<std::uint64_t>(obs[t]) * n_actions +
                static_cast<std::uint64_t>(actions[t]);
    }
    return index;
}

std::uint64_t enumeration_size(const TabularDecPomdpSpec& spec) {
    const std::uint64_t T = spec.horizon;
    return saturating_mul(saturating_mul(saturating_pow(spec.n_states, T), saturating_pow(spec.n_actions, spec.n_agents * T)),
                          saturating_pow(spec.n_obs, T));
}

SupportEnumeration enumerate_support(const TabularDecPomdpSpec& spec, std::span<const TabularPolicy> policies,
                                     std::uint64_t budget, Execution exec) {
    spec.validate();
    if (policies.size() != spec.n_agents) {
        throw ContractViolation("enumerate_support: " + std::to_string(policies.size()) + " policies for " +
                                std::to_string(spec.n_agents) + " agents");
    }
    for (const auto& p : policies) {
        p.validate();
        if (p.n_obs != spec.n_obs || p.n_actions != spec.n_actions) {
            throw ContractViolation("enumerate_support: policy table does not match the spec's O x U");
        }
    }
    const std::uint64_t required = enumeration_size(spec);
    if (required > budget) {
        throw BudgetExceeded("enumeration needs " + std::to_string(required) + " records, budget is " +
                                 std::to_string(budget),
                             required, budget);
    }

    const std::size_t S = spec.n_states, U = spec.n_actions, O = spec.n_obs, n = spec.n_agents, T = spec.horizon;
    const std::size_t J = spec.joint_count();

    // marginal action law of agent k in state s: sum_o O(o|s,k) pi^k(u|o)
    std::vector<double> act(n * S * U, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t o = 0; o < O; ++o) {
                for (std::size_t u = 0; u < U; ++u) act[(k * S + s) * U + u] += spec.o(k, s, o) * policies[k](o, u);
            }
        }
    }

    SupportEnumeration out;
    out.space = {O, U, T};
    out.state_marginals.assign(T, std::vector<double>(S, 0.0));
    out.state_marginals[0] = spec.initial;
    std::vector<int> joint(n);
    for (std::size_t t = 0; t + 1 < T; ++t) {
        auto& next = out.state_marginals[t + 1];
        for (std::size_t s = 0; s < S; ++s) {
            const double ps = out.state_marginals[t][s];
            if (ps == 0.0) continue;
            for (std::size_t a = 0; a < J; ++a) {
                std::size_t rem = a;
                double pj = ps;
                for (std::size_t k = n; k-- > 0;) {
                    pj *= act[(k * S + s) * U + rem % U];
                    rem /= U;
                }
                if (pj == 0.0) continue;
                for (std::size_t s2 = 0; s2 < S; ++s2) next[s2] += pj * spec.p(s, a, s2);
            }
        }
    }

    out.obs_marginals.assign(n, std::vector<double>(T * O, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t o = 0; o < O; ++o) {
                    out.obs_marginals[k][t * O + o] += out.state_marginals[t][s] * spec.o(k, s, o);
                }
            }
        }
    }

    const std::uint64_t count = out.space.size();
    out.masses.assign(n, std::vector<double>(count));
    for (std::size_t k = 0; k < n; ++k) {
        if (exec == Execution::serial) {
            kernels::trajectory_masses_reference(out.obs_marginals[k], policies[k].probs, O, U, T, out.masses[k]);
        } else {
            kernels::trajectory_masses(out.obs_marginals[k], policies[k].probs, O, U, T, out.masses[k]);
        }
    }
    return out;
}

// --- environment ----------------------------------------------------------

TabularDecPomdp::TabularDecPomdp(TabularDecPomdpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::size_t TabularDecPomdp::sample(std::span<const double> probs) {
    const double u = rng_.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    // rounding: fall back to the last positive entry
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) return i;
    }
    return 0;
}

StepResult TabularDecPomdp::observe() {
    StepResult r;
    for (std::size_t k = 0; k < spec_.n_agents; ++k) {
        const std::size_t o = sample({spec_.observation.data() + (k * spec_.n_states + state_) * spec_.n_obs, spec_.n_obs});
        std::vector<double> f(spec_.n_obs, 0.0);
        f[o] = 1.0;
        r.observations.push_back(append_agent_id(std::move(f), k, spec_.n_agents));
    }
    r.state.assign(spec_.n_states, 0.0);
    r.state[state_] = 1.0;
    r.avail = all_available(spec_.n_agents, spec_.n_actions);
    return r;
}

StepResult TabularDecPomdp::do_reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    state_ = sample(spec_.initial);
    return observe();
}

StepResult TabularDecPomdp::do_step(std::span<const int> joint_action) {
    const std::size_t a = spec_.joint_index(joint_action);
    const double reward = spec_.r(state_, a);
    state_ = sample({spec_.transition.data() + (state_ * spec_.joint_count() + a) * spec_.n_states, spec_.n_states});
    StepResult r = observe();
    r.reward = reward;
    return r;
}

}  // namespace air::env

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "air/adam.hpp"
#include "air/air_explore.hpp"
#include "air/env.hpp"
#include "air/identity_classifier.hpp"
#include "air/replay.hpp"
#include "air/value_decomposition.hpp"

namespace air::train {

// Invalid configuration value; key() names the offending field.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct TrainConfig {
    std::string env;  // "climb", "penalty", "spread" or a tabular spec path
    vd::MixerKind mixer = vd::MixerKind::qmix;
    std::size_t episodes_per_iter = 1;
    std::uint64_t total_steps = 0;
    double lr = 0.0005;             // agent + mixer
    double lr_classifier = 0.0005;
    double lr_alpha = 0.0005;
    double gamma = 0.99;
    double eps_start = explore::kEpsilonStart;
    double eps_finish = explore::kEpsilonFinish;
    double eps_anneal = explore::kEpsilonAnneal;
    std::size_t target_interval = 200;
    std::size_t batch_size = replay::kDefaultBatchSize;
    std::size_t buffer_capacity = replay::kDefaultCapacity;
    std::uint64_t seed = 0;

    bool air_enabled = true;      // false: no classifier training, alpha fixed at 0
    bool alpha_frozen = false;    // classifier still trains, alpha stays at alpha0
    double alpha0 = 0.0;
    bool per_agent_alpha = false;
    double ema_decay = 0.99;

    std::size_t workers = 1;
    std::size_t checkpoint_interval = 0;  // iterations; 0 = initial and final only

    std::size_t hidden_dim = 64;
    std::size_t classifier_hidden = 64;
    std::size_t embed_dim = 32;
    std::size_t hyper_dim = 64;

    // Throws ConfigError naming the first bad field.
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

// One metrics CSV row. NaN where the quantity was not computed this
// iteration (no batch sampled, or AIR disabled).
struct Metrics {
    std::uint64_t iter = 0;
    std::uint64_t env_steps = 0;
    double ret_mean = 0.0;
    double ret_std = 0.0;
    double td_loss = 0.0;
    double alpha = 0.0;
    double h_bar = 0.0;
    double clf_nll = 0.0;
    double clf_acc = 0.0;
    double epsilon = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "iter,env_steps,ret_mean,ret_std,td_loss,alpha,h_bar,clf_nll,clf_acc,epsilon";
std::string format_metrics(const Metrics& m);

struct UpdateStats {
    double td_loss = 0.0;
    clf::ClassifierStats classifier;  // count 0 when the classifier did not train
};

struct EvalReport {
    std::size_t episodes = 0;
    double ret_mean = 0.0;
    double ret_std = 0.0;
    double solve_rate = 0.0;
    // Per-step identity accuracy of the current classifier on these episodes.
    double clf_acc = 0.0;
    std::vector<replay::Episode> trajectories;
};

// Algorithm state: networks, optimizers, temperature, replay and counters.
// Updates are single-threaded; only rollouts fan out over workers.
class Trainer {
public:
    explicit Trainer(TrainConfig config);

    const TrainConfig& config() const { return config_; }
    const env::Environment& environment() const { return *env_; }

    // Collect, push, update once if a batch is available.
    Metrics iterate();
    bool done() const { return env_steps_ >= config_.total_steps; }

    // Episodes gathered by the last iterate(), in seed order.
    const std::vector<replay::Episode>& last_episodes() const { return last_episodes_; }

    // Rollouts for episode indices [first, first + count) with the current
    // parameters. Deterministic in (seed, index) and independent of workers.
    std::vector<replay::Episode> collect(std::uint64_t first, std::size_t count, double epsilon) const;

    // The learning step on a given batch: TD step, classifier step, H-bar
    // then alpha, target sync. Counts as one update.
    UpdateStats update(const replay::EpisodeBatch& batch);
    // TD loss of the current parameters on a batch, no update.
    double td_loss(const replay::EpisodeBatch& batch);

    // Greedy on Q, no shaping, no exploration. Does not touch training state.
    EvalReport evaluate(std::size_t episodes, std::uint64_t seed) const;

    std::vector<std::uint8_t> checkpoint() const;
    // Restores learner state from checkpoint(); the replay buffer is kept.
    void restore(std::span<const std::uint8_t> bytes);

    double epsilon() const;
    std::uint64_t iteration() const { return iter_; }
    std::uint64_t env_steps() const { return env_steps_; }
    std::uint64_t updates() const { return updates_; }
    std::uint64_t episodes() const { return episodes_; }
    const std::vector<double>& alpha() const { return alpha_; }
    double target_entropy() const { return temp_.target_entropy; }
    const replay::ReplayBuffer& buffer() const { return buffer_; }

    const vd::ValueNets& nets() const { return nets_; }
    const clf::IdentityClassifier& classifier() const { return clf_; }
    const ad::ParameterStore& online() const { return online_; }
    const ad::ParameterStore& target() const { return target_; }
    const ad::ParameterStore& classifier_params() const { return zeta_; }

private:
    replay::Episode rollout(const ad::ParameterStore& theta, const ad::ParameterStore& zeta,
                            const std::vector<double>& alpha, double epsilon, bool shape, Rng rng,
                            bool* solved = nullptr) const;

    TrainConfig config_;
    std::unique_ptr<env::Environment> env_;
    vd::ValueNets nets_;
    clf::IdentityClassifier clf_;
    ad::ParameterStore online_, target_, zeta_;
    ad::AdamState adam_theta_, adam_zeta_;
    explore::TemperatureState temp_;
    std::vector<double> alpha_;
    replay::ReplayBuffer buffer_;
    std::vector<replay::Episode> last_episodes_;
    std::uint64_t iter_ = 0, env_steps_ = 0, updates_ = 0, episodes_ = 0;
};

// Loads networks for `env` from a checkpoint file. The mixer kind is read
// from the checkpoint. Throws ConfigError on a dimension mismatch.
Trainer trainer_from_checkpoint(const std::string& env, const std::filesystem::path& checkpoint);

struct RunResult {
    std::filesystem::path metrics;
    std::filesystem::path final_checkpoint;
    Metrics last;
};

// Trains until total_steps, writing <dir>/metrics.csv every iteration and
// <dir>/checkpoints/ at iteration 0, every checkpoint_interval iterations
// and at the end. A numeric fault writes <dir>/diagnostics.txt and rethrows.
RunResult run(const TrainConfig& config, const std::filesystem::path& dir,
              const std::function<void(const Metrics&)>& on_iteration = {});

}  // namespace air::train

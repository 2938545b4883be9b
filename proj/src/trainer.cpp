#include "air/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>

#include "air/error.hpp"
#include "air/kernels.hpp"
#include "air/nn.hpp"

namespace air::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags keep training episodes, evaluation episodes and replay
// sampling on disjoint generator streams.
constexpr std::uint64_t kInitAgent = 1;
constexpr std::uint64_t kInitClassifier = 2;
constexpr std::uint64_t kEpisodeTag = std::uint64_t{1} << 60;
constexpr std::uint64_t kSampleTag = std::uint64_t{2} << 60;
constexpr std::uint64_t kEvalSalt = 0x6576616c75617465ULL;

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void mean_std(const std::vector<replay::Episode>& eps, double& mean, double& sd) {
    double s = 0.0;
    for (const auto& e : eps) s += e.total_reward();
    mean = s / static_cast<double>(eps.size());
    double v = 0.0;
    for (const auto& e : eps) v += (e.total_reward() - mean) * (e.total_reward() - mean);
    sd = std::sqrt(v / static_cast<double>(eps.size()));
}

// Checkpoint layout: learner parameters under their own names, the target
// copy under "target/", Adam moments under "adam.<net>.<m|v>/", scalars
// under "state.".
void put(ad::ParameterStore& out, const std::string& name, const Tensor& value) {
    out.add(name, value.shape()).value = value;
}

void put_scalars(ad::ParameterStore& out, const std::string& name, const std::vector<double>& v) {
    put(out, name, Tensor({1, v.size()}, v));
}

const Tensor& take(const ad::ParameterStore& in, const std::string& name, const std::vector<std::size_t>& shape) {
    if (!in.contains(name)) throw ConfigError("checkpoint", "missing tensor '" + name + "'");
    const Tensor& t = in.get(name).value;
    if (t.shape() != shape) {
        throw ConfigError("checkpoint", "tensor '" + name + "' has shape " + t.shape_string() + ", expected " +
                                            shape_string(shape));
    }
    return t;
}

void put_store(ad::ParameterStore& out, const ad::ParameterStore& s, const std::string& prefix) {
    for (const auto& p : s) put(out, prefix + p.name, p.value);
}

void take_store(const ad::ParameterStore& in, ad::ParameterStore& s, const std::string& prefix) {
    for (auto& p : s) p.value = take(in, prefix + p.name, p.value.shape());
}

void put_adam(ad::ParameterStore& out, const ad::ParameterStore& s, const ad::AdamState& a, const std::string& tag) {
    std::size_t i = 0;
    for (const auto& p : s) {
        put(out, "adam." + tag + ".m/" + p.name, a.m[i]);
        put(out, "adam." + tag + ".v/" + p.name, a.v[i]);
        ++i;
    }
}

void take_adam(const ad::ParameterStore& in, const ad::ParameterStore& s, ad::AdamState& a, const std::string& tag) {
    std::size_t i = 0;
    for (const auto& p : s) {
        a.m[i] = take(in, "adam." + tag + ".m/" + p.name, p.value.shape());
        a.v[i] = take(in, "adam." + tag + ".v/" + p.name, p.value.shape());
        ++i;
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(!env.empty(), "env", "required");
    require(episodes_per_iter >= 1, "episodes_per_iter", "must be at least 1");
    require(lr > 0.0 && std::isfinite(lr), "lr", "must be positive");
    require(lr_classifier > 0.0 && std::isfinite(lr_classifier), "lr_classifier", "must be positive");
    require(lr_alpha > 0.0 && std::isfinite(lr_alpha), "lr_alpha", "must be positive");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma", "must lie in [0, 1]");
    require(eps_start >= 0.0 && eps_start <= 1.0, "eps_start", "must lie in [0, 1]");
    require(eps_finish >= 0.0 && eps_finish <= eps_start, "eps_finish", "must lie in [0, eps_start]");
    require(eps_anneal > 0.0 && std::isfinite(eps_anneal), "eps_anneal", "must be positive");
    require(target_interval >= 1, "target_interval", "must be at least 1");
    require(batch_size >= 1, "batch_size", "must be at least 1");
    require(buffer_capacity >= batch_size, "buffer_capacity", "must hold at least one batch");
    require(std::isfinite(alpha0), "alpha0", "must be finite");
    require(air_enabled || alpha0 == 0.0, "alpha0", "must be 0 when air is off");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay", "must lie in [0, 1)");
    require(workers >= 1, "workers", "must be at least 1");
    require(hidden_dim >= 1 && classifier_hidden >= 1 && embed_dim >= 1 && hyper_dim >= 1, "hidden_dim",
            "network widths must be positive");
}

std::string format_metrics(const Metrics& m) {
    return std::to_string(m.iter) + "," + std::to_string(m.env_steps) + "," + fmt(m.ret_mean) + "," +
           fmt(m.ret_std) + "," + fmt(m.td_loss) + "," + fmt(m.alpha) + "," + fmt(m.h_bar) + "," +
           fmt(m.clf_nll) + "," + fmt(m.clf_acc) + "," + fmt(m.epsilon);
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)), buffer_(1) {
    config_.validate();
    try {
        env_ = env::make_env(config_.env);
    } catch (const std::exception& e) {
        throw ConfigError("env", e.what());
    }
    const std::size_t n = env_->n_agents(), U = env_->n_actions();
    nets_ = vd::ValueNets(config_.mixer, n, env_->obs_dim(), env_->state_dim(), U, config_.hidden_dim,
                          config_.embed_dim, config_.hyper_dim);
    clf_ = clf::IdentityClassifier(env_->obs_dim() - n, n, U, config_.classifier_hidden);
    nets_.declare(online_);
    clf_.declare(zeta_);
    Rng init_agent = Rng::stream(config_.seed, kInitAgent);
    nets_.init(online_, init_agent);
    Rng init_clf = Rng::stream(config_.seed, kInitClassifier);
    clf_.init(zeta_, init_clf);
    target_ = online_;
    adam_theta_ = ad::make_adam_state(online_);
    adam_zeta_ = ad::make_adam_state(zeta_);
    temp_ = explore::initial_temperature(n, config_.alpha0, config_.ema_decay);
    alpha_.assign(config_.per_agent_alpha ? n : 1, config_.air_enabled ? config_.alpha0 : 0.0);
    buffer_ = replay::ReplayBuffer(config_.buffer_capacity);
}

double Trainer::epsilon() const {
    return explore::epsilon_at(env_steps_, config_.eps_start, config_.eps_finish, config_.eps_anneal);
}

replay::Episode Trainer::rollout(const ad::ParameterStore& theta_in, const ad::ParameterStore& zeta_in,
                                 const std::vector<double>& alpha, double epsilon, bool shape, Rng rng,
                                 bool* solved) const {
    auto env = env_->clone();
    const std::size_t n = env->n_agents(), U = env->n_actions(), od = env->obs_dim(), sd = env->state_dim();
    const std::size_t feat = od - n;
    // Tape leaves bind to mutable parameters, so each rollout owns a copy.
    ad::ParameterStore theta = theta_in;
    ad::ParameterStore zeta = shape ? zeta_in : ad::ParameterStore{};

    replay::Episode ep;
    ep.n_agents = n;
    ep.n_actions = U;
    ep.obs_dim = od;
    ep.state_dim = sd;
    auto record = [&](const env::StepResult& s) {
        for (const auto& o : s.observations) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
        ep.state.insert(ep.state.end(), s.state.begin(), s.state.end());
        for (const auto& m : s.avail) ep.avail.insert(ep.avail.end(), m.begin(), m.end());
    };
    env::StepResult sr = env->reset(rng.next_u64());
    record(sr);

    ad::Tape tape(ad::GradMode::disabled);
    ad::Var h = nets_.agent.initial_hidden(tape, n);
    ad::Var hc = shape ? clf_.initial_hidden(tape, n) : ad::Var{};
    std::vector<int> prev(n, -1), joint(n);
    std::vector<double> log_q(U, 0.0);
    for (;;) {
        Tensor x = Tensor::matrix(n, od + U);
        for (std::size_t k = 0; k < n; ++k) {
            std::copy(sr.observations[k].begin(), sr.observations[k].end(), x.raw() + k * (od + U));
            if (prev[k] >= 0) x.at(k, od + static_cast<std::size_t>(prev[k])) = 1.0;
        }
        auto out = nets_.agent.step(tape, theta, tape.constant(x), h);
        h = out.hidden;
        const Tensor& q = out.out.value();
        Tensor lq;
        if (shape) {
            Tensor xc = Tensor::matrix(n, feat + U);
            for (std::size_t k = 0; k < n; ++k) {
                std::copy_n(sr.observations[k].begin(), feat, xc.raw() + k * (feat + U));
                if (prev[k] >= 0) xc.at(k, feat + static_cast<std::size_t>(prev[k])) = 1.0;
            }
            auto c = clf_.classify(tape, zeta, tape.constant(xc), hc);
            hc = c.hidden;
            lq = c.out.value();
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (shape) {
                for (std::size_t u = 0; u < U; ++u) log_q[u] = lq.at(k, u * n + k);
            }
            const double a = alpha[alpha.size() == 1 ? 0 : k];
            const auto shaped = explore::shaped_q(q.row_span(k), log_q, shape ? a : 0.0, sr.avail[k]);
            joint[k] = explore::select_action(shaped, sr.avail[k], epsilon, rng);
        }
        sr = env->step(joint);
        ep.actions.insert(ep.actions.end(), joint.begin(), joint.end());
        ep.reward.push_back(sr.reward);
        ep.terminal.push_back(sr.terminated ? 1 : 0);
        record(sr);
        prev = joint;
        if (sr.terminated) break;
    }
    if (solved) *solved = env->solved();
    return ep;
}

std::vector<replay::Episode> Trainer::collect(std::uint64_t first, std::size_t count, double epsilon) const {
    std::vector<double> alpha = config_.air_enabled ? alpha_ : std::vector<double>(alpha_.size(), 0.0);
    bool shape = false;
    for (double a : alpha) shape = shape || a != 0.0;
    std::vector<replay::Episode> out(count);
    std::vector<std::exception_ptr> errors(count);
    const long total = static_cast<long>(count);
    const int workers = static_cast<int>(std::min<std::size_t>(config_.workers, count));
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
    for (long i = 0; i < total; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                rollout(online_, zeta_, alpha, epsilon, shape,
                        Rng::stream(config_.seed, kEpisodeTag | (first + static_cast<std::uint64_t>(i))));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double Trainer::td_loss(const replay::EpisodeBatch& batch) {
    ad::Tape tape;
    return vd::td_loss(tape, nets_, online_, target_, batch, config_.gamma).loss.value().item();
}

UpdateStats Trainer::update(const replay::EpisodeBatch& batch) {
    UpdateStats stats;
    online_.zero_grad();
    {
        ad::Tape tape;
        auto td = vd::td_loss(tape, nets_, online_, target_, batch, config_.gamma);
        stats.td_loss = td.loss.value().item();
        if (!std::isfinite(stats.td_loss)) throw NumericFault("td loss is not finite");
        tape.backward(td.loss);
    }
    ad::adam_step(online_, adam_theta_, config_.lr);

    if (config_.air_enabled) {
        stats.classifier = clf::classifier_train_step(clf_, zeta_, adam_zeta_, batch, config_.lr_classifier);
        // H-bar first, then alpha, both from the classifier outputs before its update.
        temp_ = explore::update_target_entropy(temp_, stats.classifier.mean_nll);
        if (!config_.alpha_frozen) {
            if (alpha_.size() == 1) {
                explore::TemperatureState s = temp_;
                s.alpha = alpha_[0];
                alpha_[0] = explore::temperature_step(s, -stats.classifier.mean_nll, config_.lr_alpha).alpha;
            } else {
                for (std::size_t k = 0; k < alpha_.size(); ++k) {
                    explore::TemperatureState s = temp_;
                    s.alpha = alpha_[k];
                    alpha_[k] = explore::temperature_step(s, stats.classifier.mean_log_q_per_agent[k],
                                                          config_.lr_alpha)
                                    .alpha;
                }
            }
        }
    }
    ++updates_;
    if (updates_ % config_.target_interval == 0) target_.copy_values_from(online_);
    return stats;
}

Metrics Trainer::iterate() {
    Metrics m;
    m.iter = iter_ + 1;
    m.epsilon = epsilon();
    last_episodes_ = collect(episodes_, config_.episodes_per_iter, m.epsilon);
    episodes_ += config_.episodes_per_iter;
    for (const auto& e : last_episodes_) {
        env_steps_ += e.length();
        buffer_.push_episode(e);
    }
    mean_std(last_episodes_, m.ret_mean, m.ret_std);
    m.env_steps = env_steps_;
    m.td_loss = m.clf_nll = m.clf_acc = kNaN;

    Rng sampler = Rng::stream(config_.seed, kSampleTag | iter_);
    if (auto batch = buffer_.sample_batch(config_.batch_size, sampler)) {
        const UpdateStats s = update(*batch);
        m.td_loss = s.td_loss;
        if (s.classifier.count > 0) {
            m.clf_nll = s.classifier.mean_nll;
            m.clf_acc = s.classifier.accuracy;
        }
    }
    double a = 0.0;
    for (double v : alpha_) a += v;
    m.alpha = a / static_cast<double>(alpha_.size());
    m.h_bar = config_.air_enabled ? temp_.target_entropy : kNaN;
    ++iter_;
    return m;
}

EvalReport Trainer::evaluate(std::size_t episodes, std::uint64_t seed) const {
    if (episodes == 0) throw ConfigError("episodes", "must be at least 1");
    EvalReport r;
    r.episodes = episodes;
    r.trajectories.resize(episodes);
    const std::vector<double> zero(alpha_.size(), 0.0);
    const std::uint64_t base = splitmix64(seed ^ kEvalSalt);
    std::vector<std::uint8_t> solved(episodes, 0);
    const long total = static_cast<long>(episodes);
    const int workers = static_cast<int>(std::min<std::size_t>(config_.workers, episodes));
    std::vector<std::exception_ptr> errors(episodes);
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
    for (long j = 0; j < total; ++j) {
        const auto i = static_cast<std::size_t>(j);
        try {
            bool ok = false;
            r.trajectories[i] = rollout(online_, zeta_, zero, 0.0, false, Rng::stream(base, i), &ok);
            solved[i] = ok ? 1 : 0;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    mean_std(r.trajectories, r.ret_mean, r.ret_std);
    std::size_t hits = 0;
    for (auto s : solved) hits += s;
    r.solve_rate = static_cast<double>(hits) / static_cast<double>(episodes);

    std::vector<const replay::Episode*> ptrs;
    for (const auto& e : r.trajectories) ptrs.push_back(&e);
    ad::ParameterStore zeta = zeta_;
    r.clf_acc = clf::classifier_evaluate(clf_, zeta, replay::make_batch(ptrs)).accuracy;
    return r;
}

std::vector<std::uint8_t> Trainer::checkpoint() const {
    ad::ParameterStore out;
    put_store(out, online_, "");
    put_store(out, target_, "target/");
    put_store(out, zeta_, "");
    put_adam(out, online_, adam_theta_, "theta");
    put_adam(out, zeta_, adam_zeta_, "zeta");
    put_scalars(out, "state.counters",
                {static_cast<double>(iter_), static_cast<double>(env_steps_), static_cast<double>(updates_),
                 static_cast<double>(episodes_), static_cast<double>(adam_theta_.step),
                 static_cast<double>(adam_zeta_.step)});
    put_scalars(out, "state.alpha", alpha_);
    put_scalars(out, "state.h_bar", {temp_.target_entropy});
    return nn::save_params(out);
}

void Trainer::restore(std::span<const std::uint8_t> bytes) {
    const ad::ParameterStore in = nn::load_params(bytes);
    // Stage everything first so a bad checkpoint leaves this trainer untouched.
    ad::ParameterStore online = online_, target = target_, zeta = zeta_;
    ad::AdamState at = adam_theta_, az = adam_zeta_;
    take_store(in, online, "");
    take_store(in, target, "target/");
    take_store(in, zeta, "");
    take_adam(in, online, at, "theta");
    take_adam(in, zeta, az, "zeta");
    const Tensor& counters = take(in, "state.counters", {1, 6});
    const Tensor& alpha = take(in, "state.alpha", {1, alpha_.size()});
    const Tensor& h_bar = take(in, "state.h_bar", {1, 1});

    online_ = std::move(online);
    target_ = std::move(target);
    zeta_ = std::move(zeta);
    at.step = static_cast<std::uint64_t>(counters[4]);
    az.step = static_cast<std::uint64_t>(counters[5]);
    adam_theta_ = std::move(at);
    adam_zeta_ = std::move(az);
    iter_ = static_cast<std::uint64_t>(counters[0]);
    env_steps_ = static_cast<std::uint64_t>(counters[1]);
    updates_ = static_cast<std::uint64_t>(counters[2]);
    episodes_ = static_cast<std::uint64_t>(counters[3]);
    alpha_.assign(alpha.data().begin(), alpha.data().end());
    temp_.target_entropy = h_bar[0];
}

Trainer trainer_from_checkpoint(const std::string& env, const std::filesystem::path& checkpoint) {
    const auto bytes = nn::read_file(checkpoint);
    const ad::ParameterStore in = nn::load_params(bytes);
    TrainConfig cfg;
    cfg.env = env;
    cfg.mixer = in.contains("mixer.hyper_w1.w0") ? vd::MixerKind::qmix : vd::MixerKind::vdn;
    if (in.contains("state.alpha") && in.get("state.alpha").value.cols() > 1) cfg.per_agent_alpha = true;
    Trainer t(cfg);
    t.restore(bytes);
    return t;
}

namespace {

void write_checkpoint(const Trainer& t, const std::filesystem::path& dir, const char* name) {
    const auto bytes = t.checkpoint();
    nn::write_file_atomic(dir / name, bytes);
}

}  // namespace

RunResult run(const TrainConfig& config, const std::filesystem::path& dir,
              const std::function<void(const Metrics&)>& on_iteration) {
    Trainer trainer(config);
    const auto ckpt_dir = dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    RunResult result;
    result.metrics = dir / "metrics.csv";
    result.final_checkpoint = ckpt_dir / "final.ckpt";

    std::FILE* csv = std::fopen(result.metrics.c_str(), "wb");
    if (!csv) throw std::runtime_error("cannot open " + result.metrics.string());
    std::fprintf(csv, "%s\n", kMetricsHeader);
    std::fflush(csv);
    write_checkpoint(trainer, ckpt_dir, "iter_0.ckpt");
    try {
        while (!trainer.done()) {
            const Metrics m = trainer.iterate();
            std::fprintf(csv, "%s\n", format_metrics(m).c_str());
            std::fflush(csv);
            result.last = m;
            if (config.checkpoint_interval > 0 && m.iter % config.checkpoint_interval == 0) {
                write_checkpoint(trainer, ckpt_dir, ("iter_" + std::to_string(m.iter) + ".ckpt").c_str());
            }
            if (on_iteration) on_iteration(m);
        }
    } catch (const NumericFault& e) {
        std::fclose(csv);
        std::ofstream diag(dir / "diagnostics.txt");
        diag << "error: " << e.what() << "\n"
             << "iteration: " << trainer.iteration() << "\n"
             << "env_steps: " << trainer.env_steps() << "\n"
             << "updates: " << trainer.updates() << "\n"
             << "alpha: " << fmt(trainer.alpha()[0]) << "\n"
             << "h_bar: " << fmt(trainer.target_entropy()) << "\n"
             << "last_metrics: " << format_metrics(result.last) << "\n";
        throw;
    }
    std::fclose(csv);
    write_checkpoint(trainer, ckpt_dir, "final.ckpt");
    return result;
}

}  // namespace air::train

#include "air/identity_classifier.hpp"

#include "air/error.hpp"
#include "air/value_decomposition.hpp"

namespace air::clf {

using ad::Var;

IdentityClassifier::IdentityClassifier(std::size_t features, std::size_t n_agents, std::size_t n_actions,
                                       std::size_t hidden_dim)
    : features_(features),
      n_agents_(n_agents),
      n_actions_(n_actions),
      net_("clf", features + n_actions, n_actions * n_agents, hidden_dim) {
    if (n_agents == 0) throw ContractViolation("IdentityClassifier: no agents");
}

nn::RecurrentNet::StepOut IdentityClassifier::classify(ad::Tape& tape, ad::ParameterStore& store, Var input,
                                                       Var hidden) const {
    auto out = net_.step(tape, store, input, hidden);
    out.out = ad::log_softmax(out.out, n_agents_);
    return out;
}

Var IdentityClassifier::unroll(ad::Tape& tape, ad::ParameterStore& store, Var inputs, std::size_t steps,
                               std::size_t rows) const {
    return ad::log_softmax(net_.unroll(tape, store, inputs, steps, rows), n_agents_);
}

namespace {

struct Forward {
    Var loss;
    ClassifierStats stats;
};

Forward forward(ad::Tape& tape, const IdentityClassifier& net, ad::ParameterStore& store,
                const replay::EpisodeBatch& batch) {
    const std::size_t n = batch.n_agents, U = batch.n_actions, B = batch.batch, L = batch.max_len;
    if (n != net.n_agents() || U != net.n_actions() || batch.obs_dim - n != net.features()) {
        throw ContractViolation("classifier: batch dimensions do not match the network");
    }
    const double valid = batch.valid_steps();
    if (valid <= 0.0) throw ContractViolation("classifier: batch has no valid steps");
    const std::size_t rows = B * n;
    const Tensor all = vd::batch_inputs(batch, true);
    const Tensor inputs({L * rows, all.cols()}, std::vector<double>(all.raw(), all.raw() + L * rows * all.cols()));
    Var log_q = net.unroll(tape, store, tape.constant(inputs), L, rows);

    std::vector<std::size_t> column(L * rows);
    Tensor weights = Tensor::matrix(L * rows, 1);
    const double count = valid * static_cast<double>(n);
    for (std::size_t r = 0; r < L * rows; ++r) {
        const std::size_t k = r % n;
        column[r] = static_cast<std::size_t>(batch.actions[r]) * n + k;
        weights[r] = batch.mask[r / n] / count;
    }
    Var picked = ad::gather_cols(log_q, column);

    Forward f;
    f.loss = ad::affine(ad::weighted_sum(picked, weights), -1.0);
    ClassifierStats& st = f.stats;
    st.mean_log_q_per_agent.assign(n, 0.0);
    st.count = static_cast<std::size_t>(count);
    const Tensor& lq = log_q.value();
    double nll = 0.0, correct = 0.0;
    for (std::size_t r = 0; r < L * rows; ++r) {
        if (batch.mask[r / n] == 0.0) continue;
        const std::size_t k = r % n;
        const double v = picked.value()[r];
        nll -= v;
        st.mean_log_q_per_agent[k] += v / valid;
        const double* row = lq.raw() + r * lq.cols() + static_cast<std::size_t>(batch.actions[r]) * n;
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (row[j] > row[best]) best = j;
        }
        correct += best == k ? 1.0 : 0.0;
    }
    st.mean_nll = nll / count;
    st.accuracy = correct / count;
    return f;
}

}  // namespace

ClassifierStats classifier_evaluate(const IdentityClassifier& net, ad::ParameterStore& store,
                                    const replay::EpisodeBatch& batch) {
    ad::Tape tape(ad::GradMode::disabled);
    return forward(tape, net, store, batch).stats;
}

ClassifierStats classifier_train_step(const IdentityClassifier& net, ad::ParameterStore& store,
                                      ad::AdamState& adam, const replay::EpisodeBatch& batch, double lr) {
    ad::Tape tape;
    Forward f = forward(tape, net, store, batch);
    store.zero_grad();
    tape.backward(f.loss);
    ad::adam_step(store, adam, lr);
    return f.stats;
}

}  // namespace air::clf

#include "randrl/ppo.hpp"

#include <cmath>

#include "randrl/error.hpp"

namespace randrl {

void validate_hyperparams(const Hyperparams& hp) {
    auto in = [](float v, float lo, float hi) { return v >= lo && v <= hi; };
    if (!in(hp.gamma, 0.0f, 1.0f)) throw ValueError("hyperparams: gamma outside [0,1]");
    if (!in(hp.gae_lambda, 0.0f, 1.0f)) throw ValueError("hyperparams: gae_lambda outside [0,1]");
    if (hp.clip_eps <= 0.0f || hp.clip_eps >= 1.0f)
        throw ValueError("hyperparams: clip_eps outside (0,1)");
    if (hp.entropy_coef < 0.0f) throw ValueError("hyperparams: entropy_coef negative");
    if (hp.value_coef < 0.0f) throw ValueError("hyperparams: value_coef negative");
    if (hp.epochs < 1) throw ValueError("hyperparams: epochs must be >= 1");
    if (hp.minibatches < 1) throw ValueError("hyperparams: minibatches must be >= 1");
    if (hp.lr <= 0.0f) throw ValueError("hyperparams: lr must be positive");
    if (hp.beta_fm < 0.0f) throw ValueError("hyperparams: beta_fm negative");
    if (!in(hp.alpha_clean, 0.0f, 1.0f)) throw ValueError("hyperparams: alpha_clean outside [0,1]");
    if (hp.mc_samples < 1) throw ValueError("hyperparams: mc_samples must be >= 1");
    if (hp.fgsm_eps < 0.0f) throw ValueError("hyperparams: fgsm_eps negative");
}

void RolloutBuffer::resize(int n_envs_, int horizon_) {
    if (n_envs_ < 1 || horizon_ < 1)
        throw ValueError("RolloutBuffer: n_envs and horizon must be positive");
    n_envs = n_envs_;
    horizon = horizon_;
    steps.assign(static_cast<size_t>(n_envs) * horizon, Transition{});
    advantages.assign(static_cast<size_t>(n_envs) * horizon, 0.0f);
    returns_.assign(static_cast<size_t>(n_envs) * horizon, 0.0f);
}

GaeOut compute_gae(const std::vector<float>& rewards, const std::vector<float>& values,
                   const std::vector<uint8_t>& dones, float bootstrap_value, float gamma,
                   float lambda) {
    const size_t T = rewards.size();
    if (values.size() != T || dones.size() != T)
        throw ValueError("compute_gae: rewards/values/dones lengths differ");

    GaeOut out;
    out.advantages.resize(T);
    out.returns_.resize(T);
    float acc = 0.0f;
    for (size_t i = T; i-- > 0;) {
        const float not_done = dones[i] ? 0.0f : 1.0f;
        const float v_next = (i + 1 < T) ? values[i + 1] : bootstrap_value;
        const float delta = rewards[i] + gamma * not_done * v_next - values[i];
        acc = delta + gamma * lambda * not_done * acc;
        out.advantages[i] = acc;
        out.returns_[i] = acc + values[i];
    }
    return out;
}

void compute_gae_buffer(RolloutBuffer& buf, const std::vector<float>& bootstrap_values,
                        const Hyperparams& hp) {
    if (static_cast<int>(bootstrap_values.size()) != buf.n_envs)
        throw ValueError("compute_gae_buffer: one bootstrap value per environment required");
    std::vector<float> r(static_cast<size_t>(buf.horizon));
    std::vector<float> v(static_cast<size_t>(buf.horizon));
    std::vector<uint8_t> d(static_cast<size_t>(buf.horizon));
    for (int e = 0; e < buf.n_envs; ++e) {
        for (int t = 0; t < buf.horizon; ++t) {
            const Transition& tr = buf.at(e, t);
            r[static_cast<size_t>(t)] = tr.reward;
            v[static_cast<size_t>(t)] = tr.value;
            d[static_cast<size_t>(t)] = tr.done ? 1 : 0;
        }
        const GaeOut g = compute_gae(r, v, d, bootstrap_values[static_cast<size_t>(e)],
                                     hp.gamma, hp.gae_lambda);
        for (int t = 0; t < buf.horizon; ++t) {
            buf.advantages[static_cast<size_t>(e) * buf.horizon + t] =
                g.advantages[static_cast<size_t>(t)];
            buf.returns_[static_cast<size_t>(e) * buf.horizon + t] =
                g.returns_[static_cast<size_t>(t)];
        }
    }
}

void normalize_advantages(RolloutBuffer& buf) {
    if (buf.advantages.empty()) throw ValueError("normalize_advantages: empty buffer");
    double mean = 0.0;
    for (float a : buf.advantages) mean += a;
    mean /= static_cast<double>(buf.advantages.size());
    double var = 0.0;
    for (float a : buf.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(buf.advantages.size());
    const double inv = 1.0 / (std::sqrt(var) + 1e-8);
    for (float& a : buf.advantages)
        a = static_cast<float>((a - mean) * inv);
}

PpoLossOut ppo_loss(Tape& t, const Minibatch& mb, Var new_logits, Var new_values,
                    const Hyperparams& hp) {
    const int64_t n = t.val(new_logits).dim(0);
    if (static_cast<int64_t>(mb.actions.size()) != n ||
        static_cast<int64_t>(mb.old_log_probs.size()) != n ||
        static_cast<int64_t>(mb.advantages.size()) != n ||
        static_cast<int64_t>(mb.returns_.size()) != n)
        throw ValueError("ppo_loss: minibatch arrays disagree with logits batch size");
    if (t.val(new_values).rank() != 1 || t.val(new_values).dim(0) != n)
        throw ValueError("ppo_loss: values must be shape (N)");

    auto leaf = [&](const std::vector<float>& v) {
        Tensor x({n});
        for (int64_t i = 0; i < n; ++i) x.data()[i] = v[static_cast<size_t>(i)];
        return t.input(std::move(x));
    };
    const Var old_lp = leaf(mb.old_log_probs);
    const Var adv = leaf(mb.advantages);
    const Var ret = leaf(mb.returns_);

    const Var logp = t.log_softmax_rows(new_logits);
    const Var lp_taken = t.row_gather(logp, mb.actions);
    const Var ratio = t.exp_(t.sub(lp_taken, old_lp));
    const Var surr1 = t.mul(ratio, adv);
    const Var surr2 = t.mul(t.clamp(ratio, 1.0f - hp.clip_eps, 1.0f + hp.clip_eps), adv);
    const Var policy_term = t.scale(t.mean_all(t.min_elem(surr1, surr2)), -1.0f);

    const Var value_term = t.mean_all(t.square(t.sub(new_values, ret)));

    // mean entropy = -1/N sum_i sum_a p log p
    const Var probs = t.softmax_rows(new_logits);
    const Var entropy_term =
        t.scale(t.sum_all(t.mul(probs, logp)), -1.0f / static_cast<float>(n));

    const Var loss = t.add(t.add(policy_term, t.scale(value_term, hp.value_coef)),
                           t.scale(entropy_term, -hp.entropy_coef));

    PpoLossOut out;
    out.loss = loss;
    out.policy_loss = t.val(policy_term).data()[0];
    out.value_loss = t.val(value_term).data()[0];
    out.entropy = t.val(entropy_term).data()[0];
    return out;
}

}  // namespace randrl

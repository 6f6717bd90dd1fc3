#pragma once

#include <cstdint>
#include <vector>

#include "randrl/tape.hpp"
#include "randrl/tensor.hpp"

namespace randrl {

struct Hyperparams {
    float gamma = 0.999f;
    float gae_lambda = 0.95f;
    float clip_eps = 0.2f;
    float entropy_coef = 0.01f;
    float value_coef = 0.5f;
    int epochs = 3;
    int minibatches = 8;
    float lr = 5e-4f;
    float beta_fm = 0.002f;    // weight of the feature-matching loss
    float alpha_clean = 0.1f;  // identity probability of the randomizer prior
    int mc_samples = 10;       // kernel draws averaged at inference
    float fgsm_eps = 0.01f;    // adversarial probe step size
};

// Throws ValueError when any field leaves its documented range.
void validate_hyperparams(const Hyperparams& hp);

// One environment step as collected.  obs_rand records what the policy saw;
// it equals obs_clean whenever the method leaves raw inputs untouched
// (interior placements randomize inside the network).
struct Transition {
    Tensor obs_clean;
    Tensor obs_rand;
    int action = 0;
    float reward = 0.0f;
    float value = 0.0f;
    float log_prob = 0.0f;
    bool done = false;
};

// Env-major storage: steps[env * horizon + t].  Advantages and returns are
// filled by compute_gae_buffer before any update touches the buffer.
struct RolloutBuffer {
    int n_envs = 0;
    int horizon = 0;
    std::vector<Transition> steps;
    std::vector<float> advantages;
    std::vector<float> returns_;

    void resize(int n_envs_, int horizon_);
    Transition& at(int env, int t) { return steps[static_cast<size_t>(env) * horizon + t]; }
    const Transition& at(int env, int t) const {
        return steps[static_cast<size_t>(env) * horizon + t];
    }
    int64_t size() const { return static_cast<int64_t>(n_envs) * horizon; }
};

// Generalized advantage estimation over one environment's row:
//   delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t
//   A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
// with V_T = bootstrap_value, returns_t = A_t + V_t.
struct GaeOut {
    std::vector<float> advantages;
    std::vector<float> returns_;
};
GaeOut compute_gae(const std::vector<float>& rewards, const std::vector<float>& values,
                   const std::vector<uint8_t>& dones, float bootstrap_value, float gamma,
                   float lambda);

// Buffer-level wrapper; bootstrap_values holds V(s_T) per environment.
void compute_gae_buffer(RolloutBuffer& buf, const std::vector<float>& bootstrap_values,
                        const Hyperparams& hp);

// In-place shift/scale to mean 0, std 1 over the whole rollout (eps 1e-8).
void normalize_advantages(RolloutBuffer& buf);

// Minibatch slice fed to the loss; parallel arrays over samples.
struct Minibatch {
    std::vector<int> actions;
    std::vector<float> old_log_probs;
    std::vector<float> advantages;
    std::vector<float> returns_;
};

struct PpoLossOut {
    Var loss;  // scalar node on the caller's tape
    float policy_loss = 0.0f;
    float value_loss = 0.0f;
    float entropy = 0.0f;
};

// Clipped-surrogate PPO objective:
//   loss = -mean(min(rho A, clip(rho, 1-eps, 1+eps) A))
//          + value_coef mean((V - R)^2) - entropy_coef mean(H(pi))
// where rho = exp(new_logp - old_logp).  Advantages must already be
// normalized over the rollout.
PpoLossOut ppo_loss(Tape& t, const Minibatch& mb, Var new_logits, Var new_values,
                    const Hyperparams& hp);

}  // namespace randrl

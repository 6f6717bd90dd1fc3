#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "randrl/augment.hpp"
#include "randrl/cartpole.hpp"
#include "randrl/coingrid.hpp"
#include "randrl/policy.hpp"
#include "randrl/ppo.hpp"
#include "randrl/randnet.hpp"
#include "randrl/rng.hpp"

namespace randrl {

enum class Method { vanilla, rand, rand_fm, cutout, grayout, invert, jitter, domrand };

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);
bool method_uses_randomizer(Method m);          // rand and rand_fm
AugmentKind method_augment_kind(Method m);      // none unless an augmentation baseline

struct TrainConfig {
    Method method = Method::vanilla;
    Placement placement = Placement::first;
    Hyperparams hyper;
    int64_t total_timesteps = 100000;
    int n_envs = 8;
    int horizon = 256;
    std::vector<int> seen_themes{0};
    std::vector<int> unseen_themes;
    uint64_t seed = 0;
    bool fm_stop_grad_clean = false;  // stop-gradient on the clean feature branch
    int randomizer_kernel = 3;
    bool bad_coins = false;
    bool moving_obstacles = false;
};

void validate_train_config(const TrainConfig& cfg);

struct IterationStats {
    int64_t timestep = 0;
    int64_t iteration = 0;
    int episodes = 0;          // episodes that finished during this iteration
    float mean_return = 0.0f;  // over those episodes
    float success_rate = 0.0f;
    float loss = 0.0f;  // minibatch means
    float policy_loss = 0.0f;
    float value_loss = 0.0f;
    float entropy = 0.0f;
    float fm = 0.0f;
    uint64_t phi_hash = 0;  // hash of the iteration's randomizer kernel
};

// Mean over the batch of the squared feature distance between the randomized
// and clean forward passes.
Var fm_loss(Tape& t, Var features_rand, Var features_clean);

// Everything an environment slot must persist so a resumed run continues the
// exact same episode (level, theme, mid-episode state, augmentation draw).
struct EnvSlot {
    LevelSpec level;
    int theme_id = 0;
    CoinGridState state;
    AugmentParams aug;
    float episode_return = 0.0f;
};

class Trainer {
   public:
    explicit Trainer(TrainConfig cfg);

    // One cycle of: sample a kernel, collect horizon steps from every env,
    // estimate advantages, run the clipped-surrogate updates.
    IterationStats train_iteration();

    PolicyNet& policy() { return policy_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t timestep() const { return timestep_; }
    int64_t iteration() const { return iteration_; }
    int64_t adam_steps() const { return adam_t_; }
    std::vector<nn::AdamState>& adam_states() { return adam_; }

    // One JSON record per iteration is appended here when set.
    void set_stats_sink(std::ostream* sink) { sink_ = sink; }

    struct RuntimeState {
        std::vector<EnvSlot> envs;
        RngState act_rng, env_rng, rand_rng, shuffle_rng, aug_rng;
        int64_t timestep = 0;
        int64_t iteration = 0;
        int64_t adam_t = 0;
    };
    RuntimeState runtime_state() const;
    void restore_runtime_state(const RuntimeState& rs);

   private:
    void reset_slot(int i);
    Tensor policy_input(int i) const;            // augmented view when applicable
    Tensor seen_record(int i, const RandomNetParams* phi) const;
    void rebuild_env(int i);                     // env object from slot fields
    void write_stats(const IterationStats& s);

    TrainConfig cfg_;
    CoinGridConfig grid_cfg_;
    PolicyNet policy_;
    std::vector<nn::AdamState> adam_;
    int64_t adam_t_ = 0;

    std::vector<CoinGrid> envs_;
    std::vector<EnvSlot> slots_;
    std::vector<Tensor> cur_obs_;  // clean observation per env, kept in sync

    Rng act_rng_, env_rng_, rand_rng_, shuffle_rng_, aug_rng_;
    std::optional<RandomNetParams> id_phi_;  // cached identity kernel
    bool has_randomizer_ = false;

    int64_t timestep_ = 0;
    int64_t iteration_ = 0;
    std::ostream* sink_ = nullptr;
};

// CartPole counterpart: MLP policy, per-iteration diagonal input scaling in
// place of the convolutional kernel.  Methods vanilla and rand only.
struct CartTrainConfig {
    Method method = Method::vanilla;
    Hyperparams hyper;
    int64_t total_timesteps = 100000;
    int n_envs = 8;
    int horizon = 256;
    uint64_t seed = 0;
    DynamicsParams dynamics;  // training dynamics, defaults throughout
};

void validate_cart_train_config(const CartTrainConfig& cfg);

class CartTrainer {
   public:
    explicit CartTrainer(CartTrainConfig cfg);

    IterationStats train_iteration();

    MlpPolicy& policy() { return policy_; }
    const CartTrainConfig& config() const { return cfg_; }
    int64_t timestep() const { return timestep_; }
    int64_t iteration() const { return iteration_; }
    int64_t adam_steps() const { return adam_t_; }
    std::vector<nn::AdamState>& adam_states() { return adam_; }
    void set_stats_sink(std::ostream* sink) { sink_ = sink; }

    struct CartSlot {
        DynamicsParams dynamics;
        CartPoleState state;
        float episode_return = 0.0f;
    };
    struct RuntimeState {
        std::vector<CartSlot> envs;
        RngState act_rng, env_rng, rand_rng, shuffle_rng;
        int64_t timestep = 0;
        int64_t iteration = 0;
        int64_t adam_t = 0;
    };
    RuntimeState runtime_state() const;
    void restore_runtime_state(const RuntimeState& rs);

   private:
    void reset_slot(int i);
    Tensor policy_input(int i, const Tensor* diag) const;

    CartTrainConfig cfg_;
    MlpPolicy policy_;
    std::vector<nn::AdamState> adam_;
    int64_t adam_t_ = 0;

    std::vector<CartPole> envs_;
    std::vector<float> episode_return_;
    std::vector<Tensor> cur_obs_;

    Rng act_rng_, env_rng_, rand_rng_, shuffle_rng_;
    int64_t timestep_ = 0;
    int64_t iteration_ = 0;
    std::ostream* sink_ = nullptr;
};

}  // namespace randrl

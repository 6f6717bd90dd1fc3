#pragma once

#include <cstdint>

#include "randrl/coingrid.hpp"  // StepInfo
#include "randrl/rng.hpp"
#include "randrl/tensor.hpp"

namespace randrl {

// Pole-balancing benchmark with adjustable physics.  Training uses the
// defaults below; generalization is probed with parameters drawn from ranges
// that exclude a band around each default.
struct DynamicsParams {
    float force = 10.0f;   // magnitude of the push applied by either action
    float length = 0.5f;   // half pole length
    float masspole = 0.1f;
};

// Uniform draw over the held-out union ranges, segment chosen in proportion
// to its width: force [1,5] u [15,20], length [0.05,0.25] u [0.75,1.0],
// masspole [0.01,0.05] u [0.5,1.0].
DynamicsParams sample_heldout_dynamics(Rng& rng);

struct CartPoleConfig {
    int max_steps = 200;
};

struct CartPoleState {
    float x = 0.0f;
    float x_dot = 0.0f;
    float theta = 0.0f;
    float theta_dot = 0.0f;
    int step_count = 0;
    bool done = false;
};

struct CartStepResult {
    Tensor obs;  // (4,) raw state
    float reward = 0.0f;
    bool done = false;
    StepInfo info;  // death = fell or left the track, success = survived max_steps
};

class CartPole {
   public:
    CartPole(DynamicsParams dyn, CartPoleConfig cfg);

    Tensor reset(Rng& rng);        // each state component uniform in [-0.05, 0.05]
    CartStepResult step(int action);  // 0 push left, 1 push right

    Tensor observe() const;

    const CartPoleState& state() const { return st_; }
    void set_state(const CartPoleState& s) { st_ = s; }
    const DynamicsParams& dynamics() const { return dyn_; }
    const CartPoleConfig& config() const { return cfg_; }

   private:
    DynamicsParams dyn_;
    CartPoleConfig cfg_;
    CartPoleState st_;
};

constexpr int kCartObsDim = 4;
constexpr int kCartActions = 2;

}  // namespace randrl

#include "randrl/cartpole.hpp"

#include <cmath>

#include "randrl/error.hpp"

namespace randrl {

namespace {

constexpr float kGravity = 9.8f;
constexpr float kMassCart = 1.0f;
constexpr float kDt = 0.02f;
constexpr float kThetaLimit = 12.0f * 3.14159265358979323846f / 180.0f;
constexpr float kXLimit = 2.4f;

float pick_from_union(Rng& rng, float a0, float a1, float b0, float b1) {
    const float wa = a1 - a0, wb = b1 - b0;
    const bool first = rng.next_double() * (wa + wb) < wa;
    const float u = static_cast<float>(rng.next_double());
    return first ? a0 + u * wa : b0 + u * wb;
}

}  // namespace

DynamicsParams sample_heldout_dynamics(Rng& rng) {
    DynamicsParams d;
    d.force = pick_from_union(rng, 1.0f, 5.0f, 15.0f, 20.0f);
    d.length = pick_from_union(rng, 0.05f, 0.25f, 0.75f, 1.0f);
    d.masspole = pick_from_union(rng, 0.01f, 0.05f, 0.5f, 1.0f);
    return d;
}

CartPole::CartPole(DynamicsParams dyn, CartPoleConfig cfg) : dyn_(dyn), cfg_(cfg) {
    if (dyn_.force <= 0.0f || dyn_.length <= 0.0f || dyn_.masspole <= 0.0f)
        throw ValueError("CartPole: dynamics parameters must be positive");
    if (cfg_.max_steps < 1) throw ValueError("CartPole: max_steps must be positive");
}

Tensor CartPole::reset(Rng& rng) {
    st_ = CartPoleState{};
    st_.x = static_cast<float>(rng.uniform(-0.05, 0.05));
    st_.x_dot = static_cast<float>(rng.uniform(-0.05, 0.05));
    st_.theta = static_cast<float>(rng.uniform(-0.05, 0.05));
    st_.theta_dot = static_cast<float>(rng.uniform(-0.05, 0.05));
    return observe();
}

CartStepResult CartPole::step(int action) {
    if (st_.done) throw ContractError("CartPole::step called after episode end");
    if (action != 0 && action != 1) throw ValueError("CartPole::step: action must be 0 or 1");

    const float force = action == 1 ? dyn_.force : -dyn_.force;
    const float total_mass = kMassCart + dyn_.masspole;
    const float polemass_length = dyn_.masspole * dyn_.length;

    const float cos_t = std::cos(st_.theta);
    const float sin_t = std::sin(st_.theta);
    const float temp = (force + polemass_length * st_.theta_dot * st_.theta_dot * sin_t) / total_mass;
    const float theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (dyn_.length * (4.0f / 3.0f - dyn_.masspole * cos_t * cos_t / total_mass));
    const float x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

    // Semi-implicit Euler: velocities first, then positions with the new
    // velocities.
    st_.x_dot += kDt * x_acc;
    st_.x += kDt * st_.x_dot;
    st_.theta_dot += kDt * theta_acc;
    st_.theta += kDt * st_.theta_dot;
    ++st_.step_count;

    CartStepResult res;
    res.reward = 1.0f;
    const bool fell = std::abs(st_.theta) > kThetaLimit || std::abs(st_.x) > kXLimit;
    if (fell) {
        res.info.death = true;
    } else if (st_.step_count >= cfg_.max_steps) {
        res.info.success = true;
    }
    res.done = res.info.death || res.info.success;
    st_.done = res.done;
    res.obs = observe();
    return res;
}

Tensor CartPole::observe() const {
    Tensor t({kCartObsDim});
    t.data()[0] = st_.x;
    t.data()[1] = st_.x_dot;
    t.data()[2] = st_.theta;
    t.data()[3] = st_.theta_dot;
    return t;
}

}  // namespace randrl

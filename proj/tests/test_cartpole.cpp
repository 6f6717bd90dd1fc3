#include <cmath>

#include "doctest.h"
#include "randrl/cartpole.hpp"
#include "randrl/error.hpp"

using namespace randrl;

TEST_CASE("reset draws every component inside [-0.05, 0.05]") {
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const Tensor obs = env.reset(rng);
        for (int j = 0; j < kCartObsDim; ++j) {
            CHECK(obs.data()[j] >= -0.05f);
            CHECK(obs.data()[j] <= 0.05f);
        }
    }
}

TEST_CASE("pushing right accelerates the cart right and tips the pole back") {
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    env.set_state(CartPoleState{});
    const CartStepResult r = env.step(1);
    CHECK(r.obs.data()[1] > 0.0f);   // x_dot
    CHECK(r.obs.data()[3] < 0.0f);   // theta_dot
    CHECK(r.reward == 1.0f);
    CHECK_FALSE(r.done);

    env.set_state(CartPoleState{});
    const CartStepResult l = env.step(0);
    CHECK(l.obs.data()[1] < 0.0f);
    CHECK(l.obs.data()[3] > 0.0f);
}

TEST_CASE("integration is semi-implicit: positions move on the first step") {
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    env.set_state(CartPoleState{});
    const CartStepResult r = env.step(1);
    // Explicit Euler would keep x at zero because the old velocity was zero.
    CHECK(r.obs.data()[0] != 0.0f);
    CHECK(r.obs.data()[0] == doctest::Approx(0.02f * r.obs.data()[1]));
    CHECK(r.obs.data()[2] == doctest::Approx(0.02f * r.obs.data()[3]));
}

TEST_CASE("episode ends when the pole falls or the cart leaves the track") {
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    CartPoleState s;
    s.theta = 0.25f;  // already past the 12 degree limit
    env.set_state(s);
    const CartStepResult r = env.step(1);
    CHECK(r.done);
    CHECK(r.info.death);
    CHECK_FALSE(r.info.success);
    CHECK_THROWS_AS(env.step(0), ContractError);

    CartPole env2(DynamicsParams{}, CartPoleConfig{});
    CartPoleState s2;
    s2.x = 2.45f;
    env2.set_state(s2);
    CHECK(env2.step(1).info.death);
}

TEST_CASE("a linear feedback controller balances the default dynamics") {
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor obs = env.reset(rng);
        CartStepResult r;
        do {
            const float* s = obs.data();
            const int a = (0.5f * s[0] + 1.0f * s[1] + 12.0f * s[2] + 3.0f * s[3]) > 0.0f ? 1 : 0;
            r = env.step(a);
            obs = r.obs;
        } while (!r.done);
        CHECK(r.info.success);
        CHECK(env.state().step_count == 200);
    }
}

TEST_CASE("held-out dynamics avoid the band around the training defaults") {
    Rng rng(5);
    bool force_low = false, force_high = false;
    for (int i = 0; i < 200; ++i) {
        const DynamicsParams d = sample_heldout_dynamics(rng);
        CHECK(((d.force >= 1.0f && d.force <= 5.0f) || (d.force >= 15.0f && d.force <= 20.0f)));
        CHECK(((d.length >= 0.05f && d.length <= 0.25f) || (d.length >= 0.75f && d.length <= 1.0f)));
        CHECK(((d.masspole >= 0.01f && d.masspole <= 0.05f) || (d.masspole >= 0.5f && d.masspole <= 1.0f)));
        force_low |= d.force <= 5.0f;
        force_high |= d.force >= 15.0f;
    }
    CHECK(force_low);
    CHECK(force_high);
}

TEST_CASE("dynamics parameters change the trajectory") {
    CartPole a(DynamicsParams{}, CartPoleConfig{});
    CartPole b(DynamicsParams{.force = 10.0f, .length = 0.9f, .masspole = 0.1f}, CartPoleConfig{});
    CartPoleState s;
    s.theta = 0.05f;
    a.set_state(s);
    b.set_state(s);
    const CartStepResult ra = a.step(1);
    const CartStepResult rb = b.step(1);
    CHECK(ra.obs.data()[3] != rb.obs.data()[3]);
}

TEST_CASE("constructor rejects non-positive parameters") {
    CHECK_THROWS_AS(CartPole(DynamicsParams{.force = 0.0f, .length = 0.5f, .masspole = 0.1f},
                             CartPoleConfig{}),
                    ValueError);
    CHECK_THROWS_AS(CartPole(DynamicsParams{}, CartPoleConfig{.max_steps = 0}), ValueError);
    CartPole env(DynamicsParams{}, CartPoleConfig{});
    env.set_state(CartPoleState{});
    CHECK_THROWS_AS(env.step(2), ValueError);
}

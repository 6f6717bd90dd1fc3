#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "randrl/error.hpp"
#include "randrl/nn.hpp"
#include "randrl/policy.hpp"
#include "randrl/ppo.hpp"

using namespace randrl;

TEST_CASE("single-step gae reduces to the immediate reward") {
    const GaeOut g = compute_gae({1.0f}, {0.0f}, {1}, 0.0f, 0.999f, 0.95f);
    CHECK(g.advantages[0] == doctest::Approx(1.0f));
    CHECK(g.returns_[0] == doctest::Approx(1.0f));
}

TEST_CASE("lambda zero gives the one-step TD residual") {
    const std::vector<float> r{0.5f, -1.0f, 2.0f};
    const std::vector<float> v{0.3f, 0.7f, -0.2f};
    const std::vector<uint8_t> d{0, 0, 0};
    const float boot = 0.9f;
    const float gamma = 0.99f;
    const GaeOut g = compute_gae(r, v, d, boot, gamma, 0.0f);
    CHECK(g.advantages[0] == doctest::Approx(r[0] + gamma * v[1] - v[0]));
    CHECK(g.advantages[1] == doctest::Approx(r[1] + gamma * v[2] - v[1]));
    CHECK(g.advantages[2] == doctest::Approx(r[2] + gamma * boot - v[2]));
}

TEST_CASE("gae agrees with the summed-residual reference on random rollouts") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t T = 1 + rng.next_below(40);
        std::vector<float> r(T), v(T);
        std::vector<uint8_t> d(T);
        for (size_t i = 0; i < T; ++i) {
            r[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
            v[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
            d[i] = rng.bernoulli(0.15) ? 1 : 0;
        }
        const float boot = static_cast<float>(rng.uniform(-1.0, 1.0));
        const GaeOut g = compute_gae(r, v, d, boot, 0.999f, 0.95f);
        std::vector<float> ref;
        oracle::gae_reference(r, v, d, boot, 0.999, 0.95, ref);
        for (size_t i = 0; i < T; ++i) {
            CHECK(g.advantages[i] == doctest::Approx(ref[i]).epsilon(1e-4));
            CHECK(g.returns_[i] == doctest::Approx(ref[i] + v[i]).epsilon(1e-4));
        }
    }
}

TEST_CASE("with lambda one and no dones, returns telescope to discounted sums") {
    const std::vector<float> r{1.0f, 1.0f, 1.0f, 1.0f};
    const std::vector<float> v{0.3f, -0.1f, 0.2f, 0.5f};
    const std::vector<uint8_t> d{0, 0, 0, 0};
    const float boot = 0.7f;
    const float gamma = 0.9f;
    const GaeOut g = compute_gae(r, v, d, boot, gamma, 1.0f);
    for (size_t t = 0; t < r.size(); ++t) {
        double mc = 0.0, c = 1.0;
        for (size_t l = t; l < r.size(); ++l) {
            mc += c * r[l];
            c *= gamma;
        }
        mc += c * boot;
        CHECK(g.returns_[t] == doctest::Approx(mc).epsilon(1e-5));
    }
}

TEST_CASE("gae rejects mismatched array lengths") {
    CHECK_THROWS_AS(compute_gae({1.0f, 2.0f}, {0.0f}, {0, 0}, 0.0f, 0.99f, 0.95f), ValueError);
}

TEST_CASE("buffer-level gae matches row-level calls and episode boundaries hold") {
    Hyperparams hp;
    RolloutBuffer buf;
    buf.resize(2, 5);
    Rng rng(7);
    for (int e = 0; e < 2; ++e)
        for (int t = 0; t < 5; ++t) {
            Transition& tr = buf.at(e, t);
            tr.reward = static_cast<float>(rng.uniform(-1.0, 1.0));
            tr.value = static_cast<float>(rng.uniform(-1.0, 1.0));
            tr.done = (e == 0 && t == 2);
        }
    compute_gae_buffer(buf, {0.5f, -0.5f}, hp);

    for (int e = 0; e < 2; ++e) {
        std::vector<float> r(5), v(5);
        std::vector<uint8_t> d(5);
        for (int t = 0; t < 5; ++t) {
            r[static_cast<size_t>(t)] = buf.at(e, t).reward;
            v[static_cast<size_t>(t)] = buf.at(e, t).value;
            d[static_cast<size_t>(t)] = buf.at(e, t).done ? 1 : 0;
        }
        const GaeOut g = compute_gae(r, v, d, e == 0 ? 0.5f : -0.5f, hp.gamma, hp.gae_lambda);
        for (int t = 0; t < 5; ++t)
            CHECK(buf.advantages[static_cast<size_t>(e) * 5 + t] ==
                  doctest::Approx(g.advantages[static_cast<size_t>(t)]));
    }

    // Nothing after the done at (0,2) leaks into advantages before it.
    RolloutBuffer buf2 = buf;
    buf2.at(0, 4).reward += 100.0f;
    compute_gae_buffer(buf2, {0.5f, -0.5f}, hp);
    for (int t = 0; t <= 2; ++t)
        CHECK(buf2.advantages[static_cast<size_t>(t)] ==
              doctest::Approx(buf.advantages[static_cast<size_t>(t)]));
}

TEST_CASE("advantage normalization is idempotent with mean 0 and std 1") {
    RolloutBuffer buf;
    buf.resize(1, 64);
    Rng rng(5);
    for (float& a : buf.advantages) a = static_cast<float>(rng.uniform(-3.0, 9.0));
    normalize_advantages(buf);

    double mean = 0.0;
    for (float a : buf.advantages) mean += a;
    mean /= 64.0;
    double var = 0.0;
    for (float a : buf.advantages) var += (a - mean) * (a - mean);
    var /= 64.0;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-4));

    std::vector<float> once = buf.advantages;
    normalize_advantages(buf);
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(std::abs(buf.advantages[i] - once[i]) < 1e-6);
}

TEST_CASE("validate_hyperparams rejects out-of-range fields") {
    Hyperparams hp;
    CHECK_NOTHROW(validate_hyperparams(hp));
    hp.gamma = 1.5f;
    CHECK_THROWS_AS(validate_hyperparams(hp), ValueError);
    hp = Hyperparams{};
    hp.clip_eps = 0.0f;
    CHECK_THROWS_AS(validate_hyperparams(hp), ValueError);
    hp = Hyperparams{};
    hp.epochs = 0;
    CHECK_THROWS_AS(validate_hyperparams(hp), ValueError);
    hp = Hyperparams{};
    hp.alpha_clean = -0.1f;
    CHECK_THROWS_AS(validate_hyperparams(hp), ValueError);
    hp = Hyperparams{};
    hp.mc_samples = 0;
    CHECK_THROWS_AS(validate_hyperparams(hp), ValueError);
}

namespace {

// Logits/values nodes built from explicit tensors for loss-formula checks.
struct LossFixture {
    Tape t;
    Var logits, values;
    LossFixture(const Tensor& lg, const Tensor& vl) {
        logits = t.input(lg);
        values = t.input(vl);
    }
};

}  // namespace

TEST_CASE("ppo_loss with unchanged policy reduces to -mean(advantage)") {
    const int64_t n = 4, a = 4;
    Tensor logits({n, a});  // zeros -> uniform policy
    Tensor values({n});
    Minibatch mb;
    const float logp_uniform = std::log(0.25f);
    for (int i = 0; i < n; ++i) {
        mb.actions.push_back(i % 4);
        mb.old_log_probs.push_back(logp_uniform);
        mb.advantages.push_back(0.5f * static_cast<float>(i) - 0.75f);
        mb.returns_.push_back(0.0f);
    }
    Hyperparams hp;
    hp.value_coef = 0.0f;
    hp.entropy_coef = 0.0f;
    LossFixture f(logits, values);
    const PpoLossOut out = ppo_loss(f.t, mb, f.logits, f.values, hp);
    float mean_adv = 0.0f;
    for (float x : mb.advantages) mean_adv += x;
    mean_adv /= 4.0f;
    CHECK(f.t.val(out.loss).data()[0] == doctest::Approx(-mean_adv).epsilon(1e-5));
    CHECK(out.policy_loss == doctest::Approx(-mean_adv).epsilon(1e-5));
}

TEST_CASE("large ratios with positive advantage hit the clipped branch") {
    // One sample; the new policy puts much more mass on the taken action
    // than the old one did, so rho > 1.2 and the surrogate uses 1.2 * A.
    Tensor logits({1, 2});
    logits.data()[0] = 2.0f;
    logits.data()[1] = -2.0f;
    Tensor values({1});
    Minibatch mb;
    mb.actions = {0};
    mb.old_log_probs = {std::log(0.5f)};
    mb.advantages = {1.0f};
    mb.returns_ = {0.0f};
    Hyperparams hp;
    hp.value_coef = 0.0f;
    hp.entropy_coef = 0.0f;
    LossFixture f(logits, values);
    const PpoLossOut out = ppo_loss(f.t, mb, f.logits, f.values, hp);
    CHECK(f.t.val(out.loss).data()[0] == doctest::Approx(-1.2f).epsilon(1e-5));
}

TEST_CASE("uniform policy entropy equals log of the action count") {
    Tensor logits({3, 4});
    Tensor values({3});
    Minibatch mb;
    for (int i = 0; i < 3; ++i) {
        mb.actions.push_back(0);
        mb.old_log_probs.push_back(std::log(0.25f));
        mb.advantages.push_back(0.0f);
        mb.returns_.push_back(0.0f);
    }
    Hyperparams hp;
    LossFixture f(logits, values);
    const PpoLossOut out = ppo_loss(f.t, mb, f.logits, f.values, hp);
    CHECK(out.entropy == doctest::Approx(std::log(4.0f)).epsilon(1e-6));
}

TEST_CASE("value term is the mean squared error against returns") {
    Tensor logits({2, 2});
    Tensor values({2});
    values.data()[0] = 1.0f;
    values.data()[1] = -1.0f;
    Minibatch mb;
    mb.actions = {0, 1};
    mb.old_log_probs = {std::log(0.5f), std::log(0.5f)};
    mb.advantages = {0.0f, 0.0f};
    mb.returns_ = {0.0f, 1.0f};
    Hyperparams hp;
    hp.entropy_coef = 0.0f;
    LossFixture f(logits, values);
    const PpoLossOut out = ppo_loss(f.t, mb, f.logits, f.values, hp);
    CHECK(out.value_loss == doctest::Approx((1.0f + 4.0f) / 2.0f).epsilon(1e-5));
    CHECK(f.t.val(out.loss).data()[0] ==
          doctest::Approx(hp.value_coef * 2.5f).epsilon(1e-4));
}

TEST_CASE("one ppo update on a two-armed bandit favors the rewarding arm") {
    Rng init(3);
    MlpPolicy net(MlpConfig{}, init);
    Tensor states({8, 4});  // all-zero states; tanh trunk keeps them at zero
    Rng act_rng(5);

    const ActOut before = net.act(states, false, &act_rng);
    Minibatch mb;
    for (int i = 0; i < 8; ++i) {
        mb.actions.push_back(before.actions[static_cast<size_t>(i)]);
        mb.old_log_probs.push_back(before.log_probs[static_cast<size_t>(i)]);
        // Arm 0 pays off, arm 1 does not; advantages already centered.
        mb.advantages.push_back(before.actions[static_cast<size_t>(i)] == 0 ? 1.0f : -1.0f);
        mb.returns_.push_back(before.actions[static_cast<size_t>(i)] == 0 ? 1.0f : 0.0f);
    }

    Hyperparams hp;
    for (auto* p : net.params()) p->zero_grad();
    Tape t;
    const MlpOut o = net.forward(t, t.input(states));
    const PpoLossOut loss = ppo_loss(t, mb, o.logits, o.value, hp);
    t.backward(loss.loss);

    std::vector<nn::AdamState> adam;
    for (auto* p : net.params()) adam.emplace_back(p->value.shape());
    nn::AdamConfig ac;
    ac.lr = 0.01f;
    size_t i = 0;
    for (auto* p : net.params()) nn::adam_step(*p, adam[i++], ac, 1);

    const ActOut after = net.act(states, false, &act_rng);
    CHECK(after.probs.data()[0] > before.probs.data()[0]);
}

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "randrl/error.hpp"
#include "randrl/trainer.hpp"

using namespace randrl;

namespace {

// Small enough to keep each iteration under a second.
TrainConfig tiny_config(Method m) {
    TrainConfig cfg;
    cfg.method = m;
    cfg.n_envs = 2;
    cfg.horizon = 16;
    cfg.hyper.epochs = 1;
    cfg.hyper.minibatches = 4;
    cfg.seen_themes = {0, 3};
    cfg.seed = 11;
    return cfg;
}

bool params_equal(PolicyNet& a, PolicyNet& b) {
    auto pa = a.params(), pb = b.params();
    for (size_t i = 0; i < pa.size(); ++i) {
        if (!pa[i]->value.same_shape(pb[i]->value)) return false;
        if (std::memcmp(pa[i]->value.data(), pb[i]->value.data(),
                        static_cast<size_t>(pa[i]->value.numel()) * 4) != 0)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("fm_loss is the batch-mean squared feature distance") {
    Tape t;
    Tensor a({2, 3}), b({2, 3});
    for (int i = 0; i < 6; ++i) a.data()[i] = static_cast<float>(i);
    b = a;
    const Var same = fm_loss(t, t.input(a), t.input(b));
    CHECK(t.val(same).data()[0] == 0.0f);

    Tensor h1({1, 2}), h2({1, 2});
    h1.data()[0] = 1.0f;
    h1.data()[1] = 0.0f;
    h2.data()[0] = 0.0f;
    h2.data()[1] = 1.0f;
    Tape t2;
    const Var v = fm_loss(t2, t2.input(h1), t2.input(h2));
    CHECK(t2.val(v).data()[0] == doctest::Approx(2.0f));

    Tape t3;
    Tensor c({3, 2});
    CHECK_THROWS_AS(fm_loss(t3, t3.input(h1), t3.input(c)), ValueError);
}

TEST_CASE("config validation catches the documented misuses") {
    TrainConfig cfg = tiny_config(Method::vanilla);
    CHECK_NOTHROW(validate_train_config(cfg));

    cfg.seen_themes.clear();
    CHECK_THROWS_AS(validate_train_config(cfg), ValueError);

    cfg = tiny_config(Method::domrand);
    cfg.seen_themes = {0};
    CHECK_THROWS_AS(validate_train_config(cfg), ValueError);

    cfg = tiny_config(Method::rand);
    cfg.placement = Placement::none;
    CHECK_THROWS_AS(validate_train_config(cfg), ValueError);

    cfg = tiny_config(Method::vanilla);
    cfg.horizon = 9;  // 2*9 samples do not split into 4 minibatches
    CHECK_THROWS_AS(validate_train_config(cfg), ValueError);

    cfg = tiny_config(Method::vanilla);
    cfg.unseen_themes = {3};  // already a seen theme
    CHECK_THROWS_AS(validate_train_config(cfg), ValueError);

    CHECK_THROWS_AS(method_from_string("dropout"), ValueError);
    CHECK(method_from_string(method_to_string(Method::rand_fm)) == Method::rand_fm);
}

TEST_CASE("identical config and seed reproduce the run exactly") {
    Trainer a(tiny_config(Method::rand));
    Trainer b(tiny_config(Method::rand));
    for (int i = 0; i < 2; ++i) {
        const IterationStats sa = a.train_iteration();
        const IterationStats sb = b.train_iteration();
        CHECK(sa.loss == sb.loss);
        CHECK(sa.policy_loss == sb.policy_loss);
        CHECK(sa.entropy == sb.entropy);
        CHECK(sa.mean_return == sb.mean_return);
        CHECK(sa.phi_hash == sb.phi_hash);
    }
    CHECK(params_equal(a.policy(), b.policy()));
}

TEST_CASE("vanilla replays exactly as rand with alpha one") {
    TrainConfig vc = tiny_config(Method::vanilla);
    TrainConfig rc = tiny_config(Method::rand);
    rc.hyper.alpha_clean = 1.0f;  // every draw is the identity kernel

    Trainer v(vc), r(rc);
    for (int i = 0; i < 2; ++i) {
        const IterationStats sv = v.train_iteration();
        const IterationStats sr = r.train_iteration();
        CHECK(sv.loss == sr.loss);
        CHECK(sv.mean_return == sr.mean_return);
    }
    CHECK(params_equal(v.policy(), r.policy()));
}

TEST_CASE("rand_fm with identity draws contributes exactly zero fm loss") {
    TrainConfig cfg = tiny_config(Method::rand_fm);
    cfg.hyper.alpha_clean = 1.0f;
    Trainer t(cfg);
    const IterationStats s = t.train_iteration();
    CHECK(s.fm == 0.0f);
}

TEST_CASE("total loss decomposes into ppo plus beta times fm") {
    TrainConfig cfg = tiny_config(Method::rand_fm);
    cfg.hyper.minibatches = 1;  // single update per iteration: stats are one minibatch
    cfg.hyper.alpha_clean = 0.0f;
    Trainer t(cfg);
    const IterationStats s = t.train_iteration();
    CHECK(s.fm > 0.0f);
    const float ppo = s.policy_loss + cfg.hyper.value_coef * s.value_loss -
                      cfg.hyper.entropy_coef * s.entropy;
    CHECK(std::abs(s.loss - (ppo + cfg.hyper.beta_fm * s.fm)) <=
          1e-6f * std::max(1.0f, std::abs(s.loss)));
}

TEST_CASE("each iteration draws a fresh kernel and logs its hash") {
    TrainConfig cfg = tiny_config(Method::rand);
    cfg.hyper.alpha_clean = 0.0f;  // never identity
    Trainer t(cfg);
    const IterationStats s1 = t.train_iteration();
    const IterationStats s2 = t.train_iteration();
    CHECK(s1.phi_hash != 0);
    CHECK(s1.phi_hash != s2.phi_hash);
}

TEST_CASE("a fresh trainer restored from runtime state continues identically") {
    TrainConfig cfg = tiny_config(Method::rand_fm);
    Trainer a(cfg);
    a.train_iteration();
    a.train_iteration();

    Trainer b(cfg);
    // Transplant parameters, optimizer state, and runtime bookkeeping.
    auto pa = a.policy().params(), pb = b.policy().params();
    for (size_t i = 0; i < pa.size(); ++i) pb[i]->value = pa[i]->value;
    b.adam_states() = a.adam_states();
    b.restore_runtime_state(a.runtime_state());
    CHECK(b.timestep() == a.timestep());
    CHECK(b.iteration() == a.iteration());

    const IterationStats sa = a.train_iteration();
    const IterationStats sb = b.train_iteration();
    CHECK(sa.loss == sb.loss);
    CHECK(sa.mean_return == sb.mean_return);
    CHECK(sa.success_rate == sb.success_rate);
    CHECK(sa.phi_hash == sb.phi_hash);
    CHECK(params_equal(a.policy(), b.policy()));
}

TEST_CASE("augmentation methods train end to end") {
    for (Method m : {Method::cutout, Method::jitter}) {
        TrainConfig cfg = tiny_config(m);
        Trainer t(cfg);
        const IterationStats s = t.train_iteration();
        CHECK(s.timestep == 32);
        CHECK(std::isfinite(s.loss));
        // Early policies are near uniform over the four actions.
        CHECK(s.entropy > 1.0f);
        CHECK(s.entropy < 1.4f);
    }
}

TEST_CASE("poisoned weights abort with a numeric error") {
    TrainConfig cfg = tiny_config(Method::vanilla);
    Trainer t(cfg);
    for (auto* p : t.policy().params())
        if (p->name == "fc.w")
            for (int64_t i = 0; i < p->value.numel(); ++i) p->value.data()[i] = 1e30f;
    CHECK_THROWS_AS(t.train_iteration(), NumericError);
}

TEST_CASE("cartpole trainer is reproducible and method-sensitive") {
    CartTrainConfig cfg;
    cfg.n_envs = 2;
    cfg.horizon = 32;
    cfg.hyper.epochs = 1;
    cfg.hyper.minibatches = 4;
    cfg.seed = 7;

    CartTrainer a(cfg), b(cfg);
    const IterationStats sa = a.train_iteration();
    const IterationStats sb = b.train_iteration();
    CHECK(sa.loss == sb.loss);
    CHECK(sa.mean_return == sb.mean_return);
    CHECK(sa.phi_hash == 0);  // vanilla never draws a diagonal

    cfg.method = Method::rand;
    CartTrainer c(cfg);
    const IterationStats sc = c.train_iteration();
    CHECK(sc.phi_hash != 0);
    CHECK(sc.loss != sa.loss);

    cfg.method = Method::rand_fm;
    CHECK_THROWS_AS(CartTrainer{cfg}, ValueError);
}

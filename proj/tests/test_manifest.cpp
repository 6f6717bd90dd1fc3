#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "randrl/error.hpp"
#include "randrl/manifest.hpp"

using namespace randrl;
using nlohmann::json;

namespace {

// Every field away from its default, so a dropped key cannot hide.
ExperimentManifest full_coin_manifest() {
    ExperimentManifest m;
    m.output_dir = "runs/full";
    m.train.method = Method::rand_fm;
    m.train.placement = Placement::residual;
    m.train.total_timesteps = 4096;
    m.train.n_envs = 4;
    m.train.horizon = 32;
    m.train.seed = 99;
    m.train.seen_themes = {1, 2};
    m.train.unseen_themes = {7, 8};
    m.train.fm_stop_grad_clean = true;
    m.train.randomizer_kernel = 1;
    m.train.bad_coins = true;
    m.train.moving_obstacles = true;
    m.train.hyper.gamma = 0.99f;
    m.train.hyper.gae_lambda = 0.9f;
    m.train.hyper.clip_eps = 0.1f;
    m.train.hyper.entropy_coef = 0.02f;
    m.train.hyper.value_coef = 0.7f;
    m.train.hyper.epochs = 2;
    m.train.hyper.minibatches = 2;
    m.train.hyper.lr = 1e-3f;
    m.train.hyper.beta_fm = 0.01f;
    m.train.hyper.alpha_clean = 0.25f;
    m.train.hyper.mc_samples = 5;
    m.train.hyper.fgsm_eps = 0.02f;
    m.eval.episodes = 3;
    m.eval.mc_samples = {1, 5};
    m.eval.eval_seed = 77;
    m.eval.max_episode_steps = 64;
    m.eval.metric_cycle = false;
    m.eval.metric_entropy = true;
    m.eval.metric_fgsm = false;
    m.eval.checkpoint_every = 1024;
    m.eval.eval_every = 512;
    m.eval.ablate_seeds = {3, 4};
    return m;
}

// Insert one bogus key at a JSON pointer and expect rejection.
void check_rejects_key(json base, const std::string& pointer) {
    base[json::json_pointer(pointer)]["bogus_key"] = 1;
    CHECK_THROWS_WITH_AS(parse_manifest(base.dump()),
                         doctest::Contains("unknown key"), ValueError);
}

}  // namespace

TEST_CASE("a fully specified manifest survives a serialize-parse round trip") {
    const ExperimentManifest m = full_coin_manifest();
    const std::string s1 = serialize_manifest(m);
    const ExperimentManifest back = parse_manifest(s1);
    CHECK(serialize_manifest(back) == s1);

    CHECK_FALSE(back.cartpole);
    CHECK(back.output_dir == "runs/full");
    CHECK(back.train.method == Method::rand_fm);
    CHECK(back.train.placement == Placement::residual);
    CHECK(back.train.total_timesteps == 4096);
    CHECK(back.train.seen_themes == std::vector<int>{1, 2});
    CHECK(back.train.unseen_themes == std::vector<int>{7, 8});
    CHECK(back.train.fm_stop_grad_clean);
    CHECK(back.train.randomizer_kernel == 1);
    CHECK(back.train.hyper.gamma == 0.99f);
    CHECK(back.train.hyper.lr == 1e-3f);
    CHECK(back.train.hyper.mc_samples == 5);
    CHECK(back.eval.mc_samples == std::vector<int>{1, 5});
    CHECK(back.eval.max_episode_steps == 64);
    CHECK_FALSE(back.eval.metric_cycle);
    CHECK(back.eval.metric_entropy);
    CHECK(back.eval.ablate_seeds == std::vector<uint64_t>{3, 4});
}

TEST_CASE("a cartpole manifest carries its dynamics block") {
    ExperimentManifest m;
    m.cartpole = true;
    m.output_dir = "runs/cart";
    m.cart.method = Method::rand;
    m.cart.total_timesteps = 2048;
    m.cart.n_envs = 4;
    m.cart.horizon = 64;
    m.cart.seed = 5;
    m.cart.dynamics.force = 12.5f;
    m.cart.dynamics.length = 0.8f;
    m.cart.dynamics.masspole = 0.2f;

    const std::string s1 = serialize_manifest(m);
    const ExperimentManifest back = parse_manifest(s1);
    CHECK(serialize_manifest(back) == s1);
    CHECK(back.cartpole);
    CHECK(back.cart.method == Method::rand);
    CHECK(back.cart.dynamics.force == 12.5f);
    CHECK(back.cart.dynamics.length == 0.8f);
    CHECK(back.cart.dynamics.masspole == 0.2f);

    // The grid-specific keys do not exist for this experiment.
    json j = json::parse(s1);
    j["train"]["placement"] = "first";
    CHECK_THROWS_WITH_AS(parse_manifest(j.dump()), doctest::Contains("unknown key"),
                         ValueError);
}

TEST_CASE("missing sections fall back to the documented defaults") {
    const ExperimentManifest parsed = parse_manifest(R"({"schema_version": 1})");
    CHECK(serialize_manifest(parsed) == serialize_manifest(ExperimentManifest{}));
    CHECK(parsed.output_dir == "runs/out");
    CHECK(parsed.train.method == Method::vanilla);
    CHECK(parsed.eval.episodes == 48);
    CHECK(parsed.eval.max_episode_steps == 256);

    // A train block without hyper keeps every hyperparameter at its default.
    const ExperimentManifest partial =
        parse_manifest(R"({"experiment": "coingrid", "train": {"seed": 3}})");
    CHECK(partial.train.seed == 3);
    CHECK(partial.train.hyper.gamma == Hyperparams{}.gamma);
    CHECK(partial.train.hyper.lr == Hyperparams{}.lr);
}

TEST_CASE("unknown keys are rejected at every nesting level") {
    const json coin = json::parse(serialize_manifest(full_coin_manifest()));
    check_rejects_key(coin, "");
    check_rejects_key(coin, "/train");
    check_rejects_key(coin, "/train/hyper");
    check_rejects_key(coin, "/eval");
    check_rejects_key(coin, "/eval/metrics");

    ExperimentManifest cart;
    cart.cartpole = true;
    const json cj = json::parse(serialize_manifest(cart));
    check_rejects_key(cj, "/train");
    check_rejects_key(cj, "/train/dynamics");
}

TEST_CASE("invalid values are rejected before anything runs") {
    const json base = json::parse(serialize_manifest(full_coin_manifest()));
    auto with = [&](const std::string& pointer, json v) {
        json j = base;
        j[json::json_pointer(pointer)] = std::move(v);
        return j.dump();
    };

    CHECK_THROWS_AS(parse_manifest(with("/schema_version", 2)), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/experiment", "pong")), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/output_dir", "")), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/train/method", "dropout")), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/train/placement", "middle")), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/train/n_envs", "eight")), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/train/seen_themes", json::array())), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/episodes", 0)), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/mc_samples", json::array())), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/mc_samples", json::array({0}))), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/max_episode_steps", 0)), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/checkpoint_every", -1)), ValueError);
    CHECK_THROWS_AS(parse_manifest(with("/eval/ablate_seeds", json::array())), ValueError);

    CHECK_THROWS_AS(parse_manifest("{ not json"), ValueError);
    CHECK_THROWS_AS(parse_manifest("[1, 2]"), ValueError);
}

TEST_CASE("manifests load from disk and missing files are io errors") {
    const std::string path = "manifest_test.json";
    {
        std::ofstream f(path);
        f << serialize_manifest(full_coin_manifest());
    }
    const ExperimentManifest m = load_manifest(path);
    CHECK(m.train.total_timesteps == 4096);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_manifest("no_such_manifest.json"), IoError);
}

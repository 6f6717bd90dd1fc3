#include "randrl/manifest.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "randrl/error.hpp"

namespace randrl {

namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValueError("manifest: " + where + " must be an object");
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ValueError("manifest: unknown key \"" + it.key() + "\" in " + where);
    }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValueError("manifest: bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

Hyperparams parse_hyper(const json& j) {
    expect_object(j, "hyper");
    reject_unknown_keys(j, "hyper",
                        {"gamma", "gae_lambda", "clip_eps", "entropy_coef", "value_coef",
                         "epochs", "minibatches", "lr", "beta_fm", "alpha_clean", "mc_samples",
                         "fgsm_eps"});
    Hyperparams hp;
    get_if(j, "gamma", hp.gamma);
    get_if(j, "gae_lambda", hp.gae_lambda);
    get_if(j, "clip_eps", hp.clip_eps);
    get_if(j, "entropy_coef", hp.entropy_coef);
    get_if(j, "value_coef", hp.value_coef);
    get_if(j, "epochs", hp.epochs);
    get_if(j, "minibatches", hp.minibatches);
    get_if(j, "lr", hp.lr);
    get_if(j, "beta_fm", hp.beta_fm);
    get_if(j, "alpha_clean", hp.alpha_clean);
    get_if(j, "mc_samples", hp.mc_samples);
    get_if(j, "fgsm_eps", hp.fgsm_eps);
    return hp;
}

json dump_hyper(const Hyperparams& hp) {
    json j;
    j["gamma"] = hp.gamma;
    j["gae_lambda"] = hp.gae_lambda;
    j["clip_eps"] = hp.clip_eps;
    j["entropy_coef"] = hp.entropy_coef;
    j["value_coef"] = hp.value_coef;
    j["epochs"] = hp.epochs;
    j["minibatches"] = hp.minibatches;
    j["lr"] = hp.lr;
    j["beta_fm"] = hp.beta_fm;
    j["alpha_clean"] = hp.alpha_clean;
    j["mc_samples"] = hp.mc_samples;
    j["fgsm_eps"] = hp.fgsm_eps;
    return j;
}

TrainConfig parse_coin_train(const json& j) {
    expect_object(j, "train");
    reject_unknown_keys(j, "train",
                        {"method", "placement", "total_timesteps", "n_envs", "horizon", "seed",
                         "seen_themes", "unseen_themes", "fm_stop_grad_clean",
                         "randomizer_kernel", "bad_coins", "moving_obstacles", "hyper"});
    TrainConfig c;
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("placement"))
        c.placement = placement_from_string(j.at("placement").get<std::string>());
    get_if(j, "total_timesteps", c.total_timesteps);
    get_if(j, "n_envs", c.n_envs);
    get_if(j, "horizon", c.horizon);
    get_if(j, "seed", c.seed);
    get_if(j, "seen_themes", c.seen_themes);
    get_if(j, "unseen_themes", c.unseen_themes);
    get_if(j, "fm_stop_grad_clean", c.fm_stop_grad_clean);
    get_if(j, "randomizer_kernel", c.randomizer_kernel);
    get_if(j, "bad_coins", c.bad_coins);
    get_if(j, "moving_obstacles", c.moving_obstacles);
    if (j.contains("hyper")) c.hyper = parse_hyper(j.at("hyper"));
    return c;
}

json dump_coin_train(const TrainConfig& c) {
    json j;
    j["method"] = method_to_string(c.method);
    j["placement"] = placement_to_string(c.placement);
    j["total_timesteps"] = c.total_timesteps;
    j["n_envs"] = c.n_envs;
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    j["seen_themes"] = c.seen_themes;
    j["unseen_themes"] = c.unseen_themes;
    j["fm_stop_grad_clean"] = c.fm_stop_grad_clean;
    j["randomizer_kernel"] = c.randomizer_kernel;
    j["bad_coins"] = c.bad_coins;
    j["moving_obstacles"] = c.moving_obstacles;
    j["hyper"] = dump_hyper(c.hyper);
    return j;
}

CartTrainConfig parse_cart_train(const json& j) {
    expect_object(j, "train");
    reject_unknown_keys(
        j, "train",
        {"method", "total_timesteps", "n_envs", "horizon", "seed", "dynamics", "hyper"});
    CartTrainConfig c;
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    get_if(j, "total_timesteps", c.total_timesteps);
    get_if(j, "n_envs", c.n_envs);
    get_if(j, "horizon", c.horizon);
    get_if(j, "seed", c.seed);
    if (j.contains("dynamics")) {
        const json& d = j.at("dynamics");
        expect_object(d, "train.dynamics");
        reject_unknown_keys(d, "train.dynamics", {"force", "length", "masspole"});
        get_if(d, "force", c.dynamics.force);
        get_if(d, "length", c.dynamics.length);
        get_if(d, "masspole", c.dynamics.masspole);
    }
    if (j.contains("hyper")) c.hyper = parse_hyper(j.at("hyper"));
    return c;
}

json dump_cart_train(const CartTrainConfig& c) {
    json j;
    j["method"] = method_to_string(c.method);
    j["total_timesteps"] = c.total_timesteps;
    j["n_envs"] = c.n_envs;
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    j["dynamics"] = {{"force", c.dynamics.force},
                     {"length", c.dynamics.length},
                     {"masspole", c.dynamics.masspole}};
    j["hyper"] = dump_hyper(c.hyper);
    return j;
}

EvalPlan parse_eval(const json& j) {
    expect_object(j, "eval");
    reject_unknown_keys(j, "eval",
                        {"episodes", "mc_samples", "eval_seed", "max_episode_steps", "metrics",
                         "checkpoint_every", "eval_every", "ablate_seeds"});
    EvalPlan p;
    get_if(j, "episodes", p.episodes);
    get_if(j, "mc_samples", p.mc_samples);
    get_if(j, "eval_seed", p.eval_seed);
    get_if(j, "max_episode_steps", p.max_episode_steps);
    get_if(j, "checkpoint_every", p.checkpoint_every);
    get_if(j, "eval_every", p.eval_every);
    get_if(j, "ablate_seeds", p.ablate_seeds);
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        expect_object(m, "eval.metrics");
        reject_unknown_keys(m, "eval.metrics", {"cycle", "entropy", "fgsm"});
        get_if(m, "cycle", p.metric_cycle);
        get_if(m, "entropy", p.metric_entropy);
        get_if(m, "fgsm", p.metric_fgsm);
    }
    return p;
}

json dump_eval(const EvalPlan& p) {
    json j;
    j["episodes"] = p.episodes;
    j["mc_samples"] = p.mc_samples;
    j["eval_seed"] = p.eval_seed;
    j["max_episode_steps"] = p.max_episode_steps;
    j["metrics"] = {{"cycle", p.metric_cycle},
                    {"entropy", p.metric_entropy},
                    {"fgsm", p.metric_fgsm}};
    j["checkpoint_every"] = p.checkpoint_every;
    j["eval_every"] = p.eval_every;
    j["ablate_seeds"] = p.ablate_seeds;
    return j;
}

}  // namespace

void validate_manifest(const ExperimentManifest& m) {
    if (m.schema_version != kManifestSchemaVersion)
        throw ValueError("manifest: schema_version " + std::to_string(m.schema_version) +
                         " is not supported (expected " +
                         std::to_string(kManifestSchemaVersion) + ")");
    if (m.output_dir.empty()) throw ValueError("manifest: output_dir must not be empty");
    if (m.cartpole) {
        validate_cart_train_config(m.cart);
    } else {
        validate_train_config(m.train);
    }
    if (m.eval.episodes < 1) throw ValueError("manifest: eval.episodes must be positive");
    if (m.eval.mc_samples.empty())
        throw ValueError("manifest: eval.mc_samples must list at least one M");
    for (int msamp : m.eval.mc_samples)
        if (msamp < 1) throw ValueError("manifest: eval.mc_samples entries must be positive");
    if (m.eval.max_episode_steps < 1)
        throw ValueError("manifest: eval.max_episode_steps must be positive");
    if (m.eval.checkpoint_every < 0 || m.eval.eval_every < 0)
        throw ValueError("manifest: checkpoint_every and eval_every must be nonnegative");
    if (m.eval.ablate_seeds.empty())
        throw ValueError("manifest: ablate_seeds must list at least one seed");
}

ExperimentManifest parse_manifest(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValueError(std::string("manifest: invalid JSON: ") + e.what());
    }
    expect_object(j, "manifest");
    reject_unknown_keys(j, "manifest",
                        {"schema_version", "experiment", "output_dir", "train", "eval"});

    ExperimentManifest m;
    get_if(j, "schema_version", m.schema_version);
    if (j.contains("experiment")) {
        std::string exp = j.at("experiment").get<std::string>();
        if (exp == "coingrid") {
            m.cartpole = false;
        } else if (exp == "cartpole") {
            m.cartpole = true;
        } else {
            throw ValueError("manifest: experiment must be \"coingrid\" or \"cartpole\"");
        }
    }
    get_if(j, "output_dir", m.output_dir);
    if (j.contains("train")) {
        if (m.cartpole) {
            m.cart = parse_cart_train(j.at("train"));
        } else {
            m.train = parse_coin_train(j.at("train"));
        }
    }
    if (j.contains("eval")) m.eval = parse_eval(j.at("eval"));

    validate_manifest(m);
    return m;
}

ExperimentManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_manifest(ss.str());
}

std::string serialize_manifest(const ExperimentManifest& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["experiment"] = m.cartpole ? "cartpole" : "coingrid";
    j["output_dir"] = m.output_dir;
    j["train"] = m.cartpole ? dump_cart_train(m.cart) : dump_coin_train(m.train);
    j["eval"] = dump_eval(m.eval);
    return j.dump(2);
}

}  // namespace randrl

#include "randrl/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <vector>

#include "json.hpp"
#include "randrl/checkpoint.hpp"
#include "randrl/error.hpp"

namespace randrl {

namespace {

namespace fs = std::filesystem;

// One command per output directory: created exclusively, removed on exit,
// including the exception path.
class DirLock {
   public:
    explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw ValueError("output directory " + dir +
                             " is locked by another command (remove " + path_ +
                             " if that run is gone)");
        }
        ::close(fd);
    }
    ~DirLock() { ::unlink(path_.c_str()); }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

   private:
    std::string path_;
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

ExperimentManifest manifest_with_overrides(const CliOptions& opt) {
    if (opt.manifest_path.empty())
        throw ValueError("this command needs --manifest; see README for the format");
    ExperimentManifest m = load_manifest(opt.manifest_path);
    if (!opt.out_override.empty()) m.output_dir = opt.out_override;
    if (opt.seed_override) {
        if (m.cartpole) {
            m.cart.seed = *opt.seed_override;
        } else {
            m.train.seed = *opt.seed_override;
        }
    }
    if (opt.envs_override) {
        if (m.cartpole) {
            m.cart.n_envs = *opt.envs_override;
        } else {
            m.train.n_envs = *opt.envs_override;
        }
    }
    if (!opt.method_override.empty()) {
        Method method = method_from_string(opt.method_override);
        if (m.cartpole) {
            m.cart.method = method;
        } else {
            m.train.method = method;
        }
    }
    validate_manifest(m);
    return m;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw ValueError("median of nothing");
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

CoinGridConfig grid_from(const TrainConfig& cfg, const EvalPlan& plan) {
    CoinGridConfig g;
    g.bad_coins = cfg.bad_coins;
    g.moving_obstacles = cfg.moving_obstacles;
    g.max_steps = plan.max_episode_steps;
    return g;
}

EvalConfig eval_config_from(const TrainConfig& cfg, const EvalPlan& plan, int m_samples) {
    EvalConfig ec;
    ec.n_episodes = plan.episodes;
    ec.mc_samples = m_samples;
    ec.use_randomizer =
        method_uses_randomizer(cfg.method) && cfg.placement != Placement::none;
    ec.grid = grid_from(cfg, plan);
    ec.seed = plan.eval_seed;
    return ec;
}

void fill_prior(EvalConfig& ec, PolicyNet& policy, const TrainConfig& cfg) {
    if (ec.use_randomizer) {
        ec.prior = policy.randomizer_prior(cfg.randomizer_kernel);
        ec.prior.alpha = cfg.hyper.alpha_clean;
    }
}

void add_eval_result(MetricsReport& rep, const std::string& key, const EvalResult& res) {
    rep.scalars["success_" + key] = res.success_rate;
    rep.scalars["mean_return_" + key] = res.mean_return;
    std::vector<double> wins(res.successes.begin(), res.successes.end());
    std::vector<double> rets(res.returns_.begin(), res.returns_.end());
    rep.series["successes_" + key] = std::move(wins);
    rep.series["returns_" + key] = std::move(rets);
}

// Greedy identity-kernel episodes on the given themes with every observation
// replaced by its gradient-sign perturbation before the policy sees it.
EvalResult evaluate_under_attack(PolicyNet& policy, const std::vector<int>& themes,
                                 const EvalConfig& cfg, float eps) {
    Rng root(cfg.seed);
    Rng level_rng = root.split("eval-levels");
    EvalResult res;
    double return_sum = 0.0;
    int successes = 0;
    std::optional<RandomNetParams> id;
    if (policy.config().placement != Placement::none)
        id = identity_params(policy.randomizer_prior());
    const RandomNetParams* phi = id ? &*id : nullptr;
    for (int e = 0; e < cfg.n_episodes; ++e) {
        int theme = themes[static_cast<size_t>(e) % themes.size()];
        LevelSpec level = generate_level(level_rng.next_u64(), cfg.grid);
        CoinGrid env(level, make_theme(theme), cfg.grid);
        Tensor obs = env.reset();
        float ep_return = 0.0f;
        bool success = false;
        while (true) {
            Tensor adv = fgsm_attack(policy, obs, eps);
            ActOut a = policy.act(adv.reshaped({1, adv.dim(0), adv.dim(1), adv.dim(2)}), phi,
                                  true, nullptr);
            StepResult sr = env.step(static_cast<Action>(a.actions[0]));
            ep_return += sr.reward;
            obs = sr.obs;
            if (sr.done) {
                success = sr.info.success;
                break;
            }
        }
        res.successes.push_back(success ? 1 : 0);
        res.returns_.push_back(ep_return);
        return_sum += ep_return;
        successes += success ? 1 : 0;
    }
    res.success_rate = static_cast<float>(successes) / static_cast<float>(cfg.n_episodes);
    res.mean_return = static_cast<float>(return_sum / cfg.n_episodes);
    return res;
}

// Gradient-attention entropy averaged along a trajectory (capped so a
// timed-out episode cannot blow up the eval budget).
double trajectory_entropy(PolicyNet& policy, const Trajectory& traj) {
    RandomNetParams id;
    bool has = policy.config().placement != Placement::none;
    if (has) id = identity_params(policy.randomizer_prior());
    ActivationMap maps;
    size_t limit = std::min<size_t>(traj.observations.size(), 64);
    for (size_t i = 0; i < limit; ++i)
        maps.push_back(gradcam_map(policy, traj.observations[i], id));
    return activation_entropy(maps);
}

void write_report(const MetricsReport& rep, const std::string& dir) {
    std::ofstream f(dir + "/report.json");
    if (!f) throw IoError("cannot write " + dir + "/report.json");
    f << report_to_json(rep) << "\n";
}

void print_report(const MetricsReport& rep) {
    for (const auto& [k, v] : rep.scalars) std::cout << k << " = " << v << "\n";
}

struct LoadedRun {
    Checkpoint cp;
    std::unique_ptr<Trainer> coin;
    std::unique_ptr<CartTrainer> cart;
};

LoadedRun load_run(const std::string& checkpoint_path) {
    if (checkpoint_path.empty()) throw ValueError("this command needs --checkpoint");
    LoadedRun run;
    run.cp = load_checkpoint(checkpoint_path);
    if (run.cp.cartpole) {
        run.cart = std::make_unique<CartTrainer>(run.cp.cart_config);
        apply_checkpoint(run.cp, *run.cart);
    } else {
        run.coin = std::make_unique<Trainer>(run.cp.coin_config);
        apply_checkpoint(run.cp, *run.coin);
    }
    return run;
}

// Mid-training probe appended to the stats log.
void log_eval_line(std::ostream& sink, PolicyNet& policy, const TrainConfig& cfg,
                   const EvalPlan& plan, int64_t timestep) {
    EvalConfig ec = eval_config_from(cfg, plan, cfg.hyper.mc_samples);
    fill_prior(ec, policy, cfg);
    nlohmann::json j;
    j["kind"] = "eval";
    j["timestep"] = timestep;
    j["success_seen"] = evaluate(policy, cfg.seen_themes, ec).success_rate;
    if (!cfg.unseen_themes.empty())
        j["success_unseen"] = evaluate(policy, cfg.unseen_themes, ec).success_rate;
    sink << j.dump() << "\n";
    sink.flush();
}

void log_cart_eval_line(std::ostream& sink, MlpPolicy& policy, const CartTrainConfig& cfg,
                        const EvalPlan& plan, int64_t timestep);

int train_coin(const ExperimentManifest& m) {
    Trainer trainer(m.train);
    std::ofstream stats(m.output_dir + "/stats.jsonl", std::ios::app);
    if (!stats) throw IoError("cannot open stats log in " + m.output_dir);
    trainer.set_stats_sink(&stats);

    const std::string cp_path = m.output_dir + "/checkpoint.bin";
    while (trainer.timestep() < m.train.total_timesteps) {
        int64_t before = trainer.timestep();
        trainer.train_iteration();
        int64_t after = trainer.timestep();
        if (m.eval.checkpoint_every > 0 &&
            before / m.eval.checkpoint_every != after / m.eval.checkpoint_every)
            save_checkpoint(make_checkpoint(trainer), cp_path);
        if (m.eval.eval_every > 0 && before / m.eval.eval_every != after / m.eval.eval_every)
            log_eval_line(stats, trainer.policy(), m.train, m.eval, after);
    }
    save_checkpoint(make_checkpoint(trainer), cp_path);
    std::cout << "trained " << trainer.timestep() << " steps over " << trainer.iteration()
              << " iterations; checkpoint at " << cp_path << "\n";
    return 0;
}

int train_coin_resume(const ExperimentManifest& m, const std::string& checkpoint_path) {
    Checkpoint cp = load_checkpoint(checkpoint_path);
    if (cp.cartpole) throw ValueError("--checkpoint holds a cartpole run; manifest is coingrid");
    // The snapshot decides what the run is; the manifest only extends it.
    TrainConfig cfg = cp.coin_config;
    cfg.total_timesteps = m.train.total_timesteps;
    Trainer trainer(cfg);
    apply_checkpoint(cp, trainer);
    std::ofstream stats(m.output_dir + "/stats.jsonl", std::ios::app);
    if (!stats) throw IoError("cannot open stats log in " + m.output_dir);
    trainer.set_stats_sink(&stats);

    const std::string cp_path = m.output_dir + "/checkpoint.bin";
    while (trainer.timestep() < m.train.total_timesteps) {
        int64_t before = trainer.timestep();
        trainer.train_iteration();
        int64_t after = trainer.timestep();
        if (m.eval.checkpoint_every > 0 &&
            before / m.eval.checkpoint_every != after / m.eval.checkpoint_every)
            save_checkpoint(make_checkpoint(trainer), cp_path);
        if (m.eval.eval_every > 0 && before / m.eval.eval_every != after / m.eval.eval_every)
            log_eval_line(stats, trainer.policy(), cfg, m.eval, after);
    }
    save_checkpoint(make_checkpoint(trainer), cp_path);
    std::cout << "resumed to " << trainer.timestep() << " steps; checkpoint at " << cp_path
              << "\n";
    return 0;
}

int train_cart(const ExperimentManifest& m, const std::string& checkpoint_path) {
    std::unique_ptr<CartTrainer> trainer;
    if (checkpoint_path.empty()) {
        trainer = std::make_unique<CartTrainer>(m.cart);
    } else {
        Checkpoint cp = load_checkpoint(checkpoint_path);
        if (!cp.cartpole)
            throw ValueError("--checkpoint holds a coingrid run; manifest is cartpole");
        CartTrainConfig cfg = cp.cart_config;
        cfg.total_timesteps = m.cart.total_timesteps;
        trainer = std::make_unique<CartTrainer>(cfg);
        apply_checkpoint(cp, *trainer);
    }
    std::ofstream stats(m.output_dir + "/stats.jsonl", std::ios::app);
    if (!stats) throw IoError("cannot open stats log in " + m.output_dir);
    trainer->set_stats_sink(&stats);

    const std::string cp_path = m.output_dir + "/checkpoint.bin";
    while (trainer->timestep() < m.cart.total_timesteps) {
        int64_t before = trainer->timestep();
        trainer->train_iteration();
        int64_t after = trainer->timestep();
        if (m.eval.checkpoint_every > 0 &&
            before / m.eval.checkpoint_every != after / m.eval.checkpoint_every)
            save_checkpoint(make_checkpoint(*trainer), cp_path);
        if (m.eval.eval_every > 0 && before / m.eval.eval_every != after / m.eval.eval_every)
            log_cart_eval_line(stats, trainer->policy(), m.cart, m.eval, after);
    }
    save_checkpoint(make_checkpoint(*trainer), cp_path);
    std::cout << "trained " << trainer->timestep() << " steps; checkpoint at " << cp_path
              << "\n";
    return 0;
}

// Greedy CartPole episodes; fresh dynamics per episode when heldout is set.
EvalResult evaluate_cart(MlpPolicy& policy, const DynamicsParams& train_dyn, bool heldout,
                         int n_episodes, uint64_t seed) {
    Rng root(seed);
    Rng reset_rng = root.split("cart-eval-reset");
    Rng dyn_rng = root.split("cart-eval-dynamics");
    EvalResult res;
    double return_sum = 0.0;
    int successes = 0;
    for (int e = 0; e < n_episodes; ++e) {
        DynamicsParams dyn = heldout ? sample_heldout_dynamics(dyn_rng) : train_dyn;
        CartPole env(dyn, CartPoleConfig{});
        Tensor obs = env.reset(reset_rng);
        float ep_return = 0.0f;
        bool success = false;
        while (true) {
            ActOut a = policy.act(obs.reshaped({1, obs.numel()}), true, nullptr);
            CartStepResult sr = env.step(a.actions[0]);
            ep_return += sr.reward;
            obs = sr.obs;
            if (sr.done) {
                success = sr.info.success;
                break;
            }
        }
        res.successes.push_back(success ? 1 : 0);
        res.returns_.push_back(ep_return);
        return_sum += ep_return;
        successes += success ? 1 : 0;
    }
    res.success_rate = static_cast<float>(successes) / static_cast<float>(n_episodes);
    res.mean_return = static_cast<float>(return_sum / n_episodes);
    return res;
}

void log_cart_eval_line(std::ostream& sink, MlpPolicy& policy, const CartTrainConfig& cfg,
                        const EvalPlan& plan, int64_t timestep) {
    nlohmann::json j;
    j["kind"] = "eval";
    j["timestep"] = timestep;
    j["return_seen"] =
        evaluate_cart(policy, cfg.dynamics, false, plan.episodes, plan.eval_seed).mean_return;
    j["return_unseen"] =
        evaluate_cart(policy, cfg.dynamics, true, plan.episodes, plan.eval_seed).mean_return;
    sink << j.dump() << "\n";
    sink.flush();
}

}  // namespace

MetricsReport eval_coin_policy(PolicyNet& policy, const TrainConfig& cfg, const EvalPlan& plan) {
    MetricsReport rep;
    rep.scalars["eval_seed"] = static_cast<double>(plan.eval_seed);

    for (int m_samples : plan.mc_samples) {
        EvalConfig ec = eval_config_from(cfg, plan, m_samples);
        fill_prior(ec, policy, cfg);
        std::string suffix = "_m" + std::to_string(m_samples);
        add_eval_result(rep, "seen" + suffix, evaluate(policy, cfg.seen_themes, ec));
        if (!cfg.unseen_themes.empty())
            add_eval_result(rep, "unseen" + suffix, evaluate(policy, cfg.unseen_themes, ec));
    }

    const bool has_unseen = !cfg.unseen_themes.empty();
    CoinGridConfig grid = grid_from(cfg, plan);
    if ((plan.metric_cycle || plan.metric_entropy) && has_unseen) {
        LevelSpec level = generate_level(plan.eval_seed, grid);
        Trajectory seen_traj =
            collect_trajectory(policy, level, cfg.seen_themes[0], grid, "seen");
        if (plan.metric_cycle) {
            Trajectory unseen_replay = replay_trajectory(policy, level, cfg.unseen_themes[0],
                                                         seen_traj.actions, grid, "unseen");
            rep.scalars["cycle2"] = cycle_consistency(seen_traj, unseen_replay);
            if (cfg.unseen_themes.size() >= 2) {
                Trajectory third = replay_trajectory(policy, level, cfg.unseen_themes[1],
                                                     seen_traj.actions, grid, "unseen2");
                rep.scalars["cycle3"] =
                    cycle_consistency_3way(seen_traj, unseen_replay, third);
            }
        }
        if (plan.metric_entropy) {
            Trajectory unseen_traj =
                collect_trajectory(policy, level, cfg.unseen_themes[0], grid, "unseen");
            rep.scalars["entropy_seen"] = trajectory_entropy(policy, seen_traj);
            rep.scalars["entropy_unseen"] = trajectory_entropy(policy, unseen_traj);
            rep.scalars["entropy_gap"] =
                rep.scalars["entropy_unseen"] - rep.scalars["entropy_seen"];
        }
    }

    if (plan.metric_fgsm) {
        EvalConfig ec = eval_config_from(cfg, plan, 1);
        ec.use_randomizer = false;  // the attack targets the deterministic clean policy
        EvalResult clean = evaluate(policy, cfg.seen_themes, ec);
        EvalResult attacked =
            evaluate_under_attack(policy, cfg.seen_themes, ec, cfg.hyper.fgsm_eps);
        add_eval_result(rep, "fgsm_clean", clean);
        add_eval_result(rep, "fgsm_attacked", attacked);
        rep.scalars["fgsm_rel_drop"] =
            clean.success_rate > 0.0f
                ? (clean.success_rate - attacked.success_rate) / clean.success_rate
                : 0.0;
    }
    return rep;
}

MetricsReport eval_cart_policy(MlpPolicy& policy, const CartTrainConfig& cfg,
                               const EvalPlan& plan) {
    MetricsReport rep;
    rep.scalars["eval_seed"] = static_cast<double>(plan.eval_seed);
    add_eval_result(rep, "seen",
                    evaluate_cart(policy, cfg.dynamics, false, plan.episodes, plan.eval_seed));
    add_eval_result(rep, "unseen",
                    evaluate_cart(policy, cfg.dynamics, true, plan.episodes, plan.eval_seed));
    return rep;
}

int cmd_train(const CliOptions& opt) {
    ExperimentManifest m = manifest_with_overrides(opt);
    ensure_dir(m.output_dir);
    DirLock lock(m.output_dir);
    if (m.cartpole) return train_cart(m, opt.checkpoint_path);
    if (opt.checkpoint_path.empty()) return train_coin(m);
    return train_coin_resume(m, opt.checkpoint_path);
}

int cmd_eval(const CliOptions& opt) {
    LoadedRun run = load_run(opt.checkpoint_path);
    EvalPlan plan;
    std::string out_dir = "eval-out";
    if (!opt.manifest_path.empty()) {
        ExperimentManifest m = load_manifest(opt.manifest_path);
        plan = m.eval;
        out_dir = m.output_dir;
    }
    if (!opt.out_override.empty()) out_dir = opt.out_override;
    if (opt.seed_override) plan.eval_seed = *opt.seed_override;
    ensure_dir(out_dir);
    DirLock lock(out_dir);

    MetricsReport rep;
    if (run.cp.cartpole) {
        rep = eval_cart_policy(run.cart->policy(), run.cp.cart_config, plan);
        rep.scalars["trained_timesteps"] = static_cast<double>(run.cart->timestep());
    } else {
        rep = eval_coin_policy(run.coin->policy(), run.cp.coin_config, plan);
        rep.scalars["trained_timesteps"] = static_cast<double>(run.coin->timestep());
    }
    write_report(rep, out_dir);
    print_report(rep);
    return 0;
}

namespace {

// Full training run for one ablation cell; returns the trainer for
// evaluation plus the serialized weights for bit-identity probes.
std::unique_ptr<Trainer> train_cell(TrainConfig cfg, const std::string& stats_path) {
    auto tr = std::make_unique<Trainer>(cfg);
    {
        std::ofstream stats(stats_path, std::ios::app);
        tr->set_stats_sink(stats ? &stats : nullptr);
        while (tr->timestep() < cfg.total_timesteps) tr->train_iteration();
        tr->set_stats_sink(nullptr);
    }
    return tr;
}

std::string weight_bytes(Trainer& tr) {
    std::string bytes;
    for (nn::Param* p : tr.policy().params())
        bytes.append(reinterpret_cast<const char*>(p->value.data()),
                     sizeof(float) * static_cast<size_t>(p->value.numel()));
    return bytes;
}

nlohmann::json ablate_alpha(const ExperimentManifest& m) {
    nlohmann::json rows = nlohmann::json::array();
    const float grid[] = {0.0f, 0.1f, 0.5f, 1.0f};
    for (float alpha : grid) {
        nlohmann::json row;
        row["alpha"] = alpha;
        std::vector<double> seen, unseen;
        for (uint64_t seed : m.eval.ablate_seeds) {
            TrainConfig cfg = m.train;
            if (!method_uses_randomizer(cfg.method)) cfg.method = Method::rand;
            cfg.hyper.alpha_clean = alpha;
            cfg.seed = seed;
            auto tr = train_cell(cfg, m.output_dir + "/stats.jsonl");
            MetricsReport rep = eval_coin_policy(tr->policy(), cfg, m.eval);
            std::string suffix = "_m" + std::to_string(m.eval.mc_samples[0]);
            seen.push_back(rep.scalars.at("success_seen" + suffix));
            if (rep.scalars.count("success_unseen" + suffix))
                unseen.push_back(rep.scalars.at("success_unseen" + suffix));

            if (alpha == 1.0f) {
                // degenerate cell: the kernel is always identity, so the run
                // must replay a vanilla run bit for bit
                TrainConfig vcfg = cfg;
                vcfg.method = Method::vanilla;
                auto vtr = train_cell(vcfg, m.output_dir + "/stats.jsonl");
                row["matches_vanilla_seed_" + std::to_string(seed)] =
                    weight_bytes(*tr) == weight_bytes(*vtr);
            }
        }
        row["success_seen"] = seen;
        row["success_seen_median"] = median(seen);
        if (!unseen.empty()) {
            row["success_unseen"] = unseen;
            row["success_unseen_median"] = median(unseen);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json ablate_placement(const ExperimentManifest& m) {
    nlohmann::json rows = nlohmann::json::array();
    const Placement grid[] = {Placement::first, Placement::after_block_2, Placement::residual};
    for (Placement p : grid) {
        nlohmann::json row;
        row["placement"] = placement_to_string(p);
        std::vector<double> seen, unseen;
        for (uint64_t seed : m.eval.ablate_seeds) {
            TrainConfig cfg = m.train;
            if (!method_uses_randomizer(cfg.method)) cfg.method = Method::rand_fm;
            cfg.placement = p;
            cfg.seed = seed;
            auto tr = train_cell(cfg, m.output_dir + "/stats.jsonl");
            MetricsReport rep = eval_coin_policy(tr->policy(), cfg, m.eval);
            std::string suffix = "_m" + std::to_string(m.eval.mc_samples[0]);
            seen.push_back(rep.scalars.at("success_seen" + suffix));
            if (rep.scalars.count("success_unseen" + suffix))
                unseen.push_back(rep.scalars.at("success_unseen" + suffix));
        }
        row["success_seen"] = seen;
        row["success_seen_median"] = median(seen);
        if (!unseen.empty()) {
            row["success_unseen"] = unseen;
            row["success_unseen_median"] = median(unseen);
        }
        rows.push_back(std::move(row));
    }
    // ordered view, best unseen (fall back to seen) first
    std::vector<std::pair<double, std::string>> order;
    for (const auto& row : rows) {
        double score = row.contains("success_unseen_median")
                           ? row.at("success_unseen_median").get<double>()
                           : row.at("success_seen_median").get<double>();
        order.emplace_back(score, row.at("placement").get<std::string>());
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    nlohmann::json table = nlohmann::json::object();
    table["rows"] = std::move(rows);
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& [score, name] : order) ranking.push_back(name);
    table["ranking"] = std::move(ranking);
    return table;
}

nlohmann::json ablate_mc(const CliOptions& opt, const ExperimentManifest& m) {
    LoadedRun run = load_run(opt.checkpoint_path);
    if (run.cp.cartpole) throw ValueError("M sweep applies to the coingrid experiment");
    nlohmann::json rows = nlohmann::json::array();
    const int grid[] = {1, 5, 10};
    for (int m_samples : grid) {
        EvalPlan plan = m.eval;
        plan.mc_samples = {m_samples};
        plan.metric_cycle = plan.metric_entropy = plan.metric_fgsm = false;
        MetricsReport rep = eval_coin_policy(run.coin->policy(), run.cp.coin_config, plan);
        nlohmann::json row;
        row["M"] = m_samples;
        std::string suffix = "_m" + std::to_string(m_samples);
        row["success_seen"] = rep.scalars.at("success_seen" + suffix);
        if (rep.scalars.count("success_unseen" + suffix))
            row["success_unseen"] = rep.scalars.at("success_unseen" + suffix);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

int cmd_ablate(const CliOptions& opt) {
    if (opt.axis != "alpha" && opt.axis != "placement" && opt.axis != "M")
        throw ValueError("ablate axis must be one of: alpha, placement, M");
    ExperimentManifest m = manifest_with_overrides(opt);
    if (m.cartpole) throw ValueError("ablation sweeps apply to the coingrid experiment");
    ensure_dir(m.output_dir);
    DirLock lock(m.output_dir);

    nlohmann::json out;
    out["schema"] = 1;
    out["axis"] = opt.axis;
    if (opt.axis == "alpha") {
        out["rows"] = ablate_alpha(m);
    } else if (opt.axis == "placement") {
        out["table"] = ablate_placement(m);
    } else {
        out["rows"] = ablate_mc(opt, m);
    }

    std::string path = m.output_dir + "/ablation_" + opt.axis + ".json";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_export_features(const CliOptions& opt) {
    LoadedRun run = load_run(opt.checkpoint_path);
    if (run.cp.cartpole)
        throw ValueError("export-features applies to the coingrid experiment");
    EvalPlan plan;
    if (!opt.manifest_path.empty()) plan = load_manifest(opt.manifest_path).eval;
    if (opt.seed_override) plan.eval_seed = *opt.seed_override;
    std::string out_dir = opt.out_override.empty() ? "eval-out" : opt.out_override;
    ensure_dir(out_dir);
    DirLock lock(out_dir);

    const TrainConfig& cfg = run.cp.coin_config;
    CoinGridConfig grid = grid_from(cfg, plan);
    LevelSpec level = generate_level(plan.eval_seed, grid);
    PolicyNet& policy = run.coin->policy();

    std::vector<Trajectory> trajs;
    trajs.push_back(collect_trajectory(policy, level, cfg.seen_themes[0], grid,
                                       "seen-" + std::to_string(cfg.seen_themes[0])));
    if (!cfg.unseen_themes.empty())
        trajs.push_back(replay_trajectory(policy, level, cfg.unseen_themes[0], trajs[0].actions,
                                          grid,
                                          "unseen-" + std::to_string(cfg.unseen_themes[0])));
    std::string path = out_dir + "/features.tsv";
    export_features(trajs, path);
    std::cout << "wrote " << path << " (" << trajs.size() << " trajectories)\n";
    return 0;
}

int run_command(const CliOptions& opt) {
    try {
        if (opt.command == "train") return cmd_train(opt);
        if (opt.command == "eval") return cmd_eval(opt);
        if (opt.command == "ablate") return cmd_ablate(opt);
        if (opt.command == "export-features") return cmd_export_features(opt);
        throw ValueError("unknown command: " + opt.command);
    } catch (const NumericError& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 2;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace randrl

#include "randrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>

#include "json.hpp"
#include "randrl/error.hpp"
#include "randrl/tape.hpp"

namespace randrl {

namespace {

Tensor as_batch1(const Tensor& obs) {
    if (obs.rank() != 3) {
        throw ValueError("expected a single (C, H, W) observation, got " + obs.shape_str());
    }
    return obs.reshaped({1, obs.dim(0), obs.dim(1), obs.dim(2)});
}

int argmax_lowest(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

// Identity kernel sized for this policy's randomizer slot, or nothing when
// the policy has no slot.
std::optional<RandomNetParams> identity_phi_for(PolicyNet& policy) {
    if (policy.config().placement == Placement::none) return std::nullopt;
    return identity_params(policy.randomizer_prior());
}

const RandomNetParams* phi_ptr(const std::optional<RandomNetParams>& phi) {
    return phi ? &*phi : nullptr;
}

// One greedy identity-kernel decision plus the feature row it was made from.
struct StepEval {
    int action = 0;
    Tensor feature;
};

StepEval eval_step(PolicyNet& policy, const Tensor& obs, const RandomNetParams* phi) {
    Tape t;
    Var x = t.input(as_batch1(obs), false);
    PolicyOut out = policy.forward(t, x, phi);
    const Tensor& logits = t.val(out.logits);
    const Tensor& feats = t.val(out.features);
    StepEval se;
    se.action = argmax_lowest(logits.data(), policy.config().n_actions);
    se.feature = Tensor({policy.feature_dim()});
    std::copy(feats.data(), feats.data() + policy.feature_dim(), se.feature.data());
    return se;
}

double sq_dist(const Tensor& a, const Tensor& b) {
    double d = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        d += diff * diff;
    }
    return d;
}

// Ties resolve to the lowest index because only a strictly smaller distance
// replaces the incumbent.
int nearest_index(const Tensor& q, const std::vector<Tensor>& set) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < set.size(); ++i) {
        double d = sq_dist(q, set[i]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

void check_trajectory_pair(const Trajectory& a, const Trajectory& b) {
    if (a.features.empty() || b.features.empty()) {
        throw ContractError("cycle consistency needs non-empty trajectories");
    }
    if (a.features[0].numel() != b.features[0].numel()) {
        throw ValueError("cycle consistency: feature dimensions differ");
    }
}

}  // namespace

Tensor mc_policy(PolicyNet& policy, const Tensor& obs, const PriorConfig& prior, int M,
                 Rng& rng) {
    if (M < 1) throw ValueError("mc_policy: M must be positive");
    Tensor batch = as_batch1(obs);
    int n_actions = policy.config().n_actions;
    Tensor out({n_actions});
    if (policy.config().placement == Placement::none) {
        // No randomizer slot: every draw would leave the input untouched.
        ActOut a = policy.act(batch, nullptr, true, nullptr);
        std::copy(a.probs.data(), a.probs.data() + n_actions, out.data());
        return out;
    }
    std::vector<double> acc(static_cast<size_t>(n_actions), 0.0);
    for (int m = 0; m < M; ++m) {
        RandomNetParams phi = sample_params(prior, rng);
        ActOut a = policy.act(batch, &phi, true, nullptr);
        for (int i = 0; i < n_actions; ++i) acc[static_cast<size_t>(i)] += a.probs[i];
    }
    for (int i = 0; i < n_actions; ++i) {
        out[i] = static_cast<float>(acc[static_cast<size_t>(i)] / M);
    }
    return out;
}

EvalResult evaluate(PolicyNet& policy, const std::vector<int>& themes, const EvalConfig& cfg) {
    if (themes.empty()) throw ValueError("evaluate: empty theme set");
    if (cfg.n_episodes < 1) throw ValueError("evaluate: n_episodes must be positive");
    if (cfg.mc_samples < 1) throw ValueError("evaluate: mc_samples must be positive");

    Rng root(cfg.seed);
    Rng level_rng = root.split("eval-levels");
    Rng phi_rng = root.split("eval-phi");
    std::optional<RandomNetParams> id = identity_phi_for(policy);

    EvalResult res;
    double return_sum = 0.0;
    int successes = 0;
    for (int e = 0; e < cfg.n_episodes; ++e) {
        int theme = themes[static_cast<size_t>(e) % themes.size()];
        LevelSpec level = generate_level(level_rng.next_u64(), cfg.grid);
        CoinGrid env(level, make_theme(theme), cfg.grid);
        Tensor obs = env.reset();
        float ep_return = 0.0f;
        bool success = false;
        while (true) {
            int action;
            if (cfg.use_randomizer && policy.config().placement != Placement::none) {
                Tensor dist = mc_policy(policy, obs, cfg.prior, cfg.mc_samples, phi_rng);
                action = argmax_lowest(dist.data(), policy.config().n_actions);
            } else {
                ActOut a = policy.act(as_batch1(obs), phi_ptr(id), true, nullptr);
                action = a.actions[0];
            }
            StepResult sr = env.step(static_cast<Action>(action));
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

Trajectory collect_trajectory(PolicyNet& policy, const LevelSpec& level, int theme_id,
                              const CoinGridConfig& cfg, const std::string& tag) {
    std::optional<RandomNetParams> id = identity_phi_for(policy);
    CoinGrid env(level, make_theme(theme_id), cfg);
    Tensor obs = env.reset();
    Trajectory traj;
    traj.tag = tag;
    while (true) {
        StepEval se = eval_step(policy, obs, phi_ptr(id));
        traj.observations.push_back(obs);
        traj.features.push_back(std::move(se.feature));
        traj.actions.push_back(se.action);
        StepResult sr = env.step(static_cast<Action>(se.action));
        obs = sr.obs;
        if (sr.done) break;
    }
    return traj;
}

Trajectory replay_trajectory(PolicyNet& policy, const LevelSpec& level, int theme_id,
                             const std::vector<int>& actions, const CoinGridConfig& cfg,
                             const std::string& tag) {
    if (actions.empty()) throw ValueError("replay_trajectory: empty action sequence");
    std::optional<RandomNetParams> id = identity_phi_for(policy);
    CoinGrid env(level, make_theme(theme_id), cfg);
    Tensor obs = env.reset();
    Trajectory traj;
    traj.tag = tag;
    for (size_t i = 0; i < actions.size(); ++i) {
        StepEval se = eval_step(policy, obs, phi_ptr(id));
        traj.observations.push_back(obs);
        traj.features.push_back(std::move(se.feature));
        traj.actions.push_back(actions[i]);
        StepResult sr = env.step(static_cast<Action>(actions[i]));
        obs = sr.obs;
        if (sr.done && i + 1 < actions.size()) {
            // Dynamics ignore the theme, so a replayed episode must last
            // exactly as long as the original.
            throw ContractError("replay_trajectory: episode ended early");
        }
    }
    return traj;
}

double cycle_consistency(const Trajectory& V, const Trajectory& U) {
    check_trajectory_pair(V, U);
    int consistent = 0;
    for (size_t i = 0; i < V.features.size(); ++i) {
        int j = nearest_index(V.features[i], U.features);
        int k = nearest_index(U.features[static_cast<size_t>(j)], V.features);
        if (std::abs(k - static_cast<int>(i)) <= 1) ++consistent;
    }
    return 100.0 * consistent / static_cast<double>(V.features.size());
}

double cycle_consistency_3way(const Trajectory& V, const Trajectory& U, const Trajectory& J) {
    check_trajectory_pair(V, U);
    check_trajectory_pair(V, J);
    int consistent = 0;
    for (size_t i = 0; i < V.features.size(); ++i) {
        int u1 = nearest_index(V.features[i], U.features);
        int j1 = nearest_index(U.features[static_cast<size_t>(u1)], J.features);
        int k1 = nearest_index(J.features[static_cast<size_t>(j1)], V.features);

        int j2 = nearest_index(V.features[i], J.features);
        int u2 = nearest_index(J.features[static_cast<size_t>(j2)], U.features);
        int k2 = nearest_index(U.features[static_cast<size_t>(u2)], V.features);

        bool ok1 = std::abs(k1 - static_cast<int>(i)) <= 1;
        bool ok2 = std::abs(k2 - static_cast<int>(i)) <= 1;
        if (ok1 && ok2) ++consistent;
    }
    return 100.0 * consistent / static_cast<double>(V.features.size());
}

double activation_entropy(const ActivationMap& maps) {
    if (maps.empty()) throw ContractError("activation_entropy: no maps");
    double total = 0.0;
    for (const Tensor& m : maps) {
        if (m.rank() != 2) {
            throw ValueError("activation_entropy: maps must be 2-D, got " + m.shape_str());
        }
        // Entropy as log N minus the divergence from uniform.  Written this
        // way the two anchor cases are exact in floating point: a uniform map
        // has v * N == 1 (so the divergence sum is exactly zero) and a
        // one-hot map contributes exactly log N.
        const double n = static_cast<double>(m.numel());
        double sum = 0.0;
        double kl = 0.0;
        for (int64_t i = 0; i < m.numel(); ++i) {
            float v = m[i];
            if (v < 0.0f || !std::isfinite(v)) {
                throw ContractError("activation_entropy: map has negative or non-finite mass");
            }
            sum += v;
            if (v > 0.0f) kl += static_cast<double>(v) * std::log(static_cast<double>(v) * n);
        }
        if (std::abs(sum - 1.0) > 1e-5) {
            throw ContractError("activation_entropy: map mass " + std::to_string(sum) +
                                " is not 1");
        }
        total += std::log(n) - kl;
    }
    return total / static_cast<double>(maps.size());
}

Tensor gradcam_map(PolicyNet& policy, const Tensor& obs, const RandomNetParams& phi) {
    Tensor batch = as_batch1(obs);
    const RandomNetParams* p =
        policy.config().placement == Placement::none ? nullptr : &phi;
    Tape t;
    Var x = t.input(batch, false);
    PolicyOut out = policy.forward(t, x, p);
    const Tensor& logits = t.val(out.logits);
    int a_star = argmax_lowest(logits.data(), policy.config().n_actions);
    Var picked = t.sum_all(t.row_gather(out.logits, {a_star}));
    for (nn::Param* prm : policy.params()) prm->zero_grad();
    t.backward(picked);

    const Tensor& act = t.val(out.last_conv);
    const Tensor& grad = t.grad(out.last_conv);
    int64_t channels = act.dim(1), ha = act.dim(2), wa = act.dim(3);
    Tensor map({ha, wa});
    double mass = 0.0;
    for (int64_t h = 0; h < ha; ++h) {
        for (int64_t w = 0; w < wa; ++w) {
            double v = 0.0;
            for (int64_t c = 0; c < channels; ++c) {
                v += static_cast<double>(grad.at4(0, c, h, w)) *
                     static_cast<double>(act.at4(0, c, h, w));
            }
            v /= static_cast<double>(channels);
            float r = v > 0.0 ? static_cast<float>(v) : 0.0f;
            map.at2(h, w) = r;
            mass += r;
        }
    }
    if (mass <= 0.0) {
        map.fill(1.0f / static_cast<float>(ha * wa));
    } else {
        for (int64_t i = 0; i < map.numel(); ++i) {
            map[i] = static_cast<float>(map[i] / mass);
        }
    }
    return map;
}

Tensor fgsm_attack(PolicyNet& policy, const Tensor& obs, float eps) {
    if (eps < 0.0f) throw ValueError("fgsm_attack: eps must be nonnegative");
    Tensor batch = as_batch1(obs);
    std::optional<RandomNetParams> id = identity_phi_for(policy);
    Tape t;
    Var x = t.input(batch, true);
    PolicyOut out = policy.forward(t, x, phi_ptr(id));
    const Tensor& logits = t.val(out.logits);
    int a_star = argmax_lowest(logits.data(), policy.config().n_actions);
    Var log_prob = t.sum_all(t.row_gather(t.log_softmax_rows(out.logits), {a_star}));
    for (nn::Param* prm : policy.params()) prm->zero_grad();
    t.backward(log_prob);

    const Tensor& g = t.grad(x);
    Tensor adv(obs.shape());
    for (int64_t i = 0; i < obs.numel(); ++i) {
        float sign = g[i] > 0.0f ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
        adv[i] = std::clamp(obs[i] - eps * sign, 0.0f, 1.0f);
    }
    return adv;
}

void export_features(const std::vector<Trajectory>& trajectories, const std::string& out_path) {
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot open " + out_path + " for writing");
    int dim = 0;
    for (const Trajectory& tr : trajectories) {
        if (!tr.features.empty()) {
            dim = static_cast<int>(tr.features[0].numel());
            break;
        }
    }
    f << "env_tag\ttimestep";
    for (int i = 0; i < dim; ++i) f << "\tf" << i;
    f << "\n";
    char buf[64];
    for (const Trajectory& tr : trajectories) {
        for (size_t step = 0; step < tr.features.size(); ++step) {
            const Tensor& row = tr.features[step];
            if (row.numel() != dim) {
                throw ValueError("export_features: inconsistent feature dimensions");
            }
            f << tr.tag << '\t' << step;
            for (int64_t i = 0; i < row.numel(); ++i) {
                // nine significant digits reproduce any float32 exactly
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[i]));
                f << '\t' << buf;
            }
            f << '\n';
        }
    }
    f.flush();
    if (!f) throw IoError("failed writing " + out_path);
}

std::string report_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["schema"] = report.schema;
    j["scalars"] = nlohmann::json::object();
    for (const auto& [k, v] : report.scalars) j["scalars"][k] = v;
    j["series"] = nlohmann::json::object();
    for (const auto& [k, v] : report.series) j["series"][k] = v;
    return j.dump(2);
}

}  // namespace randrl

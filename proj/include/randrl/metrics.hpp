#pragma once

#include <map>
#include <string>
#include <vector>

#include "randrl/coingrid.hpp"
#include "randrl/policy.hpp"
#include "randrl/randnet.hpp"
#include "randrl/rng.hpp"

namespace randrl {

// Monte Carlo action distribution: the mean softmax over M kernels drawn
// independently from the prior.  obs is a single (C, H, W) observation;
// the result has shape (n_actions,).
Tensor mc_policy(PolicyNet& policy, const Tensor& obs, const PriorConfig& prior, int M,
                 Rng& rng);

struct EvalConfig {
    int n_episodes = 50;
    int mc_samples = 10;         // M; ignored when use_randomizer is false
    PriorConfig prior;           // kernel prior for MC draws
    bool use_randomizer = true;  // false: single identity-kernel forward per step
    CoinGridConfig grid;
    uint64_t seed = 0;
};

struct EvalResult {
    float success_rate = 0.0f;
    float mean_return = 0.0f;
    std::vector<uint8_t> successes;  // per episode, aggregation order
    std::vector<float> returns_;
};

// Greedy episodes over the theme set (round-robin), fresh level per episode.
EvalResult evaluate(PolicyNet& policy, const std::vector<int>& themes, const EvalConfig& cfg);

// Observation/feature sequence of one episode.  Features come from the
// clean (identity kernel) pass under the evaluated parameters.
struct Trajectory {
    std::string tag;
    std::vector<Tensor> observations;
    std::vector<Tensor> features;  // (256,) rows
    std::vector<int> actions;
};

// Greedy identity-kernel rollout on (level, theme).
Trajectory collect_trajectory(PolicyNet& policy, const LevelSpec& level, int theme_id,
                              const CoinGridConfig& cfg, const std::string& tag);

// The same level rendered under another theme, replaying a fixed action
// sequence; dynamics are theme-invariant so the state path matches.
Trajectory replay_trajectory(PolicyNet& policy, const LevelSpec& level, int theme_id,
                             const std::vector<int>& actions, const CoinGridConfig& cfg,
                             const std::string& tag);

// Fraction (in percent) of v_i whose nearest neighbor in U maps back to
// within one index of i.  Nearest neighbors by squared feature distance,
// ties to the lowest index.
double cycle_consistency(const Trajectory& V, const Trajectory& U);

// Counts v_i that return within one index along both V->U->J->V and
// V->J->U->V.
double cycle_consistency_3way(const Trajectory& V, const Trajectory& U, const Trajectory& J);

// Per-timestep spatial attention maps; each (H_a, W_a) tensor is nonnegative
// and sums to 1.
using ActivationMap = std::vector<Tensor>;

// Natural-log entropy averaged over timesteps; 0 log 0 counts as 0.
// Throws ContractError when a map is unnormalized or negative.
double activation_entropy(const ActivationMap& maps);

// Attention for the greedy action: channel-mean of gradient-weighted last
// convolution activations, relu, normalized to sum 1 (uniform fallback when
// everything is zero).
Tensor gradcam_map(PolicyNet& policy, const Tensor& obs, const RandomNetParams& phi);

// One-step gradient-sign attack against the clean greedy action's log
// probability; result clamped to [0, 1].
Tensor fgsm_attack(PolicyNet& policy, const Tensor& obs, float eps);

// Tab-separated export: header, then one row per (tag, timestep, features).
// Nine significant digits round-trip float32 exactly.
void export_features(const std::vector<Trajectory>& trajectories, const std::string& out_path);

// Aggregates plus the raw per-episode numbers they were computed from.
struct MetricsReport {
    int schema = 1;
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> series;
};

std::string report_to_json(const MetricsReport& report);

}  // namespace randrl

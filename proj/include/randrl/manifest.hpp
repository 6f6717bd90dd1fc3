#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randrl/trainer.hpp"

namespace randrl {

constexpr int kManifestSchemaVersion = 1;

// What to measure after (or during) training, and how often to persist.
struct EvalPlan {
    int episodes = 48;                // per env set and M value
    std::vector<int> mc_samples{10};  // one success row per M
    uint64_t eval_seed = 1234;
    int max_episode_steps = 256;  // evaluation step cap per episode
    bool metric_cycle = true;
    bool metric_entropy = true;
    bool metric_fgsm = true;
    int64_t checkpoint_every = 50000;  // env steps; 0 = final checkpoint only
    int64_t eval_every = 50000;        // env steps; 0 = no mid-training evals
    std::vector<uint64_t> ablate_seeds{0};
};

// One experiment end to end: which trainer to build, how to evaluate it,
// where results go.  Parsing validates everything up front and rejects
// unknown keys at every level, so a typo can never silently change a sweep.
struct ExperimentManifest {
    int schema_version = kManifestSchemaVersion;
    bool cartpole = false;
    std::string output_dir = "runs/out";
    TrainConfig train;        // used when !cartpole
    CartTrainConfig cart;     // used when cartpole
    EvalPlan eval;
};

ExperimentManifest parse_manifest(const std::string& json_text);
ExperimentManifest load_manifest(const std::string& path);
std::string serialize_manifest(const ExperimentManifest& m);

void validate_manifest(const ExperimentManifest& m);

}  // namespace randrl

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "randrl/manifest.hpp"
#include "randrl/metrics.hpp"

namespace randrl {

// Parsed command line.  Flags override the corresponding manifest fields so
// sweeps can reuse one manifest file.
struct CliOptions {
    std::string command;  // train | eval | ablate | export-features
    std::string manifest_path;
    std::string checkpoint_path;
    std::string out_override;
    std::string method_override;
    std::string axis;  // ablate: alpha | placement | M
    std::optional<uint64_t> seed_override;
    std::optional<int> envs_override;
};

// The commands throw (ValueError/IoError for bad input, NumericError for a
// diverged run); run_command maps exceptions onto the exit-code contract:
// 0 success, 1 validation error, 2 runtime abort.
int cmd_train(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_ablate(const CliOptions& opt);
int cmd_export_features(const CliOptions& opt);

int run_command(const CliOptions& opt);

// Shared evaluation drivers (also used by the acceptance suite).
MetricsReport eval_coin_policy(PolicyNet& policy, const TrainConfig& cfg, const EvalPlan& plan);
MetricsReport eval_cart_policy(MlpPolicy& policy, const CartTrainConfig& cfg,
                               const EvalPlan& plan);

}  // namespace randrl

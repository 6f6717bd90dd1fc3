#pragma once

#include <cstdint>
#include <vector>

#include "randrl/tensor.hpp"
#include "randrl/theme.hpp"

namespace randrl {

// Side-scroller corridor: reach the coin at the far end, jump over hazards.
// A jump keeps the agent airborne long enough to clear exactly one cell;
// landing on a hazard still kills.

enum class Action : int { left = 0, right = 1, jump = 2, noop = 3 };
constexpr int kNumActions = 4;

constexpr int kObsChannels = 3;
constexpr int kObsSize = 48;
constexpr int kCellPx = 4;

struct CoinGridConfig {
    int width = 12;                 // corridor length in cells
    int max_steps = 256;
    bool bad_coins = false;         // decoy coins; collecting one ends the episode with no reward
    bool moving_obstacles = false;  // hazards oscillate between two cells
};

struct LevelSpec {
    uint64_t level_seed = 0;
    int width = 12;
    std::vector<int> obstacles;  // hazard home cells
    std::vector<int> bad_coins;  // decoy cells, empty unless the variant is on
    int coin_x = 11;
    bool moving_obstacles = false;
};

// Deterministic in seed and config.  Candidate layouts that fail the
// solvability check advance the seed until one passes.
LevelSpec generate_level(uint64_t seed, const CoinGridConfig& cfg);

// Breadth-first search over (cell, airborne counter, hazard phase): true when
// some action sequence collects the coin without dying or touching a decoy.
bool level_solvable(const LevelSpec& spec, int max_steps);

struct StepInfo {
    bool success = false;
    bool death = false;
    bool timeout = false;
};

struct StepResult {
    Tensor obs;
    float reward = 0.0f;
    bool done = false;
    StepInfo info;
};

// Full runtime state; together with level/theme/config it determines all
// future observations and rewards, so checkpoints store exactly this.
struct CoinGridState {
    int x = 0;
    int air = 0;  // steps of airness left; y = (air > 0)
    int step_count = 0;
    bool done = false;
};

class CoinGrid {
   public:
    CoinGrid(LevelSpec level, ThemeSpec theme, CoinGridConfig cfg);

    Tensor reset();
    StepResult step(Action a);  // throws ContractError once the episode is done

    Tensor render() const;  // (3, 48, 48) float in [0,1], egocentric

    const CoinGridState& state() const { return st_; }
    void set_state(const CoinGridState& s) { st_ = s; }
    const LevelSpec& level() const { return level_; }
    const ThemeSpec& theme() const { return theme_; }
    const CoinGridConfig& config() const { return cfg_; }

    // Hazard cell at a given step count (home cell unless hazards move).
    int hazard_cell(int index, int step_count) const;

   private:
    bool hazard_at(int cell, int step_count) const;
    bool decoy_at(int cell) const;

    LevelSpec level_;
    ThemeSpec theme_;
    CoinGridConfig cfg_;
    CoinGridState st_;
};

// Success reward; every other outcome pays zero.
constexpr float kCoinReward = 10.0f;

}  // namespace randrl

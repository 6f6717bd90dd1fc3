#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace randrl {

// Visual style for CoinGrid rendering.  All fields derive deterministically
// from theme_id; rendering is integer (u8) math so observations are
// bit-reproducible across platforms and compiler flag changes.
struct ThemeSpec {
    int theme_id = 0;

    std::array<uint8_t, 3> bg_base{};      // sky/background base color
    int bg_pattern = 0;                    // 0 plain, 1 vertical bands, 2 checker
    uint64_t bg_noise_seed = 0;            // per-pixel texture hash seed
    uint8_t bg_noise_amp = 0;              // texture amplitude, 0..48

    std::array<uint8_t, 3> floor_base{};
    std::array<uint8_t, 3> floor_accent{};
    int floor_pattern = 0;                 // 0 stripes, 1 checker, 2 solid+rim

    std::array<uint8_t, 3> obstacle_base{};
    std::array<uint8_t, 3> obstacle_accent{};
    int obstacle_pattern = 0;              // 0 solid, 1 banded, 2 dotted

    std::array<uint8_t, 3> coin_color{};
};

// Number of distinct procedural themes available to theme_split.
constexpr int kThemePaletteSize = 64;

// Pure function of theme_id; ids outside [0, kThemePaletteSize) are rejected.
ThemeSpec make_theme(int theme_id);

// Disjoint deterministic seen/unseen theme sets drawn from the palette.
struct ThemeSplit {
    std::vector<int> seen;
    std::vector<int> unseen;
};
ThemeSplit theme_split(uint64_t master_seed, int n_seen, int n_unseen);

}  // namespace randrl

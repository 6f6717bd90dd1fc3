#include "randrl/theme.hpp"

#include <algorithm>

#include "randrl/error.hpp"
#include "randrl/rng.hpp"

namespace randrl {

namespace {

// Bright, saturated coin colors.  Silver/gray is reserved for decoy coins and
// strong red for the agent, so neither appears here.
constexpr std::array<std::array<uint8_t, 3>, 8> kCoinPalette{{
    {255, 208, 32},   // gold
    {64, 224, 96},    // green
    {80, 160, 255},   // blue
    {255, 128, 224},  // pink
    {255, 144, 32},   // orange
    {160, 96, 255},   // violet
    {64, 224, 224},   // cyan
    {224, 255, 64},   // lime
}};

uint8_t in_range(Rng& r, int lo, int hi) {
    return static_cast<uint8_t>(lo + static_cast<int>(r.next_below(static_cast<uint64_t>(hi - lo + 1))));
}

}  // namespace

ThemeSpec make_theme(int theme_id) {
    if (theme_id < 0 || theme_id >= kThemePaletteSize)
        throw ValueError("make_theme: theme_id out of palette range");

    Rng r(0x7468656d65ULL ^ (static_cast<uint64_t>(theme_id) * 0x9e3779b97f4a7c15ULL));

    ThemeSpec t;
    t.theme_id = theme_id;

    for (auto& c : t.bg_base) c = in_range(r, 32, 160);
    t.bg_pattern = static_cast<int>(r.next_below(3));
    t.bg_noise_seed = r.next_u64();
    t.bg_noise_amp = in_range(r, 12, 48);

    for (auto& c : t.floor_base) c = in_range(r, 64, 200);
    for (auto& c : t.floor_accent) c = in_range(r, 24, 120);
    t.floor_pattern = static_cast<int>(r.next_below(3));

    for (auto& c : t.obstacle_base) c = in_range(r, 72, 224);
    for (auto& c : t.obstacle_accent) c = in_range(r, 16, 96);
    t.obstacle_pattern = static_cast<int>(r.next_below(3));

    t.coin_color = kCoinPalette[r.next_below(kCoinPalette.size())];
    return t;
}

ThemeSplit theme_split(uint64_t master_seed, int n_seen, int n_unseen) {
    if (n_seen < 1 || n_unseen < 1)
        throw ValueError("theme_split: both set sizes must be positive");
    if (n_seen + n_unseen > kThemePaletteSize)
        throw ValueError("theme_split: requested more themes than the palette holds");

    std::vector<int> ids(kThemePaletteSize);
    for (int i = 0; i < kThemePaletteSize; ++i) ids[i] = i;

    // Fisher-Yates driven by a dedicated stream so the split only depends on
    // the master seed, not on any other consumer of it.
    Rng r = Rng(master_seed).split("theme-split");
    for (int i = kThemePaletteSize - 1; i > 0; --i) {
        const auto j = static_cast<int>(r.next_below(static_cast<uint64_t>(i) + 1));
        std::swap(ids[i], ids[j]);
    }

    ThemeSplit s;
    s.seen.assign(ids.begin(), ids.begin() + n_seen);
    s.unseen.assign(ids.begin() + n_seen, ids.begin() + n_seen + n_unseen);
    return s;
}

}  // namespace randrl

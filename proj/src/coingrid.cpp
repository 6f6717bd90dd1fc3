#include "randrl/coingrid.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <deque>
#include <set>

#include "randrl/error.hpp"
#include "randrl/rng.hpp"

namespace randrl {

namespace {

// Vertical layout in pixels.  The floor starts at row 36; grounded entities
// stand on it, airborne ones clear a two-cell-tall hazard.
constexpr int kFloorTop = 36;
constexpr int kGroundRow = 32;    // grounded entity rows 32..35
constexpr int kAirRow = 24;       // airborne entity rows 24..27
constexpr int kHazardTop = 28;    // hazards span rows 28..35
constexpr int kAgentScreenCell = 5;

// Steps of airness granted by a jump: airborne on the jump step and one move
// after it, grounded again on the second move.
constexpr int kJumpAir = 3;

constexpr std::array<uint8_t, 3> kAgentColor{220, 48, 48};
constexpr std::array<uint8_t, 3> kAgentEye{240, 240, 240};
constexpr std::array<uint8_t, 3> kDecoyColor{200, 200, 200};
constexpr std::array<uint8_t, 3> kDecoyCorner{150, 150, 150};

uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint8_t clamp_u8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

struct Canvas {
    std::array<uint8_t, kObsChannels * kObsSize * kObsSize> px{};
    void set(int x, int y, const std::array<uint8_t, 3>& c) {
        for (int ch = 0; ch < 3; ++ch) px[(ch * kObsSize + y) * kObsSize + x] = c[ch];
    }
};

std::array<uint8_t, 3> shift(const std::array<uint8_t, 3>& c, int d) {
    return {clamp_u8(c[0] + d), clamp_u8(c[1] + d), clamp_u8(c[2] + d)};
}

// Background sampled at world pixel coordinates so it scrolls with the agent.
std::array<uint8_t, 3> bg_pixel(const ThemeSpec& t, int wx, int y) {
    std::array<uint8_t, 3> c = t.bg_base;
    if (t.bg_pattern == 1 && (wx / 8) % 2 == 1) c = shift(c, 18);
    if (t.bg_pattern == 2 && ((wx / 8 + y / 8) % 2 == 1)) c = shift(c, 18);
    const uint64_t h = mix64(t.bg_noise_seed ^ (static_cast<uint64_t>(wx) * 0x100000001b3ULL + static_cast<uint64_t>(y)));
    const int amp = t.bg_noise_amp;
    const int d = static_cast<int>(h % static_cast<uint64_t>(amp + 1)) - amp / 2;
    return shift(c, d);
}

std::array<uint8_t, 3> floor_pixel(const ThemeSpec& t, int wx, int y) {
    switch (t.floor_pattern) {
        case 0:
            return ((wx / 4) % 2 == 1) ? t.floor_accent : t.floor_base;
        case 1:
            return ((wx / 4 + (y - kFloorTop) / 4) % 2 == 1) ? t.floor_accent : t.floor_base;
        default:
            return (y <= kFloorTop + 1) ? t.floor_accent : t.floor_base;
    }
}

std::array<uint8_t, 3> hazard_pixel(const ThemeSpec& t, int lx, int ly) {
    switch (t.obstacle_pattern) {
        case 1:
            return ((ly / 2) % 2 == 1) ? t.obstacle_accent : t.obstacle_base;
        case 2:
            return ((lx + ly) % 2 == 1) ? t.obstacle_accent : t.obstacle_base;
        default:
            return (ly == 0) ? t.obstacle_accent : t.obstacle_base;
    }
}

void draw_coin(Canvas& cv, int sx, int sy, const std::array<uint8_t, 3>& body,
               const std::array<uint8_t, 3>& corner) {
    for (int dy = 0; dy < kCellPx; ++dy)
        for (int dx = 0; dx < kCellPx; ++dx) {
            const bool is_corner = (dx == 0 && dy == 0) || (dx == 3 && dy == 3) ||
                                   (dx == 3 && dy == 0) || (dx == 0 && dy == 3);
            cv.set(sx + dx, sy + dy, is_corner ? corner : body);
        }
}

}  // namespace

LevelSpec generate_level(uint64_t seed, const CoinGridConfig& cfg) {
    if (cfg.width < 8) throw ValueError("generate_level: corridor too short");

    for (uint64_t attempt_seed = seed;; ++attempt_seed) {
        Rng r = Rng(attempt_seed).split("level");

        LevelSpec spec;
        spec.level_seed = seed;
        spec.width = cfg.width;
        spec.coin_x = cfg.width - 1;
        spec.moving_obstacles = cfg.moving_obstacles;

        // Moving hazards also occupy home+1, so their homes stop one cell
        // earlier.  Decoys need grounded takeoff and landing cells, which the
        // two-cell spacing below provides.
        const int hi = cfg.width - (cfg.moving_obstacles ? 4 : 3);
        std::vector<int> free_cells;
        for (int c = 2; c <= hi; ++c) free_cells.push_back(c);

        auto take = [&](std::vector<int>& out) {
            if (free_cells.empty()) return false;
            const int idx = static_cast<int>(r.next_below(free_cells.size()));
            const int cell = free_cells[idx];
            out.push_back(cell);
            std::erase_if(free_cells, [&](int c) { return std::abs(c - cell) <= 1; });
            return true;
        };

        const int n_hazards = 1 + static_cast<int>(r.next_below(cfg.bad_coins ? 2 : 3));
        for (int i = 0; i < n_hazards; ++i)
            if (!take(spec.obstacles)) break;
        if (cfg.bad_coins) {
            const int n_decoys = 1 + static_cast<int>(r.next_below(2));
            for (int i = 0; i < n_decoys; ++i)
                if (!take(spec.bad_coins)) break;
        }
        std::sort(spec.obstacles.begin(), spec.obstacles.end());
        std::sort(spec.bad_coins.begin(), spec.bad_coins.end());

        if (!spec.obstacles.empty() && level_solvable(spec, cfg.max_steps)) return spec;
    }
}

bool level_solvable(const LevelSpec& spec, int max_steps) {
    const int period = spec.moving_obstacles ? 2 : 1;
    auto hazard_at = [&](int cell, int t) {
        for (size_t i = 0; i < spec.obstacles.size(); ++i) {
            int c = spec.obstacles[i];
            if (spec.moving_obstacles) c += (t + static_cast<int>(i)) & 1;
            if (c == cell) return true;
        }
        return false;
    };
    auto decoy_at = [&](int cell) {
        return std::find(spec.bad_coins.begin(), spec.bad_coins.end(), cell) != spec.bad_coins.end();
    };

    struct Node {
        int x, air, phase, depth;
    };
    std::set<std::array<int, 3>> seen;
    std::deque<Node> queue;
    queue.push_back({0, 0, 0, 0});
    seen.insert({0, 0, 0});

    while (!queue.empty()) {
        const Node n = queue.front();
        queue.pop_front();
        if (n.depth >= max_steps) continue;
        for (int a = 0; a < kNumActions; ++a) {
            int x = n.x, air = n.air;
            switch (static_cast<Action>(a)) {
                case Action::jump:
                    if (air == 0) air = kJumpAir;
                    break;
                case Action::left:
                    x = std::max(0, x - 1);
                    break;
                case Action::right:
                    x = std::min(spec.width - 1, x + 1);
                    break;
                case Action::noop:
                    break;
            }
            if (air > 0) --air;
            const int t = n.depth + 1;
            const int phase = t % period;
            if (x == spec.coin_x && air == 0) return true;
            if (air == 0 && (hazard_at(x, t) || decoy_at(x))) continue;
            if (seen.insert({x, air, phase}).second) queue.push_back({x, air, phase, t});
        }
    }
    return false;
}

CoinGrid::CoinGrid(LevelSpec level, ThemeSpec theme, CoinGridConfig cfg)
    : level_(std::move(level)), theme_(theme), cfg_(cfg) {
    if (level_.width != cfg_.width)
        throw ValueError("CoinGrid: level width disagrees with config width");
    for (int c : level_.obstacles)
        if (c < 1 || c >= level_.width - 1)
            throw ValueError("CoinGrid: hazard outside the corridor interior");
}

int CoinGrid::hazard_cell(int index, int step_count) const {
    int c = level_.obstacles[static_cast<size_t>(index)];
    if (level_.moving_obstacles) c += (step_count + index) & 1;
    return c;
}

bool CoinGrid::hazard_at(int cell, int step_count) const {
    for (size_t i = 0; i < level_.obstacles.size(); ++i)
        if (hazard_cell(static_cast<int>(i), step_count) == cell) return true;
    return false;
}

bool CoinGrid::decoy_at(int cell) const {
    return std::find(level_.bad_coins.begin(), level_.bad_coins.end(), cell) != level_.bad_coins.end();
}

Tensor CoinGrid::reset() {
    st_ = CoinGridState{};
    return render();
}

StepResult CoinGrid::step(Action a) {
    if (st_.done) throw ContractError("CoinGrid::step called after episode end");

    switch (a) {
        case Action::jump:
            if (st_.air == 0) st_.air = kJumpAir;
            break;
        case Action::left:
            st_.x = std::max(0, st_.x - 1);
            break;
        case Action::right:
            st_.x = std::min(level_.width - 1, st_.x + 1);
            break;
        case Action::noop:
            break;
    }
    if (st_.air > 0) --st_.air;
    ++st_.step_count;

    StepResult res;
    const bool grounded = st_.air == 0;
    if (st_.x == level_.coin_x && grounded) {
        res.reward = kCoinReward;
        res.info.success = true;
    } else if (grounded && decoy_at(st_.x)) {
        res.info.death = true;
    } else if (grounded && hazard_at(st_.x, st_.step_count)) {
        res.info.death = true;
    } else if (st_.step_count >= cfg_.max_steps) {
        res.info.timeout = true;
    }
    res.done = res.info.success || res.info.death || res.info.timeout;
    st_.done = res.done;
    res.obs = render();
    return res;
}

Tensor CoinGrid::render() const {
    Canvas cv;
    // World pixel coordinate of the leftmost screen column; offset keeps the
    // pattern argument non-negative for any reachable agent position.
    const int wx0 = st_.x * kCellPx - kAgentScreenCell * kCellPx + 4096;

    for (int y = 0; y < kFloorTop; ++y)
        for (int x = 0; x < kObsSize; ++x) cv.set(x, y, bg_pixel(theme_, wx0 + x, y));
    for (int y = kFloorTop; y < kObsSize; ++y)
        for (int x = 0; x < kObsSize; ++x) cv.set(x, y, floor_pixel(theme_, wx0 + x, y));

    auto screen_cell = [&](int cell) { return cell - st_.x + kAgentScreenCell; };
    auto visible = [&](int sc) { return sc >= 0 && sc < kObsSize / kCellPx; };

    for (size_t i = 0; i < level_.obstacles.size(); ++i) {
        const int sc = screen_cell(hazard_cell(static_cast<int>(i), st_.step_count));
        if (!visible(sc)) continue;
        for (int ly = 0; ly < kFloorTop - kHazardTop; ++ly)
            for (int lx = 0; lx < kCellPx; ++lx)
                cv.set(sc * kCellPx + lx, kHazardTop + ly, hazard_pixel(theme_, lx, ly));
    }

    for (int c : level_.bad_coins) {
        const int sc = screen_cell(c);
        if (visible(sc)) draw_coin(cv, sc * kCellPx, kGroundRow, kDecoyColor, kDecoyCorner);
    }
    {
        const int sc = screen_cell(level_.coin_x);
        if (visible(sc))
            draw_coin(cv, sc * kCellPx, kGroundRow, theme_.coin_color, shift(theme_.coin_color, -64));
    }

    const int ay = st_.air > 0 ? kAirRow : kGroundRow;
    for (int dy = 0; dy < kCellPx; ++dy)
        for (int dx = 0; dx < kCellPx; ++dx)
            cv.set(kAgentScreenCell * kCellPx + dx, ay + dy, kAgentColor);
    cv.set(kAgentScreenCell * kCellPx + 2, ay + 1, kAgentEye);

    Tensor obs({kObsChannels, kObsSize, kObsSize});
    float* out = obs.data();
    for (size_t i = 0; i < cv.px.size(); ++i) out[i] = static_cast<float>(cv.px[i]) / 255.0f;
    return obs;
}

}  // namespace randrl

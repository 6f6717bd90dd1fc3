#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "randrl/coingrid.hpp"
#include "randrl/error.hpp"
#include "randrl/theme.hpp"

using namespace randrl;

namespace {

uint64_t obs_hash(const Tensor& t) {
    uint64_t h = 1469598103934665603ULL;
    for (int64_t i = 0; i < t.numel(); ++i) {
        uint32_t bits;
        std::memcpy(&bits, t.data() + i, 4);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

int pixels_differing(const Tensor& a, const Tensor& b) {
    int n = 0;
    for (int y = 0; y < kObsSize; ++y)
        for (int x = 0; x < kObsSize; ++x)
            for (int c = 0; c < 3; ++c)
                if (a.data()[(c * kObsSize + y) * kObsSize + x] !=
                    b.data()[(c * kObsSize + y) * kObsSize + x]) {
                    ++n;
                    c = 3;
                }
    return n;
}

LevelSpec plain_level(std::vector<int> obstacles, std::vector<int> decoys = {},
                      bool moving = false) {
    LevelSpec s;
    s.width = 12;
    s.coin_x = 11;
    s.obstacles = std::move(obstacles);
    s.bad_coins = std::move(decoys);
    s.moving_obstacles = moving;
    return s;
}

}  // namespace

TEST_CASE("themes are deterministic and cover the palette") {
    for (int id = 0; id < kThemePaletteSize; ++id) {
        const ThemeSpec a = make_theme(id);
        const ThemeSpec b = make_theme(id);
        CHECK(a.theme_id == id);
        CHECK(a.bg_base == b.bg_base);
        CHECK(a.coin_color == b.coin_color);
        CHECK(a.bg_noise_seed == b.bg_noise_seed);
    }
    CHECK_THROWS_AS(make_theme(-1), ValueError);
    CHECK_THROWS_AS(make_theme(kThemePaletteSize), ValueError);
}

TEST_CASE("every theme pair differs in at least 5 percent of pixels") {
    const LevelSpec level = plain_level({3, 6});
    std::vector<Tensor> obs;
    obs.reserve(kThemePaletteSize);
    for (int id = 0; id < kThemePaletteSize; ++id) {
        CoinGrid env(level, make_theme(id), CoinGridConfig{});
        obs.push_back(env.reset());
    }
    const int threshold = kObsSize * kObsSize / 20;
    int worst = kObsSize * kObsSize;
    for (int i = 0; i < kThemePaletteSize; ++i)
        for (int j = i + 1; j < kThemePaletteSize; ++j)
            worst = std::min(worst, pixels_differing(obs[static_cast<size_t>(i)],
                                                     obs[static_cast<size_t>(j)]));
    CHECK(worst >= threshold);
}

TEST_CASE("theme_split returns disjoint deterministic sets") {
    const ThemeSplit s1 = theme_split(99, 8, 24);
    const ThemeSplit s2 = theme_split(99, 8, 24);
    CHECK(s1.seen == s2.seen);
    CHECK(s1.unseen == s2.unseen);
    CHECK(s1.seen.size() == 8);
    CHECK(s1.unseen.size() == 24);

    std::set<int> all(s1.seen.begin(), s1.seen.end());
    all.insert(s1.unseen.begin(), s1.unseen.end());
    CHECK(all.size() == 32);
    for (int id : all) {
        CHECK(id >= 0);
        CHECK(id < kThemePaletteSize);
    }

    const ThemeSplit other = theme_split(100, 8, 24);
    CHECK(s1.seen != other.seen);

    CHECK_THROWS_AS(theme_split(1, 0, 4), ValueError);
    CHECK_THROWS_AS(theme_split(1, 40, 40), ValueError);
}

TEST_CASE("generated levels are deterministic, spaced, and solvable") {
    CoinGridConfig cfg;
    for (uint64_t seed = 0; seed < 200; ++seed) {
        const LevelSpec a = generate_level(seed, cfg);
        const LevelSpec b = generate_level(seed, cfg);
        CHECK(a.obstacles == b.obstacles);
        REQUIRE(!a.obstacles.empty());
        CHECK(a.obstacles.size() <= 3);
        for (size_t i = 0; i < a.obstacles.size(); ++i) {
            CHECK(a.obstacles[i] >= 2);
            CHECK(a.obstacles[i] <= cfg.width - 3);
            if (i > 0) CHECK(a.obstacles[i] - a.obstacles[i - 1] >= 2);
        }
        CHECK(level_solvable(a, cfg.max_steps));
    }
}

TEST_CASE("variant levels with decoys and moving hazards stay solvable") {
    CoinGridConfig cfg;
    cfg.bad_coins = true;
    cfg.moving_obstacles = true;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const LevelSpec s = generate_level(seed, cfg);
        CHECK(!s.bad_coins.empty());
        CHECK(s.moving_obstacles);
        CHECK(level_solvable(s, cfg.max_steps));
    }
}

TEST_CASE("walking into a hazard kills, jumping clears exactly one cell") {
    CoinGrid env(plain_level({2}), make_theme(0), CoinGridConfig{});
    env.reset();

    SUBCASE("walk in") {
        env.step(Action::right);
        const StepResult r = env.step(Action::right);
        CHECK(r.done);
        CHECK(r.info.death);
        CHECK(r.reward == 0.0f);
    }
    SUBCASE("jump over, then run to the coin") {
        CHECK_FALSE(env.step(Action::right).done);   // x=1
        CHECK_FALSE(env.step(Action::jump).done);    // airborne at x=1
        CHECK_FALSE(env.step(Action::right).done);   // over the hazard at x=2
        CHECK_FALSE(env.step(Action::right).done);   // lands at x=3
        StepResult r;
        for (int i = 0; i < 8; ++i) r = env.step(Action::right);
        CHECK(r.done);
        CHECK(r.info.success);
        CHECK(r.reward == kCoinReward);
        CHECK_FALSE(r.info.death);
        CHECK_FALSE(r.info.timeout);
    }
    SUBCASE("landing on a hazard still kills") {
        CoinGrid env2(plain_level({3}), make_theme(0), CoinGridConfig{});
        env2.reset();
        env2.step(Action::right);  // x=1
        env2.step(Action::jump);
        env2.step(Action::right);  // x=2 airborne
        const StepResult r = env2.step(Action::right);  // grounds at x=3
        CHECK(r.done);
        CHECK(r.info.death);
    }
}

TEST_CASE("episode times out after max_steps with a single done flag") {
    CoinGridConfig cfg;
    cfg.max_steps = 20;
    CoinGrid env(plain_level({5}), make_theme(2), cfg);
    env.reset();
    StepResult r;
    for (int i = 0; i < 20; ++i) {
        r = env.step(Action::noop);
        if (i < 19) CHECK_FALSE(r.done);
    }
    CHECK(r.done);
    CHECK(r.info.timeout);
    CHECK_FALSE(r.info.success);
    CHECK_FALSE(r.info.death);
    CHECK(r.reward == 0.0f);
    CHECK_THROWS_AS(env.step(Action::noop), ContractError);
}

TEST_CASE("decoy coins end the episode unrewarded unless jumped over") {
    CoinGridConfig cfg;
    cfg.bad_coins = true;
    CoinGrid env(plain_level({6}, {2}), make_theme(1), cfg);
    env.reset();

    SUBCASE("touching the decoy") {
        env.step(Action::right);
        const StepResult r = env.step(Action::right);
        CHECK(r.done);
        CHECK(r.reward == 0.0f);
        CHECK(r.info.death);
    }
    SUBCASE("jumping the decoy keeps the coin reachable") {
        env.step(Action::right);  // x=1
        env.step(Action::jump);
        env.step(Action::right);  // over decoy at x=2
        CHECK_FALSE(env.step(Action::right).done);  // lands x=3
        env.step(Action::right);  // x=4
        env.step(Action::right);  // x=5
        env.step(Action::jump);
        env.step(Action::right);  // over hazard at x=6
        CHECK_FALSE(env.step(Action::right).done);  // lands x=7
        StepResult r;
        for (int i = 0; i < 4; ++i) r = env.step(Action::right);
        CHECK(r.info.success);
        CHECK(r.reward == kCoinReward);
    }
}

TEST_CASE("moving hazards oscillate with per-hazard phase") {
    CoinGrid env(plain_level({3, 6}, {}, true), make_theme(0), CoinGridConfig{.moving_obstacles = true});
    env.reset();
    CHECK(env.hazard_cell(0, 0) == 3);
    CHECK(env.hazard_cell(0, 1) == 4);
    CHECK(env.hazard_cell(0, 2) == 3);
    CHECK(env.hazard_cell(1, 0) == 7);
    CHECK(env.hazard_cell(1, 1) == 6);

    // A hazard can march onto a waiting agent.
    CoinGrid env2(plain_level({3}, {}, true), make_theme(0), CoinGridConfig{.moving_obstacles = true});
    env2.reset();
    env2.step(Action::right);  // x=1
    env2.step(Action::right);  // x=2, t=2: hazard at 3
    env2.step(Action::right);  // x=3, t=3: hazard at 4
    const StepResult r = env2.step(Action::noop);  // t=4: hazard returns to 3
    CHECK(r.done);
    CHECK(r.info.death);
}

TEST_CASE("dynamics ignore the theme entirely") {
    const LevelSpec level = generate_level(17, CoinGridConfig{});
    CoinGrid a(level, make_theme(4), CoinGridConfig{});
    CoinGrid b(level, make_theme(40), CoinGridConfig{});
    a.reset();
    b.reset();
    const Action plan[] = {Action::right, Action::jump, Action::right, Action::right,
                           Action::left,  Action::jump, Action::right, Action::noop};
    for (Action act : plan) {
        const StepResult ra = a.step(act);
        const StepResult rb = b.step(act);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.done == rb.done);
        CHECK(ra.info.success == rb.info.success);
        CHECK(ra.info.death == rb.info.death);
        if (ra.done) break;
    }
    CHECK(a.state().x == b.state().x);
    CHECK(a.state().air == b.state().air);
}

TEST_CASE("rendering is egocentric with quantized pixel values") {
    CoinGrid env(plain_level({4}), make_theme(7), CoinGridConfig{});
    Tensor obs = env.reset();

    auto at = [&](const Tensor& t, int c, int y, int x) {
        return t.data()[(c * kObsSize + y) * kObsSize + x];
    };
    // Agent block sits at screen cell 5 whatever the world position is.
    CHECK(at(obs, 0, 32, 20) == doctest::Approx(220.0f / 255.0f));
    CHECK(at(obs, 1, 32, 20) == doctest::Approx(48.0f / 255.0f));
    env.step(Action::right);
    env.step(Action::right);
    obs = env.render();
    CHECK(at(obs, 0, 32, 20) == doctest::Approx(220.0f / 255.0f));

    // Airborne shifts the agent up two cells.
    env.step(Action::jump);
    obs = env.render();
    CHECK(at(obs, 0, 24, 20) == doctest::Approx(220.0f / 255.0f));

    // Every channel value is u8/255.
    for (int64_t i = 0; i < obs.numel(); ++i) {
        const float v = obs.data()[i] * 255.0f;
        CHECK(v == doctest::Approx(std::round(v)).epsilon(1e-5));
        CHECK(obs.data()[i] >= 0.0f);
        CHECK(obs.data()[i] <= 1.0f);
    }
}

TEST_CASE("observations are bit-stable across resets and state restore") {
    const LevelSpec level = generate_level(23, CoinGridConfig{});
    CoinGrid env(level, make_theme(11), CoinGridConfig{});
    const uint64_t h0 = obs_hash(env.reset());
    env.step(Action::right);
    env.step(Action::jump);
    const CoinGridState saved = env.state();
    const uint64_t h_mid = obs_hash(env.render());
    env.step(Action::right);
    CHECK(obs_hash(env.reset()) == h0);

    env.set_state(saved);
    CHECK(obs_hash(env.render()) == h_mid);
}

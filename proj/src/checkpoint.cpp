#include "randrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "randrl/error.hpp"

namespace randrl {

namespace {

constexpr char kMagic[4] = {'N', 'R', 'N', 'D'};

// All multi-byte values are written little-endian regardless of host order.
struct Writer {
    std::string out;

    void u8(uint8_t v) { out.push_back(static_cast<char>(v)); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        out.append(s);
    }
    void ivec(const std::vector<int>& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (int x : v) i32(x);
    }
    void tensor(const Tensor& t) {
        u32(static_cast<uint32_t>(t.rank()));
        for (int64_t d : t.shape()) i64(d);
        for (int64_t i = 0; i < t.numel(); ++i) f32(t[i]);
    }
    void rng(const RngState& s) {
        u64(s.key);
        u64(s.pos);
    }
};

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    explicit Reader(const std::string& b) : buf(b) {}

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("checkpoint truncated");
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<int> ivec() {
        uint32_t n = u32();
        std::vector<int> v(n);
        for (uint32_t i = 0; i < n; ++i) v[i] = i32();
        return v;
    }
    Tensor tensor() {
        uint32_t rank = u32();
        std::vector<int64_t> shape(rank);
        int64_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            shape[i] = i64();
            if (shape[i] <= 0 || shape[i] > (1 << 24)) throw IoError("checkpoint: bad tensor dim");
            numel *= shape[i];
        }
        Tensor t(shape);
        for (int64_t i = 0; i < numel; ++i) t[i] = f32();
        return t;
    }
    RngState rng() {
        RngState s;
        s.key = u64();
        s.pos = u64();
        return s;
    }
};

void write_hyper(Writer& w, const Hyperparams& hp) {
    w.f32(hp.gamma);
    w.f32(hp.gae_lambda);
    w.f32(hp.clip_eps);
    w.f32(hp.entropy_coef);
    w.f32(hp.value_coef);
    w.i32(hp.epochs);
    w.i32(hp.minibatches);
    w.f32(hp.lr);
    w.f32(hp.beta_fm);
    w.f32(hp.alpha_clean);
    w.i32(hp.mc_samples);
    w.f32(hp.fgsm_eps);
}

Hyperparams read_hyper(Reader& r) {
    Hyperparams hp;
    hp.gamma = r.f32();
    hp.gae_lambda = r.f32();
    hp.clip_eps = r.f32();
    hp.entropy_coef = r.f32();
    hp.value_coef = r.f32();
    hp.epochs = r.i32();
    hp.minibatches = r.i32();
    hp.lr = r.f32();
    hp.beta_fm = r.f32();
    hp.alpha_clean = r.f32();
    hp.mc_samples = r.i32();
    hp.fgsm_eps = r.f32();
    return hp;
}

void write_coin_config(Writer& w, const TrainConfig& c) {
    w.str(method_to_string(c.method));
    w.str(placement_to_string(c.placement));
    write_hyper(w, c.hyper);
    w.i64(c.total_timesteps);
    w.i32(c.n_envs);
    w.i32(c.horizon);
    w.ivec(c.seen_themes);
    w.ivec(c.unseen_themes);
    w.u64(c.seed);
    w.u8(c.fm_stop_grad_clean ? 1 : 0);
    w.i32(c.randomizer_kernel);
    w.u8(c.bad_coins ? 1 : 0);
    w.u8(c.moving_obstacles ? 1 : 0);
}

TrainConfig read_coin_config(Reader& r) {
    TrainConfig c;
    c.method = method_from_string(r.str());
    c.placement = placement_from_string(r.str());
    c.hyper = read_hyper(r);
    c.total_timesteps = r.i64();
    c.n_envs = r.i32();
    c.horizon = r.i32();
    c.seen_themes = r.ivec();
    c.unseen_themes = r.ivec();
    c.seed = r.u64();
    c.fm_stop_grad_clean = r.u8() != 0;
    c.randomizer_kernel = r.i32();
    c.bad_coins = r.u8() != 0;
    c.moving_obstacles = r.u8() != 0;
    return c;
}

void write_cart_config(Writer& w, const CartTrainConfig& c) {
    w.str(method_to_string(c.method));
    write_hyper(w, c.hyper);
    w.i64(c.total_timesteps);
    w.i32(c.n_envs);
    w.i32(c.horizon);
    w.u64(c.seed);
    w.f32(c.dynamics.force);
    w.f32(c.dynamics.length);
    w.f32(c.dynamics.masspole);
}

CartTrainConfig read_cart_config(Reader& r) {
    CartTrainConfig c;
    c.method = method_from_string(r.str());
    c.hyper = read_hyper(r);
    c.total_timesteps = r.i64();
    c.n_envs = r.i32();
    c.horizon = r.i32();
    c.seed = r.u64();
    c.dynamics.force = r.f32();
    c.dynamics.length = r.f32();
    c.dynamics.masspole = r.f32();
    return c;
}

void write_coin_runtime(Writer& w, const Trainer::RuntimeState& rs) {
    w.u32(static_cast<uint32_t>(rs.envs.size()));
    for (const EnvSlot& s : rs.envs) {
        w.u64(s.level.level_seed);
        w.i32(s.level.width);
        w.ivec(s.level.obstacles);
        w.ivec(s.level.bad_coins);
        w.i32(s.level.coin_x);
        w.u8(s.level.moving_obstacles ? 1 : 0);
        w.i32(s.theme_id);
        w.i32(s.state.x);
        w.i32(s.state.air);
        w.i32(s.state.step_count);
        w.u8(s.state.done ? 1 : 0);
        w.u8(static_cast<uint8_t>(s.aug.kind));
        w.u32(static_cast<uint32_t>(s.aug.boxes.size()));
        for (const CutoutBox& b : s.aug.boxes) {
            w.i32(b.x);
            w.i32(b.y);
            w.i32(b.w);
            w.i32(b.h);
            w.f32(b.r);
            w.f32(b.g);
            w.f32(b.b);
        }
        w.u8(s.aug.invert_on ? 1 : 0);
        w.f32(s.aug.brightness);
        w.f32(s.aug.contrast);
        w.f32(s.aug.saturation);
        w.f32(s.episode_return);
    }
    w.rng(rs.act_rng);
    w.rng(rs.env_rng);
    w.rng(rs.rand_rng);
    w.rng(rs.shuffle_rng);
    w.rng(rs.aug_rng);
    w.i64(rs.timestep);
    w.i64(rs.iteration);
    w.i64(rs.adam_t);
}

Trainer::RuntimeState read_coin_runtime(Reader& r) {
    Trainer::RuntimeState rs;
    uint32_t n = r.u32();
    rs.envs.resize(n);
    for (EnvSlot& s : rs.envs) {
        s.level.level_seed = r.u64();
        s.level.width = r.i32();
        s.level.obstacles = r.ivec();
        s.level.bad_coins = r.ivec();
        s.level.coin_x = r.i32();
        s.level.moving_obstacles = r.u8() != 0;
        s.theme_id = r.i32();
        s.state.x = r.i32();
        s.state.air = r.i32();
        s.state.step_count = r.i32();
        s.state.done = r.u8() != 0;
        s.aug.kind = static_cast<AugmentKind>(r.u8());
        uint32_t nb = r.u32();
        s.aug.boxes.resize(nb);
        for (CutoutBox& b : s.aug.boxes) {
            b.x = r.i32();
            b.y = r.i32();
            b.w = r.i32();
            b.h = r.i32();
            b.r = r.f32();
            b.g = r.f32();
            b.b = r.f32();
        }
        s.aug.invert_on = r.u8() != 0;
        s.aug.brightness = r.f32();
        s.aug.contrast = r.f32();
        s.aug.saturation = r.f32();
        s.episode_return = r.f32();
    }
    rs.act_rng = r.rng();
    rs.env_rng = r.rng();
    rs.rand_rng = r.rng();
    rs.shuffle_rng = r.rng();
    rs.aug_rng = r.rng();
    rs.timestep = r.i64();
    rs.iteration = r.i64();
    rs.adam_t = r.i64();
    return rs;
}

void write_cart_runtime(Writer& w, const CartTrainer::RuntimeState& rs) {
    w.u32(static_cast<uint32_t>(rs.envs.size()));
    for (const CartTrainer::CartSlot& s : rs.envs) {
        w.f32(s.dynamics.force);
        w.f32(s.dynamics.length);
        w.f32(s.dynamics.masspole);
        w.f32(s.state.x);
        w.f32(s.state.x_dot);
        w.f32(s.state.theta);
        w.f32(s.state.theta_dot);
        w.i32(s.state.step_count);
        w.u8(s.state.done ? 1 : 0);
        w.f32(s.episode_return);
    }
    w.rng(rs.act_rng);
    w.rng(rs.env_rng);
    w.rng(rs.rand_rng);
    w.rng(rs.shuffle_rng);
    w.i64(rs.timestep);
    w.i64(rs.iteration);
    w.i64(rs.adam_t);
}

CartTrainer::RuntimeState read_cart_runtime(Reader& r) {
    CartTrainer::RuntimeState rs;
    uint32_t n = r.u32();
    rs.envs.resize(n);
    for (CartTrainer::CartSlot& s : rs.envs) {
        s.dynamics.force = r.f32();
        s.dynamics.length = r.f32();
        s.dynamics.masspole = r.f32();
        s.state.x = r.f32();
        s.state.x_dot = r.f32();
        s.state.theta = r.f32();
        s.state.theta_dot = r.f32();
        s.state.step_count = r.i32();
        s.state.done = r.u8() != 0;
        s.episode_return = r.f32();
    }
    rs.act_rng = r.rng();
    rs.env_rng = r.rng();
    rs.rand_rng = r.rng();
    rs.shuffle_rng = r.rng();
    rs.timestep = r.i64();
    rs.iteration = r.i64();
    rs.adam_t = r.i64();
    return rs;
}

void write_params(Writer& w, const std::vector<nn::Param>& params,
                  const std::vector<nn::AdamState>& adam) {
    if (params.size() != adam.size())
        throw ValueError("checkpoint: params and adam states out of step");
    w.u32(static_cast<uint32_t>(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        w.str(params[i].name);
        w.tensor(params[i].value);
        w.tensor(adam[i].m);
        w.tensor(adam[i].v);
    }
}

void read_params(Reader& r, std::vector<nn::Param>& params, std::vector<nn::AdamState>& adam) {
    uint32_t n = r.u32();
    params.clear();
    adam.clear();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        Tensor value = r.tensor();
        nn::AdamState st;
        st.m = r.tensor();
        st.v = r.tensor();
        if (!st.m.same_shape(value) || !st.v.same_shape(value))
            throw IoError("checkpoint: optimizer state shape mismatch");
        params.emplace_back(std::move(name), std::move(value));
        adam.push_back(std::move(st));
    }
}

template <typename TrainerT>
void copy_weights_in(const Checkpoint& cp, TrainerT& tr) {
    std::vector<nn::Param*> dst = tr.policy().params();
    if (dst.size() != cp.params.size())
        throw ValueError("apply_checkpoint: parameter count mismatch");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (dst[i]->name != cp.params[i].name)
            throw ValueError("apply_checkpoint: parameter name mismatch at " + dst[i]->name);
        if (!dst[i]->value.same_shape(cp.params[i].value))
            throw ValueError("apply_checkpoint: shape mismatch at " + dst[i]->name);
        dst[i]->value = cp.params[i].value;
        dst[i]->zero_grad();
    }
    std::vector<nn::AdamState>& adam = tr.adam_states();
    for (size_t i = 0; i < adam.size(); ++i) {
        adam[i].m = cp.adam[i].m;
        adam[i].v = cp.adam[i].v;
    }
}

template <typename TrainerT>
void copy_weights_out(TrainerT& tr, Checkpoint& cp) {
    for (nn::Param* p : tr.policy().params()) cp.params.emplace_back(p->name, p->value);
    cp.adam = tr.adam_states();
}

}  // namespace

Checkpoint make_checkpoint(Trainer& tr) {
    Checkpoint cp;
    cp.cartpole = false;
    cp.coin_config = tr.config();
    copy_weights_out(tr, cp);
    cp.coin_runtime = tr.runtime_state();
    return cp;
}

Checkpoint make_checkpoint(CartTrainer& tr) {
    Checkpoint cp;
    cp.cartpole = true;
    cp.cart_config = tr.config();
    copy_weights_out(tr, cp);
    cp.cart_runtime = tr.runtime_state();
    return cp;
}

void apply_checkpoint(const Checkpoint& cp, Trainer& tr) {
    if (cp.cartpole) throw ValueError("apply_checkpoint: checkpoint holds a cartpole run");
    copy_weights_in(cp, tr);
    tr.restore_runtime_state(cp.coin_runtime);
}

void apply_checkpoint(const Checkpoint& cp, CartTrainer& tr) {
    if (!cp.cartpole) throw ValueError("apply_checkpoint: checkpoint holds a coingrid run");
    copy_weights_in(cp, tr);
    tr.restore_runtime_state(cp.cart_runtime);
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    Writer w;
    w.out.append(kMagic, sizeof(kMagic));
    w.u32(cp.version);
    w.u8(cp.cartpole ? 1 : 0);
    if (cp.cartpole) {
        write_cart_config(w, cp.cart_config);
    } else {
        write_coin_config(w, cp.coin_config);
    }
    write_params(w, cp.params, cp.adam);
    if (cp.cartpole) {
        write_cart_runtime(w, cp.cart_runtime);
    } else {
        write_coin_runtime(w, cp.coin_runtime);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
    f.flush();
    if (!f) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(buf);
    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IoError("not a checkpoint file (bad magic)");
    r.pos = 4;

    Checkpoint cp;
    cp.version = r.u32();
    if (cp.version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(cp.version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
    cp.cartpole = r.u8() != 0;
    if (cp.cartpole) {
        cp.cart_config = read_cart_config(r);
    } else {
        cp.coin_config = read_coin_config(r);
    }
    read_params(r, cp.params, cp.adam);
    if (cp.cartpole) {
        cp.cart_runtime = read_cart_runtime(r);
    } else {
        cp.coin_runtime = read_coin_runtime(r);
    }
    if (r.pos != buf.size()) throw IoError("checkpoint has trailing bytes");
    return cp;
}

}  // namespace randrl

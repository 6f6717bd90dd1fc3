#include "randrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "randrl/error.hpp"
#include "randrl/theme.hpp"

namespace randrl {

Method method_from_string(const std::string& s) {
    if (s == "vanilla") return Method::vanilla;
    if (s == "rand") return Method::rand;
    if (s == "rand_fm") return Method::rand_fm;
    if (s == "cutout") return Method::cutout;
    if (s == "grayout") return Method::grayout;
    if (s == "invert") return Method::invert;
    if (s == "jitter") return Method::jitter;
    if (s == "domrand") return Method::domrand;
    throw ValueError("unknown method: " + s);
}

std::string method_to_string(Method m) {
    switch (m) {
        case Method::vanilla: return "vanilla";
        case Method::rand: return "rand";
        case Method::rand_fm: return "rand_fm";
        case Method::cutout: return "cutout";
        case Method::grayout: return "grayout";
        case Method::invert: return "invert";
        case Method::jitter: return "jitter";
        case Method::domrand: return "domrand";
    }
    throw ValueError("method_to_string: bad enum value");
}

bool method_uses_randomizer(Method m) { return m == Method::rand || m == Method::rand_fm; }

AugmentKind method_augment_kind(Method m) {
    switch (m) {
        case Method::cutout: return AugmentKind::cutout;
        case Method::grayout: return AugmentKind::grayout;
        case Method::invert: return AugmentKind::invert;
        case Method::jitter: return AugmentKind::jitter;
        default: return AugmentKind::none;
    }
}

void validate_train_config(const TrainConfig& cfg) {
    validate_hyperparams(cfg.hyper);
    if (cfg.n_envs < 1) throw ValueError("train config: n_envs must be positive");
    if (cfg.horizon < 1) throw ValueError("train config: horizon must be positive");
    if (cfg.total_timesteps < 0) throw ValueError("train config: total_timesteps negative");
    if ((static_cast<int64_t>(cfg.n_envs) * cfg.horizon) % cfg.hyper.minibatches != 0)
        throw ValueError("train config: n_envs * horizon must divide into minibatches");
    if (cfg.seen_themes.empty()) throw ValueError("train config: need at least one seen theme");
    if (cfg.method == Method::domrand && cfg.seen_themes.size() < 2)
        throw ValueError("train config: domrand needs at least two seen themes");
    if (method_uses_randomizer(cfg.method) && cfg.placement == Placement::none)
        throw ValueError("train config: randomizing method with placement none");
    if (cfg.randomizer_kernel < 1 || cfg.randomizer_kernel % 2 == 0)
        throw ValueError("train config: randomizer kernel must be odd and positive");
    std::set<int> seen(cfg.seen_themes.begin(), cfg.seen_themes.end());
    for (int id : cfg.seen_themes)
        if (id < 0 || id >= kThemePaletteSize)
            throw ValueError("train config: seen theme outside the palette");
    for (int id : cfg.unseen_themes) {
        if (id < 0 || id >= kThemePaletteSize)
            throw ValueError("train config: unseen theme outside the palette");
        if (seen.count(id)) throw ValueError("train config: theme in both seen and unseen sets");
    }
}

Var fm_loss(Tape& t, Var features_rand, Var features_clean) {
    const Tensor& a = t.val(features_rand);
    const Tensor& b = t.val(features_clean);
    if (a.rank() != 2 || !a.same_shape(b))
        throw ValueError("fm_loss: feature batches must share a (N, D) shape");
    const Var diff = t.sub(features_rand, features_clean);
    return t.scale(t.sum_all(t.square(diff)), 1.0f / static_cast<float>(a.dim(0)));
}

namespace {

// Stacks per-sample tensors into one batch tensor with a leading N.
Tensor stack(const std::vector<const Tensor*>& rows) {
    std::vector<int64_t> shape{static_cast<int64_t>(rows.size())};
    for (size_t i = 0; i < rows[0]->rank(); ++i) shape.push_back(rows[0]->dim(i));
    Tensor out(shape);
    const int64_t stride = rows[0]->numel();
    for (size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + static_cast<int64_t>(i) * stride, rows[i]->data(),
                    static_cast<size_t>(stride) * sizeof(float));
    return out;
}

std::vector<int64_t> permutation(int64_t n, Rng& rng) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(i) + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

Minibatch gather_minibatch(const RolloutBuffer& buf, const std::vector<int64_t>& idx) {
    Minibatch mb;
    mb.actions.reserve(idx.size());
    for (int64_t i : idx) {
        const Transition& tr = buf.steps[static_cast<size_t>(i)];
        mb.actions.push_back(tr.action);
        mb.old_log_probs.push_back(tr.log_prob);
        mb.advantages.push_back(buf.advantages[static_cast<size_t>(i)]);
        mb.returns_.push_back(buf.returns_[static_cast<size_t>(i)]);
    }
    return mb;
}

void dump_minibatch(std::ostream& os, int64_t iteration, int epoch, int mb_index,
                    const Minibatch& mb, const std::vector<int64_t>& idx, float loss) {
    os << "training aborted: non-finite loss " << loss << " at iteration " << iteration
       << " epoch " << epoch << " minibatch " << mb_index << "\n";
    float adv_lo = mb.advantages[0], adv_hi = mb.advantages[0];
    float ret_lo = mb.returns_[0], ret_hi = mb.returns_[0];
    for (size_t i = 0; i < mb.advantages.size(); ++i) {
        adv_lo = std::min(adv_lo, mb.advantages[i]);
        adv_hi = std::max(adv_hi, mb.advantages[i]);
        ret_lo = std::min(ret_lo, mb.returns_[i]);
        ret_hi = std::max(ret_hi, mb.returns_[i]);
    }
    os << "  advantages in [" << adv_lo << ", " << adv_hi << "], returns in [" << ret_lo
       << ", " << ret_hi << "]\n  sample indices:";
    for (size_t i = 0; i < idx.size() && i < 32; ++i) os << ' ' << idx[i];
    os << "\n";
}

uint64_t fnv_bytes(const void* p, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      policy_([&] {
          validate_train_config(cfg_);
          PolicyConfig pc;
          pc.placement = cfg_.placement;
          Rng init = Rng(cfg_.seed).split("init");
          return PolicyNet(pc, init);
      }()),
      act_rng_(Rng(cfg_.seed).split("act")),
      env_rng_(Rng(cfg_.seed).split("env")),
      rand_rng_(Rng(cfg_.seed).split("randomizer")),
      shuffle_rng_(Rng(cfg_.seed).split("shuffle")),
      aug_rng_(Rng(cfg_.seed).split("augment")) {
    grid_cfg_.bad_coins = cfg_.bad_coins;
    grid_cfg_.moving_obstacles = cfg_.moving_obstacles;

    for (auto* p : policy_.params()) adam_.emplace_back(p->value.shape());

    has_randomizer_ = cfg_.placement != Placement::none;
    if (has_randomizer_)
        id_phi_ = identity_params(policy_.randomizer_prior(cfg_.randomizer_kernel));

    slots_.resize(static_cast<size_t>(cfg_.n_envs));
    cur_obs_.resize(static_cast<size_t>(cfg_.n_envs));
    envs_.reserve(static_cast<size_t>(cfg_.n_envs));
    for (int i = 0; i < cfg_.n_envs; ++i) {
        envs_.emplace_back(generate_level(0, grid_cfg_), make_theme(0), grid_cfg_);
        reset_slot(i);
    }
}

void Trainer::reset_slot(int i) {
    EnvSlot& slot = slots_[static_cast<size_t>(i)];
    const uint64_t level_seed = env_rng_.next_u64();
    slot.theme_id = cfg_.seen_themes[env_rng_.next_below(cfg_.seen_themes.size())];
    slot.level = generate_level(level_seed, grid_cfg_);
    slot.aug = sample_augment_params(method_augment_kind(cfg_.method), kObsSize, kObsSize,
                                     aug_rng_);
    slot.episode_return = 0.0f;
    envs_[static_cast<size_t>(i)] = CoinGrid(slot.level, make_theme(slot.theme_id), grid_cfg_);
    cur_obs_[static_cast<size_t>(i)] = envs_[static_cast<size_t>(i)].reset();
}

void Trainer::rebuild_env(int i) {
    const EnvSlot& slot = slots_[static_cast<size_t>(i)];
    envs_[static_cast<size_t>(i)] = CoinGrid(slot.level, make_theme(slot.theme_id), grid_cfg_);
    envs_[static_cast<size_t>(i)].set_state(slot.state);
    cur_obs_[static_cast<size_t>(i)] = envs_[static_cast<size_t>(i)].render();
}

Tensor Trainer::policy_input(int i) const {
    const AugmentKind kind = method_augment_kind(cfg_.method);
    if (kind == AugmentKind::none) return cur_obs_[static_cast<size_t>(i)];
    return augment(cur_obs_[static_cast<size_t>(i)], slots_[static_cast<size_t>(i)].aug);
}

Tensor Trainer::seen_record(int i, const RandomNetParams* phi) const {
    if (method_augment_kind(cfg_.method) != AugmentKind::none) return policy_input(i);
    const Tensor& clean = cur_obs_[static_cast<size_t>(i)];
    if (phi == nullptr || phi->is_identity) return clean;
    if (cfg_.placement == Placement::first || cfg_.placement == Placement::residual) {
        const Tensor batched = clean.reshaped({1, kObsChannels, kObsSize, kObsSize});
        Tensor r = randomize(batched, *phi).reshaped({kObsChannels, kObsSize, kObsSize});
        if (cfg_.placement == Placement::residual)
            for (int64_t j = 0; j < r.numel(); ++j) r.data()[j] += clean.data()[j];
        return r;
    }
    return clean;  // interior placements transform features, not observations
}

IterationStats Trainer::train_iteration() {
    const Hyperparams& hp = cfg_.hyper;

    // One kernel serves the whole iteration.  Methods without randomization
    // draw with identity probability 1 so that rand with alpha=1 replays a
    // vanilla run bit for bit.
    std::optional<RandomNetParams> phi;
    if (has_randomizer_) {
        PriorConfig prior = policy_.randomizer_prior(cfg_.randomizer_kernel);
        prior.alpha = method_uses_randomizer(cfg_.method) ? hp.alpha_clean : 1.0f;
        phi = sample_params(prior, rand_rng_);
    }
    const RandomNetParams* phi_ptr = phi ? &*phi : nullptr;

    RolloutBuffer buf;
    buf.resize(cfg_.n_envs, cfg_.horizon);

    IterationStats stats;
    stats.iteration = iteration_;
    stats.phi_hash = phi ? kernel_hash(*phi) : 0;

    double return_sum = 0.0;
    int successes = 0;

    std::vector<const Tensor*> batch_rows(static_cast<size_t>(cfg_.n_envs));
    std::vector<Tensor> inputs(static_cast<size_t>(cfg_.n_envs));
    for (int t = 0; t < cfg_.horizon; ++t) {
        for (int e = 0; e < cfg_.n_envs; ++e) {
            inputs[static_cast<size_t>(e)] = policy_input(e);
            batch_rows[static_cast<size_t>(e)] = &inputs[static_cast<size_t>(e)];
        }
        const ActOut act = policy_.act(stack(batch_rows), phi_ptr, false, &act_rng_);

        for (int e = 0; e < cfg_.n_envs; ++e) {
            Transition& tr = buf.at(e, t);
            tr.obs_clean = cur_obs_[static_cast<size_t>(e)];
            tr.obs_rand = seen_record(e, phi_ptr);
            tr.action = act.actions[static_cast<size_t>(e)];
            tr.value = act.values[static_cast<size_t>(e)];
            tr.log_prob = act.log_probs[static_cast<size_t>(e)];

            const StepResult sr = envs_[static_cast<size_t>(e)].step(
                static_cast<Action>(tr.action));
            tr.reward = sr.reward;
            tr.done = sr.done;
            slots_[static_cast<size_t>(e)].episode_return += sr.reward;
            if (sr.done) {
                return_sum += slots_[static_cast<size_t>(e)].episode_return;
                successes += sr.info.success ? 1 : 0;
                ++stats.episodes;
                reset_slot(e);
            } else {
                cur_obs_[static_cast<size_t>(e)] = sr.obs;
            }
        }
        timestep_ += cfg_.n_envs;
    }

    for (int e = 0; e < cfg_.n_envs; ++e) {
        inputs[static_cast<size_t>(e)] = policy_input(e);
        batch_rows[static_cast<size_t>(e)] = &inputs[static_cast<size_t>(e)];
    }
    const ActOut boot = policy_.act(stack(batch_rows), phi_ptr, true, nullptr);
    compute_gae_buffer(buf, boot.values, hp);
    normalize_advantages(buf);

    const bool use_aug = method_augment_kind(cfg_.method) != AugmentKind::none;
    const int64_t n_samples = buf.size();
    const int64_t mb_size = n_samples / hp.minibatches;
    const int n_updates = hp.epochs * hp.minibatches;

    nn::AdamConfig adam_cfg;
    adam_cfg.lr = hp.lr;
    auto params = policy_.params();

    std::vector<const Tensor*> rows(static_cast<size_t>(mb_size));
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const std::vector<int64_t> perm = permutation(n_samples, shuffle_rng_);
        for (int m = 0; m < hp.minibatches; ++m) {
            const std::vector<int64_t> idx(perm.begin() + m * mb_size,
                                           perm.begin() + (m + 1) * mb_size);
            const Minibatch mb = gather_minibatch(buf, idx);

            Tape t;
            for (int64_t i = 0; i < mb_size; ++i) {
                const Transition& tr = buf.steps[static_cast<size_t>(idx[static_cast<size_t>(i)])];
                rows[static_cast<size_t>(i)] = use_aug ? &tr.obs_rand : &tr.obs_clean;
            }
            const PolicyOut out = policy_.forward(t, t.input(stack(rows)), phi_ptr);
            const PpoLossOut pl = ppo_loss(t, mb, out.logits, out.value, hp);

            Var total = pl.loss;
            float fm_val = 0.0f;
            if (cfg_.method == Method::rand_fm) {
                for (int64_t i = 0; i < mb_size; ++i)
                    rows[static_cast<size_t>(i)] =
                        &buf.steps[static_cast<size_t>(idx[static_cast<size_t>(i)])].obs_clean;
                const PolicyOut clean = policy_.forward(t, t.input(stack(rows)), &*id_phi_);
                Var clean_feats = cfg_.fm_stop_grad_clean ? t.stop_gradient(clean.features)
                                                          : clean.features;
                const Var fm = fm_loss(t, out.features, clean_feats);
                fm_val = t.val(fm).data()[0];
                total = t.add(total, t.scale(fm, hp.beta_fm));
            }

            const float loss_val = t.val(total).data()[0];
            if (!std::isfinite(loss_val)) {
                dump_minibatch(std::cerr, iteration_, epoch, m, mb, idx, loss_val);
                throw NumericError("train_iteration: loss is not finite");
            }

            for (auto* p : params) p->zero_grad();
            t.backward(total);
            ++adam_t_;
            for (size_t i = 0; i < params.size(); ++i)
                nn::adam_step(*params[i], adam_[i], adam_cfg, adam_t_);

            stats.loss += loss_val / static_cast<float>(n_updates);
            stats.policy_loss += pl.policy_loss / static_cast<float>(n_updates);
            stats.value_loss += pl.value_loss / static_cast<float>(n_updates);
            stats.entropy += pl.entropy / static_cast<float>(n_updates);
            stats.fm += fm_val / static_cast<float>(n_updates);
        }
    }

    ++iteration_;
    stats.timestep = timestep_;
    stats.iteration = iteration_;
    if (stats.episodes > 0) {
        stats.mean_return = static_cast<float>(return_sum / stats.episodes);
        stats.success_rate = static_cast<float>(successes) / static_cast<float>(stats.episodes);
    }
    write_stats(stats);
    return stats;
}

void Trainer::write_stats(const IterationStats& s) {
    if (sink_ == nullptr) return;
    nlohmann::json j;
    j["kind"] = "train";
    j["timestep"] = s.timestep;
    j["iteration"] = s.iteration;
    j["episodes"] = s.episodes;
    j["mean_return"] = s.mean_return;
    j["success_rate"] = s.success_rate;
    j["loss"] = s.loss;
    j["policy_loss"] = s.policy_loss;
    j["value_loss"] = s.value_loss;
    j["entropy"] = s.entropy;
    j["fm"] = s.fm;
    j["phi_hash"] = std::to_string(s.phi_hash);  // string: uint64 exceeds JSON's safe int
    *sink_ << j.dump() << "\n";
    sink_->flush();
}

Trainer::RuntimeState Trainer::runtime_state() const {
    RuntimeState rs;
    rs.envs = slots_;
    for (int i = 0; i < cfg_.n_envs; ++i)
        rs.envs[static_cast<size_t>(i)].state = envs_[static_cast<size_t>(i)].state();
    rs.act_rng = act_rng_.state();
    rs.env_rng = env_rng_.state();
    rs.rand_rng = rand_rng_.state();
    rs.shuffle_rng = shuffle_rng_.state();
    rs.aug_rng = aug_rng_.state();
    rs.timestep = timestep_;
    rs.iteration = iteration_;
    rs.adam_t = adam_t_;
    return rs;
}

void Trainer::restore_runtime_state(const RuntimeState& rs) {
    if (static_cast<int>(rs.envs.size()) != cfg_.n_envs)
        throw ValueError("restore_runtime_state: env count mismatch");
    slots_ = rs.envs;
    for (int i = 0; i < cfg_.n_envs; ++i) rebuild_env(i);
    act_rng_.set_state(rs.act_rng);
    env_rng_.set_state(rs.env_rng);
    rand_rng_.set_state(rs.rand_rng);
    shuffle_rng_.set_state(rs.shuffle_rng);
    aug_rng_.set_state(rs.aug_rng);
    timestep_ = rs.timestep;
    iteration_ = rs.iteration;
    adam_t_ = rs.adam_t;
}

void validate_cart_train_config(const CartTrainConfig& cfg) {
    validate_hyperparams(cfg.hyper);
    if (cfg.n_envs < 1 || cfg.horizon < 1)
        throw ValueError("cart train config: n_envs and horizon must be positive");
    if ((static_cast<int64_t>(cfg.n_envs) * cfg.horizon) % cfg.hyper.minibatches != 0)
        throw ValueError("cart train config: n_envs * horizon must divide into minibatches");
    if (cfg.method != Method::vanilla && cfg.method != Method::rand)
        throw ValueError("cart train config: only vanilla and rand apply to cartpole");
    if (cfg.total_timesteps < 0)
        throw ValueError("cart train config: total_timesteps must be nonnegative");
}

CartTrainer::CartTrainer(CartTrainConfig cfg)
    : cfg_(std::move(cfg)),
      policy_([&] {
          validate_cart_train_config(cfg_);
          Rng init = Rng(cfg_.seed).split("init");
          return MlpPolicy(MlpConfig{}, init);
      }()),
      act_rng_(Rng(cfg_.seed).split("act")),
      env_rng_(Rng(cfg_.seed).split("env")),
      rand_rng_(Rng(cfg_.seed).split("randomizer")),
      shuffle_rng_(Rng(cfg_.seed).split("shuffle")) {
    for (auto* p : policy_.params()) adam_.emplace_back(p->value.shape());
    episode_return_.assign(static_cast<size_t>(cfg_.n_envs), 0.0f);
    cur_obs_.resize(static_cast<size_t>(cfg_.n_envs));
    envs_.reserve(static_cast<size_t>(cfg_.n_envs));
    for (int i = 0; i < cfg_.n_envs; ++i) {
        envs_.emplace_back(cfg_.dynamics, CartPoleConfig{});
        reset_slot(i);
    }
}

void CartTrainer::reset_slot(int i) {
    episode_return_[static_cast<size_t>(i)] = 0.0f;
    cur_obs_[static_cast<size_t>(i)] = envs_[static_cast<size_t>(i)].reset(env_rng_);
}

Tensor CartTrainer::policy_input(int i, const Tensor* diag) const {
    const Tensor& clean = cur_obs_[static_cast<size_t>(i)];
    if (diag == nullptr) return clean;
    Tensor out = clean;
    for (int64_t j = 0; j < out.numel(); ++j) out.data()[j] *= diag->data()[j];
    return out;
}

IterationStats CartTrainer::train_iteration() {
    const Hyperparams& hp = cfg_.hyper;

    // The dynamics analogue of the convolutional kernel: one diagonal scale
    // per iteration, drawn from U(0.8, 1.2) per component.
    std::optional<Tensor> diag;
    if (cfg_.method == Method::rand) {
        Tensor d({kCartObsDim});
        for (int64_t j = 0; j < d.numel(); ++j)
            d.data()[j] = static_cast<float>(rand_rng_.uniform(0.8, 1.2));
        diag = std::move(d);
    }
    const Tensor* diag_ptr = diag ? &*diag : nullptr;

    RolloutBuffer buf;
    buf.resize(cfg_.n_envs, cfg_.horizon);

    IterationStats stats;
    stats.phi_hash = diag ? fnv_bytes(diag->data(), static_cast<size_t>(diag->numel()) * 4) : 0;

    double return_sum = 0.0;
    int successes = 0;

    std::vector<Tensor> inputs(static_cast<size_t>(cfg_.n_envs));
    std::vector<const Tensor*> batch_rows(static_cast<size_t>(cfg_.n_envs));
    for (int t = 0; t < cfg_.horizon; ++t) {
        for (int e = 0; e < cfg_.n_envs; ++e) {
            inputs[static_cast<size_t>(e)] = policy_input(e, diag_ptr);
            batch_rows[static_cast<size_t>(e)] = &inputs[static_cast<size_t>(e)];
        }
        const ActOut act = policy_.act(stack(batch_rows), false, &act_rng_);

        for (int e = 0; e < cfg_.n_envs; ++e) {
            Transition& tr = buf.at(e, t);
            tr.obs_clean = cur_obs_[static_cast<size_t>(e)];
            tr.obs_rand = inputs[static_cast<size_t>(e)];
            tr.action = act.actions[static_cast<size_t>(e)];
            tr.value = act.values[static_cast<size_t>(e)];
            tr.log_prob = act.log_probs[static_cast<size_t>(e)];

            const CartStepResult sr = envs_[static_cast<size_t>(e)].step(tr.action);
            tr.reward = sr.reward;
            tr.done = sr.done;
            episode_return_[static_cast<size_t>(e)] += sr.reward;
            if (sr.done) {
                return_sum += episode_return_[static_cast<size_t>(e)];
                successes += sr.info.success ? 1 : 0;
                ++stats.episodes;
                reset_slot(e);
            } else {
                cur_obs_[static_cast<size_t>(e)] = sr.obs;
            }
        }
        timestep_ += cfg_.n_envs;
    }

    for (int e = 0; e < cfg_.n_envs; ++e) {
        inputs[static_cast<size_t>(e)] = policy_input(e, diag_ptr);
        batch_rows[static_cast<size_t>(e)] = &inputs[static_cast<size_t>(e)];
    }
    const ActOut boot = policy_.act(stack(batch_rows), true, nullptr);
    compute_gae_buffer(buf, boot.values, hp);
    normalize_advantages(buf);

    const int64_t n_samples = buf.size();
    const int64_t mb_size = n_samples / hp.minibatches;
    const int n_updates = hp.epochs * hp.minibatches;

    nn::AdamConfig adam_cfg;
    adam_cfg.lr = hp.lr;
    auto params = policy_.params();

    std::vector<const Tensor*> rows(static_cast<size_t>(mb_size));
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const std::vector<int64_t> perm = permutation(n_samples, shuffle_rng_);
        for (int m = 0; m < hp.minibatches; ++m) {
            const std::vector<int64_t> idx(perm.begin() + m * mb_size,
                                           perm.begin() + (m + 1) * mb_size);
            const Minibatch mb = gather_minibatch(buf, idx);
            for (int64_t i = 0; i < mb_size; ++i)
                rows[static_cast<size_t>(i)] =
                    &buf.steps[static_cast<size_t>(idx[static_cast<size_t>(i)])].obs_rand;

            Tape t;
            const MlpOut out = policy_.forward(t, t.input(stack(rows)));
            const PpoLossOut pl = ppo_loss(t, mb, out.logits, out.value, hp);

            const float loss_val = t.val(pl.loss).data()[0];
            if (!std::isfinite(loss_val)) {
                dump_minibatch(std::cerr, iteration_, epoch, m, mb, idx, loss_val);
                throw NumericError("train_iteration: loss is not finite");
            }

            for (auto* p : params) p->zero_grad();
            t.backward(pl.loss);
            ++adam_t_;
            for (size_t i = 0; i < params.size(); ++i)
                nn::adam_step(*params[i], adam_[i], adam_cfg, adam_t_);

            stats.loss += loss_val / static_cast<float>(n_updates);
            stats.policy_loss += pl.policy_loss / static_cast<float>(n_updates);
            stats.value_loss += pl.value_loss / static_cast<float>(n_updates);
            stats.entropy += pl.entropy / static_cast<float>(n_updates);
        }
    }

    ++iteration_;
    stats.timestep = timestep_;
    stats.iteration = iteration_;
    if (stats.episodes > 0) {
        stats.mean_return = static_cast<float>(return_sum / stats.episodes);
        stats.success_rate = static_cast<float>(successes) / static_cast<float>(stats.episodes);
    }
    if (sink_ != nullptr) {
        nlohmann::json j;
        j["kind"] = "train";
        j["timestep"] = stats.timestep;
        j["iteration"] = stats.iteration;
        j["episodes"] = stats.episodes;
        j["mean_return"] = stats.mean_return;
        j["success_rate"] = stats.success_rate;
        j["loss"] = stats.loss;
        j["policy_loss"] = stats.policy_loss;
        j["value_loss"] = stats.value_loss;
        j["entropy"] = stats.entropy;
        j["phi_hash"] = std::to_string(stats.phi_hash);
        *sink_ << j.dump() << "\n";
        sink_->flush();
    }
    return stats;
}

CartTrainer::RuntimeState CartTrainer::runtime_state() const {
    RuntimeState rs;
    rs.envs.resize(static_cast<size_t>(cfg_.n_envs));
    for (int i = 0; i < cfg_.n_envs; ++i) {
        CartSlot& s = rs.envs[static_cast<size_t>(i)];
        s.dynamics = envs_[static_cast<size_t>(i)].dynamics();
        s.state = envs_[static_cast<size_t>(i)].state();
        s.episode_return = episode_return_[static_cast<size_t>(i)];
    }
    rs.act_rng = act_rng_.state();
    rs.env_rng = env_rng_.state();
    rs.rand_rng = rand_rng_.state();
    rs.shuffle_rng = shuffle_rng_.state();
    rs.timestep = timestep_;
    rs.iteration = iteration_;
    rs.adam_t = adam_t_;
    return rs;
}

void CartTrainer::restore_runtime_state(const RuntimeState& rs) {
    if (static_cast<int>(rs.envs.size()) != cfg_.n_envs)
        throw ValueError("restore_runtime_state: env count mismatch");
    envs_.clear();
    for (int i = 0; i < cfg_.n_envs; ++i) {
        const CartSlot& s = rs.envs[static_cast<size_t>(i)];
        envs_.emplace_back(s.dynamics, CartPoleConfig{});
        envs_.back().set_state(s.state);
        episode_return_[static_cast<size_t>(i)] = s.episode_return;
        cur_obs_[static_cast<size_t>(i)] = envs_.back().observe();
    }
    act_rng_.set_state(rs.act_rng);
    env_rng_.set_state(rs.env_rng);
    rand_rng_.set_state(rs.rand_rng);
    shuffle_rng_.set_state(rs.shuffle_rng);
    timestep_ = rs.timestep;
    iteration_ = rs.iteration;
    adam_t_ = rs.adam_t;
}

}  // namespace randrl

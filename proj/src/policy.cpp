#include "randrl/policy.hpp"

#include <cmath>

#include "randrl/error.hpp"

namespace randrl {

Placement placement_from_string(const std::string& s) {
    if (s == "first") return Placement::first;
    if (s == "after_block_1") return Placement::after_block_1;
    if (s == "after_block_2") return Placement::after_block_2;
    if (s == "after_block_3") return Placement::after_block_3;
    if (s == "residual") return Placement::residual;
    if (s == "none") return Placement::none;
    throw ValueError("unknown placement: " + s);
}

std::string placement_to_string(Placement p) {
    switch (p) {
        case Placement::first: return "first";
        case Placement::after_block_1: return "after_block_1";
        case Placement::after_block_2: return "after_block_2";
        case Placement::after_block_3: return "after_block_3";
        case Placement::residual: return "residual";
        case Placement::none: return "none";
    }
    throw ValueError("placement_to_string: bad enum value");
}

std::vector<int> sample_rows(const Tensor& probs, bool greedy, Rng* rng) {
    if (probs.rank() != 2) throw ValueError("sample_rows: expected (N, A) probabilities");
    const int64_t n = probs.dim(0), a = probs.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int64_t r = 0; r < n; ++r) {
        const float* row = probs.data() + r * a;
        if (greedy) {
            int best = 0;
            for (int64_t c = 1; c < a; ++c)
                if (row[c] > row[best]) best = static_cast<int>(c);
            out[static_cast<size_t>(r)] = best;
        } else {
            if (rng == nullptr) throw ContractError("sample_rows: sampling needs an rng");
            const double u = rng->next_double();
            double cum = 0.0;
            int pick = static_cast<int>(a) - 1;
            for (int64_t c = 0; c < a; ++c) {
                cum += row[c];
                if (u < cum) {
                    pick = static_cast<int>(c);
                    break;
                }
            }
            out[static_cast<size_t>(r)] = pick;
        }
    }
    return out;
}

namespace {

// Shared act() tail once logits/value have been evaluated.
ActOut finish_act(const Tensor& log_probs_rows, const Tensor& values, bool greedy, Rng* rng) {
    const int64_t n = log_probs_rows.dim(0), a = log_probs_rows.dim(1);
    ActOut out;
    out.probs = Tensor({n, a});
    for (int64_t i = 0; i < n * a; ++i)
        out.probs.data()[i] = std::exp(log_probs_rows.data()[i]);
    out.actions = sample_rows(out.probs, greedy, rng);
    out.log_probs.resize(static_cast<size_t>(n));
    out.values.resize(static_cast<size_t>(n));
    for (int64_t r = 0; r < n; ++r) {
        out.log_probs[static_cast<size_t>(r)] =
            log_probs_rows.data()[r * a + out.actions[static_cast<size_t>(r)]];
        out.values[static_cast<size_t>(r)] = values.data()[r];
    }
    return out;
}

}  // namespace

PolicyNet::PolicyNet(PolicyConfig cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg_.height % 8 != 0 || cfg_.width % 8 != 0)
        throw ValueError("PolicyNet: input must survive three 2x2 pools");
    if (cfg_.n_actions < 2) throw ValueError("PolicyNet: need at least two actions");

    const int64_t c = cfg_.in_channels;
    const int64_t flat = 32 * (cfg_.height / 8) * (cfg_.width / 8);

    auto he = [&](std::string name, std::vector<int64_t> shape, int64_t fan_in) {
        Tensor w(shape);
        nn::init_he_normal(w, fan_in, init_rng);
        return nn::Param(std::move(name), std::move(w));
    };
    auto zeros = [&](std::string name, std::vector<int64_t> shape) {
        return nn::Param(std::move(name), Tensor(shape));
    };

    conv1_w_ = he("conv1.w", {16, c, 3, 3}, c * 9);
    conv1_b_ = zeros("conv1.b", {16});
    conv2_w_ = he("conv2.w", {32, 16, 3, 3}, 16 * 9);
    conv2_b_ = zeros("conv2.b", {32});
    conv3_w_ = he("conv3.w", {32, 32, 3, 3}, 32 * 9);
    conv3_b_ = zeros("conv3.b", {32});
    fc_w_ = he("fc.w", {256, flat}, flat);
    fc_b_ = zeros("fc.b", {256});
    pi_w_ = he("pi.w", {cfg_.n_actions, 256}, 256);
    pi_b_ = zeros("pi.b", {cfg_.n_actions});
    v_w_ = he("v.w", {1, 256}, 256);
    v_b_ = zeros("v.b", {1});
}

PolicyOut PolicyNet::forward(Tape& t, Var obs, const RandomNetParams* phi) {
    if (phi == nullptr && cfg_.placement != Placement::none)
        throw ContractError("PolicyNet::forward: this placement requires randomizer params");
    const Tensor& in = t.val(obs);
    if (in.rank() != 4 || in.dim(1) != cfg_.in_channels || in.dim(2) != cfg_.height ||
        in.dim(3) != cfg_.width)
        throw ValueError("PolicyNet::forward: observation shape mismatch");

    Var x = obs;
    if (cfg_.placement == Placement::first) {
        x = randomize(t, x, *phi);
    } else if (cfg_.placement == Placement::residual) {
        x = t.add(x, randomize(t, x, *phi));
    }

    x = t.maxpool2x2(t.relu(t.conv2d(x, t.param(conv1_w_), t.param(conv1_b_), 1, 1)));
    if (cfg_.placement == Placement::after_block_1) x = randomize(t, x, *phi);

    x = t.maxpool2x2(t.relu(t.conv2d(x, t.param(conv2_w_), t.param(conv2_b_), 1, 1)));
    if (cfg_.placement == Placement::after_block_2) x = randomize(t, x, *phi);

    Var last_conv = t.relu(t.conv2d(x, t.param(conv3_w_), t.param(conv3_b_), 1, 1));
    x = t.maxpool2x2(last_conv);
    if (cfg_.placement == Placement::after_block_3) x = randomize(t, x, *phi);

    const int64_t n = t.val(x).dim(0);
    const int64_t flat = t.val(x).numel() / n;
    Var features = t.relu(t.dense(t.reshape(x, {n, flat}), t.param(fc_w_), t.param(fc_b_)));

    PolicyOut out;
    out.features = features;
    out.last_conv = last_conv;
    out.logits = t.dense(features, t.param(pi_w_), t.param(pi_b_));
    out.value = t.reshape(t.dense(features, t.param(v_w_), t.param(v_b_)), {n});
    return out;
}

ActOut PolicyNet::act(const Tensor& obs, const RandomNetParams* phi, bool greedy, Rng* rng) {
    Tape t;
    const PolicyOut o = forward(t, t.input(obs), phi);
    return finish_act(t.val(t.log_softmax_rows(o.logits)), t.val(o.value), greedy, rng);
}

std::vector<nn::Param*> PolicyNet::params() {
    return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &conv3_w_, &conv3_b_,
            &fc_w_,    &fc_b_,    &pi_w_,    &pi_b_,    &v_w_,     &v_b_};
}

PriorConfig PolicyNet::randomizer_prior(int kernel_size) const {
    PriorConfig p;
    p.kernel_size = kernel_size;
    switch (cfg_.placement) {
        case Placement::first:
        case Placement::residual:
            p.n_in = p.n_out = cfg_.in_channels;
            break;
        case Placement::after_block_1:
            p.n_in = p.n_out = 16;
            break;
        case Placement::after_block_2:
        case Placement::after_block_3:
            p.n_in = p.n_out = 32;
            break;
        case Placement::none:
            throw ValueError("randomizer_prior: placement none has no randomizer");
    }
    return p;
}

MlpPolicy::MlpPolicy(MlpConfig cfg, Rng& init_rng) : cfg_(cfg) {
    auto xavier = [&](std::string name, std::vector<int64_t> shape, int64_t fi, int64_t fo) {
        Tensor w(shape);
        nn::init_xavier_normal(w, fi, fo, init_rng);
        return nn::Param(std::move(name), std::move(w));
    };
    auto zeros = [&](std::string name, std::vector<int64_t> shape) {
        return nn::Param(std::move(name), Tensor(shape));
    };
    const int64_t d = cfg_.in_dim, h = cfg_.hidden, a = cfg_.n_actions;
    l1_w_ = xavier("l1.w", {h, d}, d, h);
    l1_b_ = zeros("l1.b", {h});
    l2_w_ = xavier("l2.w", {h, h}, h, h);
    l2_b_ = zeros("l2.b", {h});
    pi_w_ = xavier("pi.w", {a, h}, h, a);
    pi_b_ = zeros("pi.b", {a});
    v_w_ = xavier("v.w", {1, h}, h, 1);
    v_b_ = zeros("v.b", {1});
}

MlpOut MlpPolicy::forward(Tape& t, Var state) {
    const Tensor& in = t.val(state);
    if (in.rank() != 2 || in.dim(1) != cfg_.in_dim)
        throw ValueError("MlpPolicy::forward: state shape mismatch");
    const int64_t n = in.dim(0);

    Var h1 = t.tanh_(t.dense(state, t.param(l1_w_), t.param(l1_b_)));
    Var features = t.tanh_(t.dense(h1, t.param(l2_w_), t.param(l2_b_)));

    MlpOut out;
    out.features = features;
    out.logits = t.dense(features, t.param(pi_w_), t.param(pi_b_));
    out.value = t.reshape(t.dense(features, t.param(v_w_), t.param(v_b_)), {n});
    return out;
}

ActOut MlpPolicy::act(const Tensor& states, bool greedy, Rng* rng) {
    Tape t;
    const MlpOut o = forward(t, t.input(states));
    return finish_act(t.val(t.log_softmax_rows(o.logits)), t.val(o.value), greedy, rng);
}

std::vector<nn::Param*> MlpPolicy::params() {
    return {&l1_w_, &l1_b_, &l2_w_, &l2_b_, &pi_w_, &pi_b_, &v_w_, &v_b_};
}

}  // namespace randrl

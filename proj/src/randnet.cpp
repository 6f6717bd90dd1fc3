#include "randrl/randnet.hpp"

#include <cmath>
#include <cstring>

#include "randrl/error.hpp"
#include "randrl/kernels.hpp"

namespace randrl {

static void validate_prior(const PriorConfig& p) {
    if (p.alpha < 0.0f || p.alpha > 1.0f)
        throw ValueError("PriorConfig: alpha must be in [0, 1]");
    if (p.kernel_size <= 0 || p.kernel_size % 2 == 0)
        throw ValueError("PriorConfig: kernel_size must be odd and positive");
    if (p.n_in <= 0 || p.n_out <= 0)
        throw ValueError("PriorConfig: channel counts must be positive");
}

RandomNetParams identity_params(const PriorConfig& prior) {
    validate_prior(prior);
    if (prior.n_in != prior.n_out)
        throw ValueError("identity_params: identity kernel needs n_in == n_out");
    const int k = prior.kernel_size;
    RandomNetParams phi;
    phi.kernel = Tensor({prior.n_out, prior.n_in, k, k});
    const int c = k / 2;
    for (int ch = 0; ch < prior.n_out; ++ch)
        phi.kernel.at4(ch, ch, c, c) = 1.0f;
    phi.is_identity = true;
    return phi;
}

RandomNetParams sample_params(const PriorConfig& prior, Rng& rng) {
    validate_prior(prior);
    if (rng.bernoulli(prior.alpha)) return identity_params(prior);
    const int k = prior.kernel_size;
    const int64_t fan_in = static_cast<int64_t>(prior.n_in) * k * k;
    const int64_t fan_out = static_cast<int64_t>(prior.n_out) * k * k;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    RandomNetParams phi;
    phi.kernel = Tensor({prior.n_out, prior.n_in, k, k});
    float* d = phi.kernel.data();
    for (int64_t i = 0; i < phi.kernel.numel(); ++i)
        d[i] = static_cast<float>(std * rng.normal());
    phi.is_identity = false;
    return phi;
}

RandomNetParams sample_params(const PriorConfig& prior, uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_params(prior, rng);
}

static kernels::ConvDims phi_dims(const Tensor& obs, const RandomNetParams& phi) {
    if (obs.rank() != 4)
        throw ValueError("randomize: obs must be (N,C,H,W), got " + obs.shape_str());
    if (phi.kernel.rank() != 4 || phi.kernel.dim(2) != phi.kernel.dim(3))
        throw ValueError("randomize: malformed kernel " + phi.kernel.shape_str());
    if (obs.dim(1) != phi.kernel.dim(1))
        throw ValueError("randomize: channel mismatch, obs " + obs.shape_str() +
                         " vs kernel " + phi.kernel.shape_str());
    const int k = static_cast<int>(phi.kernel.dim(2));
    if (obs.dim(2) < k || obs.dim(3) < k)
        throw ValueError("randomize: observation smaller than kernel");
    return kernels::ConvDims{static_cast<int>(obs.dim(0)), static_cast<int>(obs.dim(1)),
                             static_cast<int>(obs.dim(2)), static_cast<int>(obs.dim(3)),
                             static_cast<int>(phi.kernel.dim(0)), k, 1, k / 2};
}

Tensor randomize(const Tensor& obs, const RandomNetParams& phi) {
    if (phi.is_identity) return obs;
    const kernels::ConvDims d = phi_dims(obs, phi);
    Tensor out({d.n, d.co, d.h, d.w});
    kernels::conv2d_forward(obs.data(), phi.kernel.data(), nullptr, out.data(), d);
    return out;
}

Var randomize(Tape& tape, Var obs, const RandomNetParams& phi) {
    if (phi.is_identity) return obs;
    phi_dims(tape.val(obs), phi);
    Var w = tape.input(phi.kernel, /*requires_grad=*/false);
    return tape.conv2d(obs, w, Var{}, /*stride=*/1, phi.kernel.dim(2) / 2);
}

Tensor diagonal_randomize(const Tensor& state, Rng& rng) {
    if (state.rank() != 1)
        throw ValueError("diagonal_randomize: expected 1-D state, got " + state.shape_str());
    Tensor out = state;
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] *= static_cast<float>(rng.uniform(0.8, 1.2));
    return out;
}

Tensor diagonal_randomize(const Tensor& state, uint64_t rng_seed) {
    Rng rng(rng_seed);
    return diagonal_randomize(state, rng);
}

uint64_t kernel_hash(const RandomNetParams& phi) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const unsigned char id = phi.is_identity ? 1 : 0;
    feed(&id, 1);
    feed(phi.kernel.data(), sizeof(float) * static_cast<size_t>(phi.kernel.numel()));
    return h;
}

}  // namespace randrl

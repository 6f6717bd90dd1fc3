#pragma once

#include <cstdint>

#include "randrl/rng.hpp"
#include "randrl/tape.hpp"
#include "randrl/tensor.hpp"

namespace randrl {

// Mixture prior over randomizer kernels: identity with probability alpha,
// otherwise i.i.d. zero-mean normal entries with Xavier standard deviation
// sqrt(2 / (fan_in + fan_out)), fan = kernel_size^2 * channels.  The fan
// counts include the kernel window so that a unit-variance input keeps unit
// variance after randomization; with a 1x1 kernel this reduces to
// sqrt(2 / (n_in + n_out)) over plain channel counts.
struct PriorConfig {
    float alpha = 0.1f;
    int kernel_size = 3;
    int n_in = 3;
    int n_out = 3;
};

// A sampled randomizer kernel.  Immutable after sampling and never trained;
// the tape applies it as a constant.
struct RandomNetParams {
    Tensor kernel;  // (n_out, n_in, k, k)
    bool is_identity = false;
};

// The identity member of the mixture: center tap 1 on matching channels.
RandomNetParams identity_params(const PriorConfig& prior);

// Draws from the mixture prior.  Consumes one uniform for the branch choice
// and, on the non-identity branch, two uniforms per kernel entry.
RandomNetParams sample_params(const PriorConfig& prior, Rng& rng);
RandomNetParams sample_params(const PriorConfig& prior, uint64_t rng_seed);

// Stride-1 zero-padded convolution with phi, no bias, no activation.
// Identity phi short-circuits to an exact pass-through.
Tensor randomize(const Tensor& obs, const RandomNetParams& phi);

// Tape form for training graphs.  The kernel enters the graph as a constant
// leaf, so no gradient ever reaches phi; gradients still flow to obs when it
// requires them.  Identity phi returns obs itself (bit-exact, zero cost).
Var randomize(Tape& tape, Var obs, const RandomNetParams& phi);

// Elementwise product with a fresh diagonal drawn from U(0.8, 1.2); the
// dynamics-generalization analogue of the visual randomizer.
Tensor diagonal_randomize(const Tensor& state, Rng& rng);
Tensor diagonal_randomize(const Tensor& state, uint64_t rng_seed);

// FNV-1a over the kernel bytes plus the identity flag; logged with training
// stats so tests can verify one kernel served a whole iteration.
uint64_t kernel_hash(const RandomNetParams& phi);

}  // namespace randrl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randrl/nn.hpp"
#include "randrl/trainer.hpp"

namespace randrl {

constexpr uint32_t kCheckpointVersion = 1;

// Complete snapshot of a training run: configuration, weights, optimizer
// accumulators, and the runtime state (env slots, RNG streams, counters)
// needed to continue bit-for-bit.  Exactly one of the two runtime/config
// pairs is meaningful, selected by `cartpole`.
struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    bool cartpole = false;
    TrainConfig coin_config;
    CartTrainConfig cart_config;
    std::vector<nn::Param> params;  // name + values; gradients are not persisted
    std::vector<nn::AdamState> adam;
    Trainer::RuntimeState coin_runtime;
    CartTrainer::RuntimeState cart_runtime;
};

Checkpoint make_checkpoint(Trainer& tr);
Checkpoint make_checkpoint(CartTrainer& tr);

// Copies weights and optimizer state into the trainer (names and shapes must
// match its policy) and restores the runtime state.
void apply_checkpoint(const Checkpoint& cp, Trainer& tr);
void apply_checkpoint(const Checkpoint& cp, CartTrainer& tr);

// Binary file: "NRND" magic, version, config, little-endian float32 tensors.
// save -> load -> save reproduces the file byte for byte.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace randrl

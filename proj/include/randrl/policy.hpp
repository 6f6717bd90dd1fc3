#pragma once

#include <string>
#include <vector>

#include "randrl/nn.hpp"
#include "randrl/randnet.hpp"
#include "randrl/rng.hpp"
#include "randrl/tape.hpp"
#include "randrl/tensor.hpp"

namespace randrl {

// Where the re-randomized layer sits in the trunk.  `first` transforms raw
// observations, `after_block_k` transforms the pooled output of block k,
// `residual` adds the transformed input back onto the raw input, `none`
// disables randomization entirely.
enum class Placement { first, after_block_1, after_block_2, after_block_3, residual, none };

Placement placement_from_string(const std::string& s);
std::string placement_to_string(Placement p);

struct PolicyConfig {
    int in_channels = 3;
    int height = 48;
    int width = 48;
    int n_actions = 4;
    Placement placement = Placement::first;
};

// Graph handles for one forward pass; all Vars live on the caller's tape.
struct PolicyOut {
    Var logits;     // (N, A)
    Var value;      // (N,)
    Var features;   // (N, 256), penultimate dense output after relu
    Var last_conv;  // (N, 32, 12, 12), third conv after relu, before pooling
};

// Actions picked from a forward pass without building gradients.
struct ActOut {
    std::vector<int> actions;
    std::vector<float> log_probs;
    std::vector<float> values;
    Tensor probs;  // (N, A)
};

// Three conv blocks (16, 32, 32 channels, 3x3 stride 1 pad 1, relu, 2x2
// maxpool) shrink 48x48 to 6x6, then a 256-unit dense layer feeds separate
// policy and value heads.
class PolicyNet {
   public:
    PolicyNet(PolicyConfig cfg, Rng& init_rng);

    // phi may be null only when placement is none; identity phi reproduces
    // the unrandomized network bit for bit.
    PolicyOut forward(Tape& t, Var obs, const RandomNetParams* phi);

    ActOut act(const Tensor& obs, const RandomNetParams* phi, bool greedy, Rng* rng);

    std::vector<nn::Param*> params();
    const PolicyConfig& config() const { return cfg_; }
    int feature_dim() const { return 256; }

    // Channel geometry the randomizer needs at this policy's placement.
    PriorConfig randomizer_prior(int kernel_size = 3) const;

   private:
    PolicyConfig cfg_;
    nn::Param conv1_w_, conv1_b_, conv2_w_, conv2_b_, conv3_w_, conv3_b_;
    nn::Param fc_w_, fc_b_, pi_w_, pi_b_, v_w_, v_b_;
};

// Two 64-unit tanh layers for low-dimensional states; the second hidden layer
// is the feature vector.  Input randomization (diagonal scaling) happens on
// the raw state before it reaches this network.
struct MlpConfig {
    int in_dim = 4;
    int hidden = 64;
    int n_actions = 2;
};

struct MlpOut {
    Var logits;
    Var value;
    Var features;
};

class MlpPolicy {
   public:
    MlpPolicy(MlpConfig cfg, Rng& init_rng);

    MlpOut forward(Tape& t, Var state);
    ActOut act(const Tensor& states, bool greedy, Rng* rng);

    std::vector<nn::Param*> params();
    const MlpConfig& config() const { return cfg_; }

   private:
    MlpConfig cfg_;
    nn::Param l1_w_, l1_b_, l2_w_, l2_b_, pi_w_, pi_b_, v_w_, v_b_;
};

// Inverse-CDF sampling per row (or argmax with ties to the lowest index).
std::vector<int> sample_rows(const Tensor& probs, bool greedy, Rng* rng);

}  // namespace randrl

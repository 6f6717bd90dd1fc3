#pragma once

#include <vector>

#include "randrl/rng.hpp"
#include "randrl/tensor.hpp"

namespace randrl {

enum class AugmentKind { none, cutout, grayout, invert, jitter };

struct CutoutBox {
    int x = 0, y = 0, w = 0, h = 0;
    float r = 0.0f, g = 0.0f, b = 0.0f;
};

// Drawn once per episode and held fixed until the next reset.
struct AugmentParams {
    AugmentKind kind = AugmentKind::none;
    std::vector<CutoutBox> boxes;  // cutout
    bool invert_on = false;        // invert (50% per episode)
    float brightness = 1.0f;       // jitter factors, each in [0.5, 1.5]
    float contrast = 1.0f;
    float saturation = 1.0f;
};

AugmentParams sample_augment_params(AugmentKind kind, int height, int width, Rng& rng);

// Applies the transform to a (3, H, W) observation; output stays in [0, 1].
Tensor augment(const Tensor& obs, const AugmentParams& p);

}  // namespace randrl

#include "randrl/augment.hpp"

#include <algorithm>

#include "randrl/error.hpp"

namespace randrl {

AugmentParams sample_augment_params(AugmentKind kind, int height, int width, Rng& rng) {
    AugmentParams p;
    p.kind = kind;
    switch (kind) {
        case AugmentKind::cutout: {
            const int n = static_cast<int>(rng.next_below(6));  // 0..5 boxes
            for (int i = 0; i < n; ++i) {
                CutoutBox b;
                b.w = 4 + static_cast<int>(rng.next_below(13));
                b.h = 4 + static_cast<int>(rng.next_below(13));
                b.x = static_cast<int>(rng.next_below(static_cast<uint64_t>(width - b.w + 1)));
                b.y = static_cast<int>(rng.next_below(static_cast<uint64_t>(height - b.h + 1)));
                b.r = static_cast<float>(rng.next_double());
                b.g = static_cast<float>(rng.next_double());
                b.b = static_cast<float>(rng.next_double());
                p.boxes.push_back(b);
            }
            break;
        }
        case AugmentKind::invert:
            p.invert_on = rng.bernoulli(0.5);
            break;
        case AugmentKind::jitter:
            p.brightness = static_cast<float>(rng.uniform(0.5, 1.5));
            p.contrast = static_cast<float>(rng.uniform(0.5, 1.5));
            p.saturation = static_cast<float>(rng.uniform(0.5, 1.5));
            break;
        case AugmentKind::grayout:
        case AugmentKind::none:
            break;
    }
    return p;
}

Tensor augment(const Tensor& obs, const AugmentParams& p) {
    if (obs.rank() != 3 || obs.dim(0) != 3)
        throw ValueError("augment: expected a (3, H, W) observation");
    const int64_t h = obs.dim(1), w = obs.dim(2), plane = h * w;
    Tensor out = obs;
    float* d = out.data();

    switch (p.kind) {
        case AugmentKind::none:
            break;
        case AugmentKind::cutout:
            for (const CutoutBox& b : p.boxes) {
                const float col[3] = {b.r, b.g, b.b};
                for (int c = 0; c < 3; ++c)
                    for (int y = b.y; y < b.y + b.h; ++y)
                        for (int x = b.x; x < b.x + b.w; ++x)
                            d[c * plane + y * w + x] = col[c];
            }
            break;
        case AugmentKind::grayout:
            for (int64_t i = 0; i < plane; ++i) {
                const float m = (d[i] + d[plane + i] + d[2 * plane + i]) / 3.0f;
                d[i] = d[plane + i] = d[2 * plane + i] = m;
            }
            break;
        case AugmentKind::invert:
            if (p.invert_on)
                for (int64_t i = 0; i < out.numel(); ++i) d[i] = 1.0f - d[i];
            break;
        case AugmentKind::jitter: {
            for (int64_t i = 0; i < out.numel(); ++i) d[i] *= p.brightness;
            // Contrast pivots on the image's mean luminance, saturation on
            // each pixel's own gray value.
            double lum = 0.0;
            for (int64_t i = 0; i < plane; ++i)
                lum += (d[i] + d[plane + i] + d[2 * plane + i]) / 3.0;
            const float mean_lum = static_cast<float>(lum / static_cast<double>(plane));
            for (int64_t i = 0; i < out.numel(); ++i)
                d[i] = (d[i] - mean_lum) * p.contrast + mean_lum;
            for (int64_t i = 0; i < plane; ++i) {
                const float gray = (d[i] + d[plane + i] + d[2 * plane + i]) / 3.0f;
                for (int c = 0; c < 3; ++c)
                    d[c * plane + i] = (d[c * plane + i] - gray) * p.saturation + gray;
            }
            for (int64_t i = 0; i < out.numel(); ++i) d[i] = std::clamp(d[i], 0.0f, 1.0f);
            break;
        }
    }
    return out;
}

}  // namespace randrl

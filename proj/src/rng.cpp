#include "randrl/rng.hpp"

#include <cmath>

#include "randrl/error.hpp"

namespace randrl {

uint64_t Rng::mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng() : key_(0x9e3779b97f4a7c15ULL), pos_(key_) {}

Rng::Rng(uint64_t seed) : key_(mix(seed ^ 0xbf58476d1ce4e5b9ULL)), pos_(key_) {}

uint64_t Rng::next_u64() {
    pos_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = pos_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::split(const std::string& label) const {
    // FNV-1a over the label, folded into the stream identity, never the
    // consumption position.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    Rng child;
    child.key_ = mix(key_ ^ mix(h));
    child.pos_ = child.key_;
    return child;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

uint64_t Rng::next_below(uint64_t n) {
    if (n == 0) throw ValueError("Rng::next_below: n must be > 0");
    // rejection sampling keeps the distribution exact for any n
    uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::normal() {
    // Box-Muller, discarding the second deviate so every call costs exactly
    // two u64 draws regardless of history.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

bool Rng::bernoulli(double p) {
    return next_double() < p;
}

}  // namespace randrl

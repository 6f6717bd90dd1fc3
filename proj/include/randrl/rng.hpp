#pragma once

#include <cstdint>
#include <string>

namespace randrl {

// Serializable snapshot of a generator: stream identity plus position.
struct RngState {
    uint64_t key = 0;
    uint64_t pos = 0;
};

// Deterministic counter-based generator (splitmix64 core).  Every consumer of
// randomness in the project holds its own Rng obtained via split(), so adding
// or removing draws in one subsystem never shifts the stream of another.
//
// A generator carries two words: `key_`, the immutable stream identity that
// children are derived from, and `pos_`, the consumption position.  Splitting
// depends only on key_ and the label, so the children a parent hands out do
// not change however much the parent has been consumed.
class Rng {
public:
    Rng();
    explicit Rng(uint64_t seed);

    // Derives an independent stream keyed by a label.  Does not consume from
    // or otherwise disturb the parent.
    Rng split(const std::string& label) const;

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in [0, n).  n must be > 0.
    uint64_t next_below(uint64_t n);

    // Standard normal via Box-Muller.  Each call consumes exactly two u64
    // draws, which keeps replay simple.
    double normal();

    // True with probability p.
    bool bernoulli(double p);

    RngState state() const { return {key_, pos_}; }
    void set_state(const RngState& s) {
        key_ = s.key;
        pos_ = s.pos;
    }

private:
    static uint64_t mix(uint64_t z);
    uint64_t key_;
    uint64_t pos_;
};

}  // namespace randrl

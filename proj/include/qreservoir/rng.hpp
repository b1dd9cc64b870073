// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qrc {

/// SplitMix64 finalizer. Used to derive independent stream seeds and
/// cell seeds from structured keys.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Order-sensitive combination of several 64-bit words into one seed.
constexpr uint64_t derive_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x6A09E667F3BCC909ULL;
    for (uint64_t p : parts) {
        h = mix64(h ^ p);
    }
    return h;
}

/// Portable deterministic generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than with
/// <random> distribution classes because those are implementation
/// defined. Substream `k` of seed `s` is the engine seeded with
/// derive_seed({s, k}).
class Rng {
   public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    static Rng substream(uint64_t seed, uint64_t stream) { return Rng(derive_seed({seed, stream})); }

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace qrc

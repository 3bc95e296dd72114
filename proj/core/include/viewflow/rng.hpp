// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace viewflow {

// Deterministic RNG with fully serializable state. All draws go through the
// helpers below instead of std:: distributions, which keep hidden internal
// state that a checkpointed engine string would not capture.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); rejection sampling, no modulo bias
    std::uint64_t uniform_index(std::uint64_t n);

    // uniform integer in [lo, hi] inclusive
    int uniform_int(int lo, int hi);

    // standard normal via Box-Muller; no state carried across calls
    double gauss();

    // categorical draw over nonnegative weights; throws InvalidWeights
    std::size_t categorical(const std::vector<double>& weights);

    std::string serialize() const;
    void deserialize(const std::string& state);

  private:
    std::mt19937_64 engine_;
};

} // namespace viewflow

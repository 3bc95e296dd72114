// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "viewflow/errors.hpp"

namespace viewflow {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidParams("uniform_index: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
}

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) throw InvalidParams("uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) -
                                                 static_cast<std::int64_t>(lo) + 1);
    return lo + static_cast<int>(uniform_index(span));
}

double Rng::gauss() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw InvalidWeights("categorical: negative or non-finite weight");
        total += w;
    }
    if (total <= 0.0) throw InvalidWeights("categorical: weights sum to zero");
    const double r = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (r < acc) return i;
    }
    return weights.size() - 1;
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::deserialize(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) throw CheckpointError("Rng::deserialize: malformed engine state");
}

} // namespace viewflow

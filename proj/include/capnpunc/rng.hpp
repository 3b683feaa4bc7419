// Copyright 2026 The capnpunc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace capnpunc {

// Single source of randomness for a run. Every draw (parameter init, epoch
// shuffles, dropout masks) goes through one instance seeded from --seed, in
// a fixed order, so two runs with the same seed are bit-identical.
//
// The transforms below are hand-rolled instead of <random> distributions
// because distribution output is implementation-defined; mt19937_64 itself
// is pinned by the standard.
class Rng {
   public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    void reseed(uint64_t seed) { engine_.seed(seed); }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at our scales and
    // keeps the draw portable.
    uint64_t below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // Fisher-Yates, descending, one draw per swap.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace capnpunc

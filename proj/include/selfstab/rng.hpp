// Copyright 2026 The selfstab Authors
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

#include <cmath>
#include <cstdint>
#include <random>

namespace selfstab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of trajectory `index` in an ensemble driven by `master`.
inline uint64_t derive_seed(uint64_t master, uint64_t index) { return mix64(mix64(master) ^ mix64(index + 1)); }

/// Draws Wiener increments with variance dt.
class WienerSource {
  public:
    WienerSource(Rng &rng, double dt) : rng_(rng), dist_(0.0, std::sqrt(dt)) {}
    double operator()() { return dist_(rng_); }

  private:
    Rng &rng_;
    std::normal_distribution<double> dist_;
};

}  // namespace selfstab

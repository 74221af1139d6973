// Copyright 2026 The xcboard Authors.
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

// Portable seeded randomness. Every draw in the system goes through the
// arithmetic below so results are reproducible in any language:
//
//   next():   state += 0x9E3779B97F4A7C15
//             z = state
//             z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//             return z ^ (z >> 31)                      (all mod 2^64)
//
//   below(b): threshold = (2^64 - b) mod b
//             repeat r = next() until r >= threshold; return r mod b
//
//   prefix shuffle of k out of n: idx = [0, n)
//             for i in [0, k): j = i + below(n - i); swap(idx[i], idx[j])
//             return idx[0, k)

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace xc {

struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(const Seed&, const Seed&) = default;
};

class SplitMix64 {
 public:
  explicit SplitMix64(Seed seed) : state_(seed.value) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below(0)");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// First `k` positions of a Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> shuffled_prefix(SplitMix64& rng, std::size_t n,
                                                std::size_t k) {
  if (k > n) throw std::invalid_argument("prefix longer than range");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace xc

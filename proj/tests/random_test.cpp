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

#include "xc/random.hpp"

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

namespace xc {
namespace {

// Reference outputs for seed 0 (also reproduced by tests/oracles/sampler_oracle.py).
TEST(SplitMix64, MatchesReferenceStream) {
  SplitMix64 rng(Seed{0});
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(SplitMix64, BelowStaysInRange) {
  SplitMix64 rng(Seed{99});
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 31ULL, 1000ULL, (1ULL << 63) + 5}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(rng.below(bound), bound);
  }
  EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(ShuffledPrefix, FullPrefixIsPermutation) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    SplitMix64 rng(Seed{s});
    auto idx = shuffled_prefix(rng, 17, 17);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);
  }
}

TEST(ShuffledPrefix, PrefixIsConsistentWithLongerDraw) {
  SplitMix64 a(Seed{5});
  SplitMix64 b(Seed{5});
  const auto short_draw = shuffled_prefix(a, 40, 3);
  const auto long_draw = shuffled_prefix(b, 40, 10);
  EXPECT_TRUE(std::equal(short_draw.begin(), short_draw.end(), long_draw.begin()));
}

TEST(ShuffledPrefix, RejectsOversizedPrefix) {
  SplitMix64 rng(Seed{1});
  EXPECT_THROW(shuffled_prefix(rng, 3, 4), std::invalid_argument);
}

}  // namespace
}  // namespace xc

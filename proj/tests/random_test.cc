//
// Copyright 2026 The fedcert Authors
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
//

#include "fedcert/random.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "gtest/gtest.h"

namespace fedcert {
namespace {

TEST(DeriveSeedTest, LabelsSeparateStreams) {
  EXPECT_EQ(DeriveSeed(7, {1, 2, 3}), DeriveSeed(7, {1, 2, 3}));
  EXPECT_NE(DeriveSeed(7, {1, 2, 3}), DeriveSeed(7, {1, 3, 2}));
  EXPECT_NE(DeriveSeed(7, {1, 2, 3}), DeriveSeed(8, {1, 2, 3}));
  EXPECT_NE(DeriveSeed(7, {0}), DeriveSeed(7, {}));
}

TEST(DeriveSeedTest, IsConstexpr) {
  static_assert(DeriveSeed(1, {2}) == DeriveSeed(1, {2}));
  SUCCEED();
}

TEST(SampleWithoutReplacementTest, SortedDistinctInRange) {
  Rng rng(3);
  for (size_t count : {0u, 1u, 5u, 20u}) {
    auto s = SampleWithoutReplacement(20, count, rng);
    ASSERT_EQ(s.size(), count);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<size_t>(s.begin(), s.end()).size(), count);
    for (size_t i : s) EXPECT_LT(i, 20u);
  }
}

TEST(SampleWithoutReplacementTest, RoughlyUniform) {
  Rng rng(11);
  std::vector<int> hits(10, 0);
  for (int t = 0; t < 20000; ++t) {
    for (size_t i : SampleWithoutReplacement(10, 3, rng)) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h, 6000, 300);
}

TEST(NormalSamplerTest, Moments) {
  Rng rng(5);
  NormalSampler normal;
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = normal(rng);
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(ShuffleTest, IsPermutation) {
  Rng rng(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  Shuffle(v, rng);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

}  // namespace
}  // namespace fedcert

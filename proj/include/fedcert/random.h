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

#ifndef FEDCERT_RANDOM_H_
#define FEDCERT_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedcert {

// SplitMix64 finalizer. Stable across platforms; used for all seed
// derivation so that streams do not depend on library RNG internals.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a sequence of stream labels.
// DeriveSeed(s, {a, b}) != DeriveSeed(s, {b, a}) in general.
constexpr uint64_t DeriveSeed(uint64_t seed, std::initializer_list<uint64_t> labels) {
  uint64_t h = Mix64(seed);
  for (uint64_t label : labels) h = Mix64(h ^ Mix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

// Stream labels. Each consumer of randomness draws from its own stream so
// that, e.g., changing the noise level does not perturb user sampling.
enum class Stream : uint64_t {
  kUserSampling = 1,
  kLocalBatches = 2,
  kServerNoise = 3,
  kLocalNoise = 4,
  kData = 5,
  kPartition = 6,
  kInit = 7,
};

inline Rng MakeRng(uint64_t seed, Stream stream, uint64_t round = 0,
                   uint64_t user = 0) {
  return Rng(DeriveSeed(seed, {static_cast<uint64_t>(stream), round, user}));
}

// Uniform sample of `count` distinct indices from [0, n), returned in
// ascending order. Partial Fisher-Yates over an index table.
std::vector<size_t> SampleWithoutReplacement(size_t n, size_t count, Rng& rng);

// In-place Fisher-Yates using only rng() outputs, so results do not depend
// on the standard library's distribution implementations.
template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// Standard normal via Box-Muller over 53-bit uniforms.
class NormalSampler {
 public:
  double operator()(Rng& rng);

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedcert

#endif  // FEDCERT_RANDOM_H_

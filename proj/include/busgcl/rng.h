// Copyright 2026 The BusGCL Authors.
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

#ifndef BUSGCL_RNG_H_
#define BUSGCL_RNG_H_

#include <cstdint>
#include <random>

namespace busgcl {

using Rng = std::mt19937_64;

// Purposes that own an independent random stream. New purposes must be
// appended so existing streams keep their draws.
enum class Stream : uint64_t {
  kSplit = 1,
  kInit = 2,
  kNegatives = 3,
  kNoise = 4,
  kMasks = 5,
  kProjection = 6,
  kGradCheck = 7,
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based derivation: (run seed, purpose, counter) -> generator. The
// counter is typically an epoch or step index.
inline Rng make_stream(uint64_t seed, Stream purpose, uint64_t counter = 0) {
  uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<uint64_t>(purpose));
  h = splitmix64(h ^ counter);
  return Rng(h);
}

// Uniform double in [0, 1) that does not depend on the standard library's
// distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection on the top bits.
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace busgcl

#endif  // BUSGCL_RNG_H_

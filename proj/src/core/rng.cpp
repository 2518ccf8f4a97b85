// Copyright 2026 The HSMC Authors.
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

#include "hsmc/core/rng.hpp"

#include <cmath>

namespace hsmc {
namespace {

// Stafford's "mix13" finalizer: a bijective 64-bit mixer with good
// avalanche, the same one used by splitmix64.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint32_t time,
                     std::uint32_t particle, RngPurpose purpose)
    : seed_(seed) {
  // Pack the key so that (time, particle, purpose) triples never collide
  // for time < 2^28 and particle < 2^28.
  key_ = (static_cast<std::uint64_t>(purpose) << 56) ^
         (static_cast<std::uint64_t>(particle & 0x0FFFFFFFu) << 28) ^
         static_cast<std::uint64_t>(time & 0x0FFFFFFFu);
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t base = mix64(mix64(seed_ + kGolden) ^ mix64(key_ + 2 * kGolden));
  std::uint64_t out = mix64(base ^ (counter_ * kGolden + kGolden));
  ++counter_;
  return out;
}

double RngStream::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are unreachable.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vec RngStream::normal_vec(int n) {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = normal();
  return out;
}

}  // namespace hsmc

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

#ifndef HSMC_CORE_RNG_HPP
#define HSMC_CORE_RNG_HPP

#include <cstdint>

#include "hsmc/core/types.hpp"

namespace hsmc {

/// What a random stream is consumed for. Streams with distinct purposes are
/// statistically independent, so adding draws on one stream (e.g. momenta)
/// never shifts another (e.g. transition noise). Particle filters rely on
/// this to keep runs comparable across configurations.
enum class RngPurpose : std::uint32_t {
  kParamInit = 1,
  kInitState = 2,
  kTransition = 3,
  kMomentum = 4,
  kResample = 5,
  kEmissionNoise = 6,
  kProcessNoise = 7,
  kProposal = 8,
  kMetropolis = 9,
  kGeneric = 10,
};

/// Counter-based random stream: the n-th draw is a pure function of
/// (seed, key, n). Copying a stream replays it; two streams with distinct
/// keys are independent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t time, std::uint32_t particle,
            RngPurpose purpose);

  /// Stream with the same identity but counter reset to zero.
  RngStream rewound() const { RngStream s(*this); s.counter_ = 0; return s; }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform();
  /// Standard normal via Box-Muller (consumes two uniforms per draw).
  double normal();
  Vec normal_vec(int n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hsmc

#endif  // HSMC_CORE_RNG_HPP

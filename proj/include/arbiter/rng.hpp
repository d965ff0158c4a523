// Copyright 2026 The Arbiter Authors
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

#ifndef ARBITER_RNG_HPP_
#define ARBITER_RNG_HPP_

#include <cstdint>

namespace arbiter {

// Counter-based stream built on splitmix64. Substreams are derived by
// hashing (root seed, label) so that parallel consumers can draw from
// independent streams and results stay reproducible for a given master
// seed regardless of scheduling:
//   substream(label).seed = mix(mix(root) ^ (label + GOLDEN))
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed), root_(seed) {}

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_double();

  // Index drawn from the (unnormalized ok) weight array. Walks the CDF;
  // any residual mass from rounding goes to the last positive entry.
  int categorical(const double* w, int n);

  RngStream substream(std::uint64_t label) const;

  std::uint64_t root_seed() const { return root_; }

 private:
  std::uint64_t state_;
  std::uint64_t root_;
};

}  // namespace arbiter

#endif  // ARBITER_RNG_HPP_

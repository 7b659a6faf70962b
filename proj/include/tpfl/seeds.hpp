/*
 * Copyright 2026 The TPFL Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TPFL_SEEDS_HPP_
#define TPFL_SEEDS_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace tpfl {

using Rng = std::mt19937_64;

// Splittable seed derivation: a child seed is SplitMix64 of the parent mixed
// with either a stream name (FNV-1a) or an integer index. Children of distinct
// names are independent, so adding a consumer never shifts another stream.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

// Named streams expanded from a run's master seed.
struct SeedStreams {
  std::uint64_t data;       // class prototypes
  std::uint64_t noise;      // per-sample pixel noise (train/test split further)
  std::uint64_t partition;  // label-skew class permutation and sample picks
  std::uint64_t init;       // initial prompt values
  std::uint64_t sampling;   // per-round client sampling
  std::uint64_t patch;      // random-patch offsets (split per client)
  std::uint64_t encoder;    // frozen encoder weights and class embeddings

  static SeedStreams from_master(std::uint64_t master);
};

}  // namespace tpfl

#endif  // TPFL_SEEDS_HPP_

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

#ifndef TPFL_DATA_HPP_
#define TPFL_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "tpfl/losses.hpp"
#include "tpfl/tensor.hpp"

namespace tpfl {

enum class Split { kTrain, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct Dataset {
  Tensor images = Tensor({0, 1, 1, 1});  // [N, H, W, Ch]
  std::vector<std::uint32_t> labels;
  std::size_t class_count = 0;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;  // generator provenance

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const;
  Shape image_shape() const;

  // Flattened [B, H*W*Ch] batch of the given samples.
  Batch gather(std::span<const std::size_t> indices) const;
  Batch all() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t per_class = 16;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  double noise_sigma = 0.1;
};

// Largest absolute pixel value of any prototype.
inline constexpr double kPrototypeBound = 1.0;

// Smooth low-frequency class patterns, [C, H, W, Ch], scaled so the largest
// magnitude is exactly kPrototypeBound.
Tensor make_prototypes(std::uint64_t seed, std::size_t classes, std::size_t height,
                       std::size_t width, std::size_t channels);

// Each sample is its class prototype plus N(0, sigma^2) pixel noise, clipped
// to +-(kPrototypeBound + 6 sigma). Samples are ordered class by class. The
// split selects a disjoint noise stream, so train and test never coincide.
Dataset generate_synthetic(std::uint64_t prototype_seed, std::uint64_t noise_seed,
                           const SyntheticSpec& spec, Split split);
Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec,
                           Split split = Split::kTrain);

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> assignments;  // per client sample indices
  std::vector<std::vector<std::uint32_t>> client_classes;
  std::size_t classes_per_client = 0;
  std::size_t shots = 0;

  std::size_t clients() const { return assignments.size(); }
};

// Class-shard label skew: client i takes `classes_per_client` consecutive
// slots of a seeded class permutation repeated round-robin, then `shots`
// distinct samples of each of its classes.
PartitionPlan partition_label_skew(const Dataset& dataset, std::size_t clients,
                                   std::size_t classes_per_client, std::size_t shots,
                                   std::uint64_t seed);

// Number of samples per class the plan above needs in the worst case.
std::size_t required_per_class(std::size_t classes, std::size_t clients,
                               std::size_t classes_per_client, std::size_t shots);

inline constexpr int kDatasetFormatVersion = 1;

// Directory with manifest.json, images.f64 and labels.u32 (little-endian).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace tpfl

#endif  // TPFL_DATA_HPP_

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

#include "tpfl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "tpfl/error.hpp"
#include "tpfl/seeds.hpp"

namespace tpfl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kPrototypeComponents = 4;
constexpr int kMaxFrequency = 2;

template <typename Word>
void put_le(std::string& out, Word w) {
  for (std::size_t i = 0; i < sizeof(Word); ++i) {
    out.push_back(static_cast<char>((w >> (8 * i)) & 0xffu));
  }
}

template <typename Word>
Word get_le(const std::string& in, std::size_t pos) {
  Word w = 0;
  for (std::size_t i = 0; i < sizeof(Word); ++i) {
    w |= static_cast<Word>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return w;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataFormatError("short write to " + path.string());
}

template <typename T>
T manifest_field(const json& m, const char* key) {
  if (!m.contains(key)) throw DataFormatError(std::string("manifest: missing field '") + key + "'");
  try {
    return m.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("manifest: field '") + key + "' has wrong type: " + e.what());
  }
}

// The blob entries are fixed by format version 1; anything else is a file
// this reader cannot interpret.
void check_blob(const json& m, const char* key, const char* file, const char* dtype) {
  const json entry = manifest_field<json>(m, key);
  if (!entry.is_object()) {
    throw DataFormatError(std::string("manifest: field '") + key + "' must be an object");
  }
  const auto f = manifest_field<std::string>(entry, "file");
  const auto d = manifest_field<std::string>(entry, "dtype");
  if (f != file || d != dtype) {
    throw DataFormatError(std::string("manifest: ") + key + " must be " + file + " (" + dtype +
                          "), got " + f + " (" + d + ")");
  }
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::kTest ? "test" : "train"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw DataFormatError("unknown split '" + std::string(name) + "'");
}

std::size_t Dataset::sample_size() const {
  const Shape& s = images.shape();
  return s[1] * s[2] * s[3];
}

Shape Dataset::image_shape() const {
  const Shape& s = images.shape();
  return {s[1], s[2], s[3]};
}

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t n = sample_size();
  Batch batch{Tensor({indices.size(), n}), {}};
  batch.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t idx = indices[r];
    if (idx >= size()) {
      throw DomainError("dataset: sample index " + std::to_string(idx) + " out of range");
    }
    std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(idx * n), n,
                batch.images.data().begin() + static_cast<std::ptrdiff_t>(r * n));
    batch.labels.push_back(labels[idx]);
  }
  return batch;
}

Batch Dataset::all() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather(idx);
}

Tensor make_prototypes(std::uint64_t seed, std::size_t classes, std::size_t height,
                       std::size_t width, std::size_t channels) {
  Tensor protos({classes, height, width, channels});
  const std::size_t n = height * width * channels;
  std::normal_distribution<double> amp(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> freq(0, kMaxFrequency);
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(derive_seed(seed, c));
    double* img = protos.data().data() + c * n;
    for (std::size_t k = 0; k < channels; ++k) {
      for (int comp = 0; comp < kPrototypeComponents; ++comp) {
        int fy = 0, fx = 0;
        while (fy == 0 && fx == 0) {
          fy = freq(rng);
          fx = freq(rng);
        }
        const double a = amp(rng);
        const double ph = phase(rng);
        for (std::size_t r = 0; r < height; ++r)
          for (std::size_t col = 0; col < width; ++col) {
            const double arg = 2.0 * std::numbers::pi *
                                   (fy * static_cast<double>(r) / static_cast<double>(height) +
                                    fx * static_cast<double>(col) / static_cast<double>(width)) +
                               ph;
            img[(r * width + col) * channels + k] += a * std::cos(arg);
          }
      }
    }
    double peak = 0.0;
    for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, std::abs(img[j]));
    if (peak > 0.0) {
      for (std::size_t j = 0; j < n; ++j) img[j] *= kPrototypeBound / peak;
    }
  }
  return protos;
}

Dataset generate_synthetic(std::uint64_t prototype_seed, std::uint64_t noise_seed,
                           const SyntheticSpec& spec, Split split) {
  if (spec.classes < 2) throw DomainError("generate_synthetic: need at least 2 classes");
  if (spec.per_class < 1) throw DomainError("generate_synthetic: per_class must be >= 1");
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    throw ShapeError("generate_synthetic: zero image extent");
  }
  if (!(spec.noise_sigma >= 0.0)) throw DomainError("generate_synthetic: negative noise sigma");
  const Tensor protos =
      make_prototypes(prototype_seed, spec.classes, spec.height, spec.width, spec.channels);
  const std::size_t n = spec.height * spec.width * spec.channels;
  const std::size_t total = spec.classes * spec.per_class;
  Dataset ds;
  ds.images = Tensor({total, spec.height, spec.width, spec.channels});
  ds.labels.reserve(total);
  ds.class_count = spec.classes;
  ds.split = split;
  ds.seed = prototype_seed;
  const double bound = kPrototypeBound + 6.0 * spec.noise_sigma;
  Rng rng(derive_seed(noise_seed, split_name(split)));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t s = 0; s < spec.per_class; ++s) {
      const std::size_t row = c * spec.per_class + s;
      for (std::size_t j = 0; j < n; ++j) {
        double v = protos[c * n + j];
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
        ds.images[row * n + j] = std::clamp(v, -bound, bound);
      }
      ds.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return ds;
}

Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec, Split split) {
  return generate_synthetic(derive_seed(seed, "data"), derive_seed(seed, "noise"), spec, split);
}

std::size_t required_per_class(std::size_t classes, std::size_t clients,
                               std::size_t classes_per_client, std::size_t shots) {
  if (classes == 0) return 0;
  const std::size_t slots = clients * classes_per_client;
  return ((slots + classes - 1) / classes) * shots;
}

PartitionPlan partition_label_skew(const Dataset& dataset, std::size_t clients,
                                   std::size_t classes_per_client, std::size_t shots,
                                   std::uint64_t seed) {
  const std::size_t classes = dataset.class_count;
  if (clients == 0) throw PartitionError("partition: need at least one client");
  if (classes_per_client == 0 || classes_per_client > classes) {
    throw PartitionError("partition: classes per client " + std::to_string(classes_per_client) +
                         " must be in [1, " + std::to_string(classes) + "]");
  }
  if (shots == 0) throw PartitionError("partition: shots must be >= 1");

  Rng rng(seed);
  std::vector<std::uint32_t> perm(classes);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);

  PartitionPlan plan;
  plan.classes_per_client = classes_per_client;
  plan.shots = shots;
  plan.assignments.resize(clients);
  plan.client_classes.resize(clients);
  for (std::size_t i = 0; i < clients; ++i) {
    for (std::size_t k = 0; k < classes_per_client; ++k) {
      plan.client_classes[i].push_back(perm[(i * classes_per_client + k) % classes]);
    }
  }

  std::vector<std::vector<std::size_t>> pool(classes);
  for (std::size_t idx = 0; idx < dataset.size(); ++idx) pool[dataset.labels[idx]].push_back(idx);
  std::vector<std::size_t> demand(classes, 0);
  for (const auto& cls : plan.client_classes)
    for (std::uint32_t c : cls) demand[c] += shots;
  for (std::size_t c = 0; c < classes; ++c) {
    if (demand[c] > pool[c].size()) {
      throw PartitionError("partition: class " + std::to_string(c) + " needs " +
                           std::to_string(demand[c]) + " samples but only " +
                           std::to_string(pool[c].size()) + " are available");
    }
    std::shuffle(pool[c].begin(), pool[c].end(), rng);
  }

  std::vector<std::size_t> cursor(classes, 0);
  for (std::size_t i = 0; i < clients; ++i) {
    for (std::uint32_t c : plan.client_classes[i]) {
      for (std::size_t s = 0; s < shots; ++s) plan.assignments[i].push_back(pool[c][cursor[c]++]);
    }
  }
  return plan;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataFormatError("cannot create " + dir.string() + ": " + ec.message());
  if (dataset.images.rank() != 4 || dataset.images.extent(0) != dataset.labels.size()) {
    throw ShapeError("save_dataset: images " + shape_string(dataset.images.shape()) + " vs " +
                     std::to_string(dataset.labels.size()) + " labels");
  }
  json manifest = {
      {"version", kDatasetFormatVersion},
      {"shape", dataset.images.shape()},
      {"class_count", dataset.class_count},
      {"split", std::string(split_name(dataset.split))},
      {"seed", dataset.seed},
      {"images", {{"file", "images.f64"}, {"dtype", "float64-le"}}},
      {"labels", {{"file", "labels.u32"}, {"dtype", "uint32-le"}}},
  };
  std::string image_bytes;
  image_bytes.reserve(dataset.images.size() * 8);
  for (double v : dataset.images.data()) put_le(image_bytes, std::bit_cast<std::uint64_t>(v));
  std::string label_bytes;
  label_bytes.reserve(dataset.labels.size() * 4);
  for (std::uint32_t l : dataset.labels) put_le(label_bytes, l);
  write_file(dir / "images.f64", image_bytes);
  write_file(dir / "labels.u32", label_bytes);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    // parse_error, or out_of_range for numbers beyond double range
    throw DataFormatError(std::string("manifest: malformed JSON: ") + e.what());
  }
  if (!manifest.is_object()) throw DataFormatError("manifest: top level must be an object");
  const int version = manifest_field<int>(manifest, "version");
  if (version != kDatasetFormatVersion) {
    throw DataFormatError("manifest: unsupported version " + std::to_string(version));
  }
  const auto extents = manifest_field<std::vector<json>>(manifest, "shape");
  Shape shape;
  for (const json& e : extents) {
    if (!e.is_number_unsigned()) {
      throw DataFormatError("manifest: shape extents must be non-negative integers, got " +
                            e.dump());
    }
    shape.push_back(e.get<std::size_t>());
  }
  if (shape.size() != 4) {
    throw DataFormatError("manifest: shape must have 4 extents [N,H,W,Ch], got " +
                          shape_string(shape));
  }
  if (shape[1] == 0 || shape[2] == 0 || shape[3] == 0) {
    throw DataFormatError("manifest: zero image extent in " + shape_string(shape));
  }
  std::size_t values = 1;
  for (std::size_t e : shape) {
    if (e != 0 && values > std::numeric_limits<std::size_t>::max() / 8 / e) {
      throw DataFormatError("manifest: shape " + shape_string(shape) + " is too large");
    }
    values *= e;
  }
  check_blob(manifest, "images", "images.f64", "float64-le");
  check_blob(manifest, "labels", "labels.u32", "uint32-le");
  Dataset ds;
  ds.class_count = manifest_field<std::size_t>(manifest, "class_count");
  ds.split = parse_split(manifest_field<std::string>(manifest, "split"));
  ds.seed = manifest_field<std::uint64_t>(manifest, "seed");

  const std::size_t n = shape[0];
  const std::string image_bytes = read_file(dir / "images.f64");
  if (image_bytes.size() != values * 8) {
    throw DataFormatError("images.f64: manifest shape " + shape_string(shape) + " needs " +
                          std::to_string(values * 8) + " bytes, found " +
                          std::to_string(image_bytes.size()));
  }
  const std::string label_bytes = read_file(dir / "labels.u32");
  if (label_bytes.size() != n * 4) {
    throw DataFormatError("labels.u32: manifest declares " + std::to_string(n) +
                          " samples (" + std::to_string(n * 4) + " bytes), found " +
                          std::to_string(label_bytes.size()));
  }
  std::vector<double> data(values);
  for (std::size_t i = 0; i < values; ++i) {
    data[i] = std::bit_cast<double>(get_le<std::uint64_t>(image_bytes, i * 8));
  }
  ds.images = Tensor(shape, std::move(data));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = get_le<std::uint32_t>(label_bytes, i * 4);
    if (ds.labels[i] >= ds.class_count) {
      throw DataFormatError("labels.u32: label " + std::to_string(ds.labels[i]) + " at index " +
                            std::to_string(i) + " exceeds class_count " +
                            std::to_string(ds.class_count));
    }
  }
  return ds;
}

}  // namespace tpfl

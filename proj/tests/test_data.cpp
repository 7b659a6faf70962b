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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "tpfl/data.hpp"
#include "tpfl/error.hpp"

namespace tpfl {
namespace {

namespace fs = std::filesystem;

SyntheticSpec spec(std::size_t classes, std::size_t per_class, double sigma) {
  SyntheticSpec s;
  s.classes = classes;
  s.per_class = per_class;
  s.noise_sigma = sigma;
  return s;
}

TEST(SyntheticTest, ZeroNoiseReproducesPrototypes) {
  const Dataset ds = generate_synthetic(3, spec(4, 5, 0.0));
  const Tensor protos = make_prototypes(derive_seed(3, "data"), 4, 16, 16, 1);
  ASSERT_EQ(ds.size(), 20u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t c = ds.labels[i];
    for (std::size_t j = 0; j < 256; ++j) EXPECT_EQ(ds.images[i * 256 + j], protos[c * 256 + j]);
  }
}

TEST(SyntheticTest, PrototypesPeakAtBoundAndDiffer) {
  const Tensor protos = make_prototypes(11, 8, 16, 16, 2);
  for (std::size_t c = 0; c < 8; ++c) {
    double peak = 0.0;
    for (std::size_t j = 0; j < 512; ++j) peak = std::max(peak, std::abs(protos[c * 512 + j]));
    EXPECT_NEAR(peak, kPrototypeBound, 1e-12);
  }
  EXPECT_NE(make_prototypes(11, 8, 16, 16, 2), make_prototypes(12, 8, 16, 16, 2));
}

TEST(SyntheticTest, DeterministicAndSplitsDiffer) {
  const Dataset a = generate_synthetic(5, spec(8, 4, 0.3));
  EXPECT_EQ(a, generate_synthetic(5, spec(8, 4, 0.3)));
  const Dataset test = generate_synthetic(5, spec(8, 4, 0.3), Split::kTest);
  EXPECT_EQ(test.labels, a.labels);
  EXPECT_NE(test.images, a.images);
  EXPECT_EQ(test.split, Split::kTest);
}

TEST(SyntheticTest, PixelsAreBounded) {
  for (double sigma : {0.1, 0.5, 2.0}) {
    const Dataset ds = generate_synthetic(7, spec(8, 20, sigma));
    const double bound = kPrototypeBound + 6.0 * sigma;
    for (double v : ds.images.data()) ASSERT_LE(std::abs(v), bound);
  }
}

TEST(SyntheticTest, NearestPrototypeSeparatesLowNoiseData) {
  const Dataset ds = generate_synthetic(21, spec(8, 64, 0.1), Split::kTest);
  const Tensor protos = make_prototypes(derive_seed(21, "data"), 8, 16, 16, 1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < 8; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 256; ++j) {
        const double diff = ds.images[i * 256 + j] - protos[c * 256 + j];
        d += diff * diff;
      }
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == ds.labels[i];
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(ds.size()), 0.99);
}

TEST(SyntheticTest, RejectsBadSpecs) {
  EXPECT_THROW(generate_synthetic(1, spec(1, 4, 0.1)), DomainError);
  EXPECT_THROW(generate_synthetic(1, spec(4, 0, 0.1)), DomainError);
  EXPECT_THROW(generate_synthetic(1, spec(4, 4, -0.1)), DomainError);
}

TEST(DatasetTest, GatherFlattensRows) {
  const Dataset ds = generate_synthetic(2, spec(3, 2, 0.2));
  const std::vector<std::size_t> idx{5, 0};
  const Batch b = ds.gather(idx);
  EXPECT_EQ(b.images.shape(), (Shape{2, 256}));
  EXPECT_EQ(b.labels, (std::vector<std::uint32_t>{2, 0}));
  for (std::size_t j = 0; j < 256; ++j) EXPECT_EQ(b.images[j], ds.images[5 * 256 + j]);
  const std::vector<std::size_t> bad{6};
  EXPECT_THROW(ds.gather(bad), DomainError);
}

std::vector<std::size_t> histogram(const Dataset& ds, const std::vector<std::size_t>& idx,
                                   std::size_t classes) {
  std::vector<std::size_t> h(classes, 0);
  for (std::size_t i : idx) ++h[ds.labels[i]];
  return h;
}

TEST(PartitionTest, RoundRobinCoversEveryClassOnce) {
  const Dataset ds = generate_synthetic(4, spec(10, 3, 0.1));
  const PartitionPlan plan = partition_label_skew(ds, 5, 2, 3, 99);
  std::vector<int> owners(10, 0);
  for (const auto& cls : plan.client_classes)
    for (auto c : cls) ++owners[c];
  for (int o : owners) EXPECT_EQ(o, 1);
}

TEST(PartitionTest, FullSkewIsIidByLabel) {
  const Dataset ds = generate_synthetic(4, spec(6, 12, 0.1));
  const PartitionPlan plan = partition_label_skew(ds, 3, 6, 4, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(histogram(ds, plan.assignments[i], 6), std::vector<std::size_t>(6, 4));
  }
}

TEST(PartitionTest, HistogramsAndDisjointnessHoldForRandomPlans) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t classes = testing::uniform_size(rng, 2, 10);
    const std::size_t clients = testing::uniform_size(rng, 1, 12);
    const std::size_t s = testing::uniform_size(rng, 1, classes);
    const std::size_t shots = testing::uniform_size(rng, 1, 5);
    const std::size_t per_class = required_per_class(classes, clients, s, shots);
    const Dataset ds = generate_synthetic(seed, spec(classes, per_class, 0.1));
    const PartitionPlan plan = partition_label_skew(ds, clients, s, shots, seed);
    ASSERT_EQ(plan.clients(), clients);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (std::size_t i = 0; i < clients; ++i) {
      const auto h = histogram(ds, plan.assignments[i], classes);
      EXPECT_EQ(static_cast<std::size_t>(std::count_if(h.begin(), h.end(),
                                                       [](std::size_t v) { return v > 0; })),
                s);
      for (std::size_t v : h) EXPECT_TRUE(v == 0 || v == shots);
      for (auto c : plan.client_classes[i]) EXPECT_EQ(h[c], shots);
      seen.insert(plan.assignments[i].begin(), plan.assignments[i].end());
      total += plan.assignments[i].size();
    }
    EXPECT_EQ(seen.size(), total) << "duplicate sample across clients, seed " << seed;
    if (clients * s >= classes) {
      std::set<std::uint32_t> covered;
      for (const auto& cls : plan.client_classes) covered.insert(cls.begin(), cls.end());
      EXPECT_EQ(covered.size(), classes);
    }
    // Deterministic in its inputs.
    EXPECT_EQ(plan.assignments, partition_label_skew(ds, clients, s, shots, seed).assignments);
  }
}

TEST(PartitionTest, ShortfallNamesTheClass) {
  const Dataset ds = generate_synthetic(4, spec(4, 3, 0.1));
  try {
    partition_label_skew(ds, 4, 2, 2, 0);
    FAIL() << "expected PartitionError";
  } catch (const PartitionError& e) {
    EXPECT_NE(std::string(e.what()).find("class "), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("needs 4"), std::string::npos);
  }
  EXPECT_THROW(partition_label_skew(ds, 2, 5, 1, 0), PartitionError);
  EXPECT_THROW(partition_label_skew(ds, 0, 1, 1, 0), PartitionError);
}

TEST(PartitionTest, RequiredPerClassIsTight) {
  EXPECT_EQ(required_per_class(8, 10, 2, 4), 12u);  // 20 slots over 8 classes -> 3 owners max
  EXPECT_EQ(required_per_class(8, 100, 2, 4), 100u);
  EXPECT_EQ(required_per_class(10, 5, 2, 3), 3u);
  const Dataset ds = generate_synthetic(4, spec(8, 11, 0.1));
  EXPECT_THROW(partition_label_skew(ds, 10, 2, 4, 0), PartitionError);
}

class DatasetIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    ds_ = generate_synthetic(8, spec(3, 4, 0.7), Split::kTest);
    save_dataset(ds_, dir_);
  }

  nlohmann::json manifest() const {
    std::ifstream in(dir_ / "manifest.json");
    return nlohmann::json::parse(in);
  }

  void write_manifest(const nlohmann::json& m) const {
    std::ofstream(dir_ / "manifest.json") << m.dump();
  }

  void expect_format_error(const std::string& fragment) const {
    try {
      load_dataset(dir_);
      FAIL() << "expected DataFormatError containing '" << fragment << "'";
    } catch (const DataFormatError& e) {
      EXPECT_EQ(e.kind(), "data_format");
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  }

  fs::path dir_;
  Dataset ds_;
};

TEST_F(DatasetIoTest, RoundTripIsBitwise) {
  const Dataset back = load_dataset(dir_);
  EXPECT_EQ(back, ds_);
  EXPECT_EQ(fingerprint(back.images), fingerprint(ds_.images));
}

TEST_F(DatasetIoTest, SpecialValuesSurvive) {
  Dataset odd = ds_;
  odd.images[0] = -0.0;
  odd.images[1] = std::numeric_limits<double>::denorm_min();
  odd.images[2] = std::nextafter(1.0, 2.0);
  save_dataset(odd, dir_);
  EXPECT_EQ(fingerprint(load_dataset(dir_).images), fingerprint(odd.images));
}

TEST_F(DatasetIoTest, EmptyDatasetRoundTrips) {
  Dataset empty;
  empty.images = Tensor({0, 4, 4, 1});
  empty.class_count = 3;
  save_dataset(empty, dir_);
  EXPECT_EQ(load_dataset(dir_), empty);
}

TEST_F(DatasetIoTest, ManifestLayout) {
  const auto m = manifest();
  EXPECT_EQ(m["version"], 1);
  EXPECT_EQ(m["shape"], nlohmann::json::array({12, 16, 16, 1}));
  EXPECT_EQ(m["class_count"], 3);
  EXPECT_EQ(m["split"], "test");
  EXPECT_EQ(m["images"]["dtype"], "float64-le");
  EXPECT_EQ(fs::file_size(dir_ / "images.f64"), 12u * 256u * 8u);
  EXPECT_EQ(fs::file_size(dir_ / "labels.u32"), 12u * 4u);
}

TEST_F(DatasetIoTest, BlobShorterThanManifest) {
  auto m = manifest();
  m["shape"][0] = 13;
  write_manifest(m);
  expect_format_error("images.f64");
}

TEST_F(DatasetIoTest, TruncatedImages) {
  fs::resize_file(dir_ / "images.f64", 100);
  expect_format_error("found 100");
}

TEST_F(DatasetIoTest, TruncatedLabels) {
  fs::resize_file(dir_ / "labels.u32", 8);
  expect_format_error("labels.u32");
}

TEST_F(DatasetIoTest, MalformedJson) {
  std::ofstream(dir_ / "manifest.json") << "{\"version\": 1, ";
  expect_format_error("malformed");
}

TEST_F(DatasetIoTest, NumberOutOfRange) {
  std::ofstream(dir_ / "manifest.json") << R"({"version": 1, "seed": 1e999})";
  expect_format_error("malformed");
}

TEST_F(DatasetIoTest, MissingField) {
  auto m = manifest();
  m.erase("class_count");
  write_manifest(m);
  expect_format_error("class_count");
}

TEST_F(DatasetIoTest, WrongTypes) {
  auto m = manifest();
  m["version"] = "one";
  write_manifest(m);
  expect_format_error("version");
  m = manifest();
  m["version"] = 1;
  m["shape"] = {12, -16, 16, 1};
  write_manifest(m);
  expect_format_error("non-negative");
}

TEST_F(DatasetIoTest, UnsupportedVersionAndDtype) {
  auto m = manifest();
  m["version"] = 2;
  write_manifest(m);
  expect_format_error("version 2");
  m["version"] = 1;
  m["images"]["dtype"] = "float32-le";
  write_manifest(m);
  expect_format_error("float32-le");
}

TEST_F(DatasetIoTest, LabelOutOfRange) {
  auto m = manifest();
  m["class_count"] = 2;
  write_manifest(m);
  expect_format_error("exceeds class_count");
}

TEST_F(DatasetIoTest, AbsurdShapeDoesNotAllocate) {
  auto m = manifest();
  m["shape"] = {1ull << 40, 1ull << 20, 16, 1};
  write_manifest(m);
  expect_format_error("too large");
}

TEST_F(DatasetIoTest, MissingDirectory) {
  fs::remove_all(dir_);
  expect_format_error("cannot open");
}

}  // namespace
}  // namespace tpfl

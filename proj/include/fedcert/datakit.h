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

// Dataset ingestion and partitioning: IDX (MNIST) files, synthetic Gaussian
// blobs, binary class filtering, and splits into per-user local datasets.

#ifndef FEDCERT_DATAKIT_H_
#define FEDCERT_DATAKIT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedcert {

struct LabeledExample {
  std::vector<double> features;
  int label = 0;

  bool operator==(const LabeledExample&) const = default;
};

using Dataset = std::vector<LabeledExample>;

// Raw contents of an IDX image file (magic 2051): `count` images of
// rows x cols unsigned bytes, row-major.
struct IdxImages {
  uint32_t count = 0;
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<uint8_t> pixels;
};

// Raw contents of an IDX label file (magic 2049).
struct IdxLabels {
  std::vector<uint8_t> labels;
};

inline constexpr uint32_t kIdxImageMagic = 2051;
inline constexpr uint32_t kIdxLabelMagic = 2049;

IdxImages ParseIdxImages(std::span<const uint8_t> bytes);
IdxLabels ParseIdxLabels(std::span<const uint8_t> bytes);
std::vector<uint8_t> SerializeIdx(const IdxImages& images);
std::vector<uint8_t> SerializeIdx(const IdxLabels& labels);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes);

// Loads an image/label file pair. Pixel bytes are divided by 255. Throws
// FormatError naming the offending field on bad magic, truncated payload or
// a count mismatch between the two headers.
Dataset LoadIdx(const std::string& images_path, const std::string& labels_path);

// Inverse of LoadIdx for image-shaped data with features in [0, 1]. Feature
// values are rounded to the nearest byte.
void WriteIdx(const Dataset& data, uint32_t rows, uint32_t cols,
              const std::string& images_path, const std::string& labels_path);

// `n` examples from `num_classes` isotropic unit-variance Gaussians in
// `dim` dimensions. Labels are assigned round-robin (example i has class
// i % num_classes). Class means are pairwise at least `separation` apart.
Dataset SynthesizeBlobs(size_t n, size_t dim, int num_classes,
                        double separation, uint64_t seed);

// Class means used by SynthesizeBlobs.
std::vector<std::vector<double>> BlobMeans(size_t dim, int num_classes,
                                           double separation);

// Keeps examples of the two classes, relabelled class_a -> 0, class_b -> 1.
Dataset FilterBinary(const Dataset& data, int class_a, int class_b);

enum class PartitionStrategy { kIid, kLabelShard };

struct Partition {
  std::vector<std::vector<size_t>> users;
  PartitionStrategy strategy = PartitionStrategy::kIid;

  size_t num_users() const { return users.size(); }
};

// Shuffles [0, n) and deals it into `num_users` contiguous chunks whose
// sizes differ by at most one; the first n % num_users users get the extra
// example.
Partition PartitionIid(size_t n, size_t num_users, uint64_t seed);

// Sorts indices by label, cuts them into num_users * shards_per_user shards
// and hands each user a random set of shards.
Partition PartitionByLabelShard(const Dataset& data, size_t num_users,
                                size_t shards_per_user, uint64_t seed);

Dataset Subset(const Dataset& data, std::span<const size_t> indices);

// Number of distinct classes assuming labels are 0..C-1.
int NumClasses(const Dataset& data);

}  // namespace fedcert

#endif  // FEDCERT_DATAKIT_H_

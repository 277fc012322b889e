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

#include "fedcert/datakit.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedcert/errors.h"
#include "fedcert/random.h"

namespace fedcert {
namespace {

uint32_t ReadBigEndian32(std::span<const uint8_t> bytes, size_t offset,
                         const char* field) {
  if (bytes.size() < offset + 4) {
    throw FormatError(std::string("truncated IDX header: missing ") + field);
  }
  return (uint32_t{bytes[offset]} << 24) | (uint32_t{bytes[offset + 1]} << 16) |
         (uint32_t{bytes[offset + 2]} << 8) | uint32_t{bytes[offset + 3]};
}

void AppendBigEndian32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

IdxImages ParseIdxImages(std::span<const uint8_t> bytes) {
  const uint32_t magic = ReadBigEndian32(bytes, 0, "magic");
  if (magic != kIdxImageMagic) {
    throw FormatError("bad IDX image magic: expected 2051, got " +
                      std::to_string(magic));
  }
  IdxImages images;
  images.count = ReadBigEndian32(bytes, 4, "image count");
  images.rows = ReadBigEndian32(bytes, 8, "row count");
  images.cols = ReadBigEndian32(bytes, 12, "column count");
  const size_t payload =
      size_t{images.count} * size_t{images.rows} * size_t{images.cols};
  if (bytes.size() - 16 < payload) {
    throw FormatError("truncated IDX image payload: header declares " +
                      std::to_string(payload) + " pixel bytes, file has " +
                      std::to_string(bytes.size() - 16));
  }
  images.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + payload);
  return images;
}

IdxLabels ParseIdxLabels(std::span<const uint8_t> bytes) {
  const uint32_t magic = ReadBigEndian32(bytes, 0, "magic");
  if (magic != kIdxLabelMagic) {
    throw FormatError("bad IDX label magic: expected 2049, got " +
                      std::to_string(magic));
  }
  const uint32_t count = ReadBigEndian32(bytes, 4, "label count");
  if (bytes.size() - 8 < count) {
    throw FormatError("truncated IDX label payload: header declares " +
                      std::to_string(count) + " labels, file has " +
                      std::to_string(bytes.size() - 8));
  }
  IdxLabels labels;
  labels.labels.assign(bytes.begin() + 8, bytes.begin() + 8 + count);
  return labels;
}

std::vector<uint8_t> SerializeIdx(const IdxImages& images) {
  std::vector<uint8_t> out;
  out.reserve(16 + images.pixels.size());
  AppendBigEndian32(out, kIdxImageMagic);
  AppendBigEndian32(out, images.count);
  AppendBigEndian32(out, images.rows);
  AppendBigEndian32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<uint8_t> SerializeIdx(const IdxLabels& labels) {
  std::vector<uint8_t> out;
  out.reserve(8 + labels.labels.size());
  AppendBigEndian32(out, kIdxLabelMagic);
  AppendBigEndian32(out, static_cast<uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Dataset LoadIdx(const std::string& images_path, const std::string& labels_path) {
  const IdxImages images = ParseIdxImages(ReadFileBytes(images_path));
  const IdxLabels labels = ParseIdxLabels(ReadFileBytes(labels_path));
  if (labels.labels.size() != images.count) {
    throw FormatError("count mismatch: image header declares " +
                      std::to_string(images.count) + " images, label header " +
                      std::to_string(labels.labels.size()) + " labels");
  }
  const size_t dim = size_t{images.rows} * images.cols;
  Dataset data(images.count);
  for (size_t i = 0; i < data.size(); ++i) {
    auto& ex = data[i];
    ex.features.resize(dim);
    for (size_t j = 0; j < dim; ++j) {
      ex.features[j] = images.pixels[i * dim + j] / 255.0;
    }
    ex.label = labels.labels[i];
  }
  return data;
}

void WriteIdx(const Dataset& data, uint32_t rows, uint32_t cols,
              const std::string& images_path, const std::string& labels_path) {
  IdxImages images{static_cast<uint32_t>(data.size()), rows, cols, {}};
  IdxLabels labels;
  const size_t dim = size_t{rows} * cols;
  images.pixels.reserve(data.size() * dim);
  for (const auto& ex : data) {
    if (ex.features.size() != dim) {
      throw UsageError("example feature length does not match rows*cols");
    }
    for (double v : ex.features) {
      images.pixels.push_back(
          static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    if (ex.label < 0 || ex.label > 255) {
      throw UsageError("label does not fit in an IDX byte");
    }
    labels.labels.push_back(static_cast<uint8_t>(ex.label));
  }
  WriteFileBytes(images_path, SerializeIdx(images));
  WriteFileBytes(labels_path, SerializeIdx(labels));
}

std::vector<std::vector<double>> BlobMeans(size_t dim, int num_classes,
                                           double separation) {
  std::vector<std::vector<double>> means(num_classes,
                                         std::vector<double>(dim, 0.0));
  if (static_cast<size_t>(num_classes) <= dim) {
    // Scaled basis vectors: |a e_i - a e_j| = a sqrt(2) = separation.
    const double a = separation / std::sqrt(2.0);
    for (int c = 0; c < num_classes; ++c) means[c][c] = a;
  } else {
    for (int c = 0; c < num_classes; ++c) means[c][0] = c * separation;
  }
  return means;
}

Dataset SynthesizeBlobs(size_t n, size_t dim, int num_classes,
                        double separation, uint64_t seed) {
  if (num_classes < 1 || n < static_cast<size_t>(num_classes) || dim < 1 ||
      !(separation > 0.0)) {
    throw ConfigError("SynthesizeBlobs requires n >= C >= 1, d >= 1, separation > 0");
  }
  const auto means = BlobMeans(dim, num_classes, separation);
  Rng rng = MakeRng(seed, Stream::kData);
  NormalSampler normal;
  Dataset data(n);
  for (size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % num_classes);
    data[i].label = label;
    data[i].features.resize(dim);
    for (size_t j = 0; j < dim; ++j) {
      data[i].features[j] = means[label][j] + normal(rng);
    }
  }
  return data;
}

Dataset FilterBinary(const Dataset& data, int class_a, int class_b) {
  Dataset out;
  bool seen_a = false;
  bool seen_b = false;
  for (const auto& ex : data) {
    if (ex.label == class_a) {
      out.push_back({ex.features, 0});
      seen_a = true;
    } else if (ex.label == class_b) {
      out.push_back({ex.features, 1});
      seen_b = true;
    }
  }
  if (!seen_a || !seen_b) {
    throw ConfigError("FilterBinary: class " +
                      std::to_string(seen_a ? class_b : class_a) +
                      " has no examples");
  }
  return out;
}

Partition PartitionIid(size_t n, size_t num_users, uint64_t seed) {
  if (num_users < 1 || num_users > n) {
    throw ConfigError("PartitionIid requires 1 <= N <= |data| (N=" +
                      std::to_string(num_users) + ", |data|=" +
                      std::to_string(n) + ")");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = MakeRng(seed, Stream::kPartition);
  Shuffle(order, rng);

  Partition p;
  p.strategy = PartitionStrategy::kIid;
  p.users.resize(num_users);
  const size_t base = n / num_users;
  const size_t extra = n % num_users;
  size_t cursor = 0;
  for (size_t u = 0; u < num_users; ++u) {
    const size_t size = base + (u < extra ? 1 : 0);
    p.users[u].assign(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
  }
  return p;
}

Partition PartitionByLabelShard(const Dataset& data, size_t num_users,
                                size_t shards_per_user, uint64_t seed) {
  const size_t num_shards = num_users * shards_per_user;
  if (num_users < 1 || shards_per_user < 1 || num_shards > data.size()) {
    throw ConfigError("PartitionByLabelShard requires 1 <= N*shards <= |data|");
  }
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return data[a].label < data[b].label;
  });
  std::vector<size_t> shard_ids(num_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), size_t{0});
  Rng rng = MakeRng(seed, Stream::kPartition);
  Shuffle(shard_ids, rng);

  Partition p;
  p.strategy = PartitionStrategy::kLabelShard;
  p.users.resize(num_users);
  const size_t base = data.size() / num_shards;
  const size_t extra = data.size() % num_shards;
  auto shard_begin = [&](size_t s) { return s * base + std::min(s, extra); };
  for (size_t u = 0; u < num_users; ++u) {
    for (size_t k = 0; k < shards_per_user; ++k) {
      const size_t s = shard_ids[u * shards_per_user + k];
      p.users[u].insert(p.users[u].end(), order.begin() + shard_begin(s),
                        order.begin() + shard_begin(s + 1));
    }
  }
  return p;
}

Dataset Subset(const Dataset& data, std::span<const size_t> indices) {
  Dataset out;
  out.reserve(indices.size());
  for (size_t i : indices) out.push_back(data.at(i));
  return out;
}

int NumClasses(const Dataset& data) {
  int c = 0;
  for (const auto& ex : data) c = std::max(c, ex.label + 1);
  return c;
}

}  // namespace fedcert

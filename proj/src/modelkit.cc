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

#include "fedcert/modelkit.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "fedcert/errors.h"
#include "fedcert/random.h"

namespace fedcert {
namespace {

constexpr char kCheckpointMagic[4] = {'F', 'C', 'K', 'P'};
constexpr uint32_t kCheckpointVersion = 1;

void CheckInput(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw ShapeError("feature length " + std::to_string(x.size()) +
                     " does not match model input size " +
                     std::to_string(params.arch.input_dim));
  }
}

// y = W x + b for a row-major (rows x cols) W.
void Affine(std::span<const double> w, std::span<const double> b,
            std::span<const double> x, std::span<double> y) {
  const size_t cols = x.size();
  for (size_t r = 0; r < y.size(); ++r) {
    double acc = b[r];
    const double* row = w.data() + r * cols;
    for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void SoftmaxInPlace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Forward pass. Fills `hidden` for MLPs and returns the logits.
std::vector<double> Forward(const ModelParams& params, std::span<const double> x,
                            std::vector<double>* hidden) {
  CheckInput(params, x);
  const auto& a = params.arch;
  std::vector<double> logits(a.num_classes);
  if (a.kind == ModelKind::kLogistic) {
    Affine(params.layer(0), params.layer(1), x, logits);
    return logits;
  }
  std::vector<double> h(a.hidden);
  Affine(params.layer(0), params.layer(1), x, h);
  for (double& v : h) v = std::tanh(v);
  Affine(params.layer(2), params.layer(3), h, logits);
  if (hidden != nullptr) *hidden = std::move(h);
  return logits;
}

template <typename T>
void Put(std::vector<uint8_t>& out, T v) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T Get(const char* field) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw FormatError(std::string("truncated checkpoint: missing ") + field);
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string GetString(size_t n, const char* field) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("truncated checkpoint: missing ") + field);
    }
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<LayerView> LayoutFor(const Architecture& arch) {
  const size_t d = arch.input_dim;
  const size_t c = static_cast<size_t>(arch.num_classes);
  std::vector<LayerView> layers;
  if (arch.kind == ModelKind::kLogistic) {
    layers.push_back({"weight", 0, c * d});
    layers.push_back({"bias", c * d, c});
  } else {
    const size_t h = arch.hidden;
    layers.push_back({"hidden.weight", 0, h * d});
    layers.push_back({"hidden.bias", h * d, h});
    layers.push_back({"output.weight", h * d + h, c * h});
    layers.push_back({"output.bias", h * d + h + c * h, c});
  }
  return layers;
}

ModelParams InitParams(const Architecture& arch, uint64_t seed) {
  if (arch.input_dim == 0 || arch.num_classes < 2 ||
      (arch.kind == ModelKind::kMlp && arch.hidden == 0)) {
    throw ConfigError("architecture needs input_dim >= 1, C >= 2 and hidden >= 1 for MLP");
  }
  ModelParams p;
  p.arch = arch;
  p.layers = LayoutFor(arch);
  p.flat.assign(p.layers.back().offset + p.layers.back().length, 0.0);
  if (arch.kind == ModelKind::kMlp) {
    Rng rng = MakeRng(seed, Stream::kInit);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(arch.input_dim + arch.hidden));
    for (size_t i = 0; i < p.layers[0].length; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      p.flat[i] = (2.0 * u - 1.0) * limit;
    }
  }
  return p;
}

std::vector<double> PredictConfidence(const ModelParams& params,
                                      std::span<const double> x) {
  std::vector<double> z = Forward(params, x, nullptr);
  SoftmaxInPlace(z);
  return z;
}

int Predict(const ModelParams& params, std::span<const double> x) {
  const auto conf = PredictConfidence(params, x);
  return static_cast<int>(std::max_element(conf.begin(), conf.end()) -
                          conf.begin());
}

double Loss(const ModelParams& params, const LabeledExample& example) {
  const auto conf = PredictConfidence(params, example.features);
  return -std::log(std::max(conf.at(example.label), kConfidenceFloor));
}

// Gradient of the unclamped cross-entropy; the clamp only bounds the
// reported loss value.
std::vector<double> ExampleGradient(const ModelParams& params,
                                    const LabeledExample& example) {
  const auto& a = params.arch;
  std::vector<double> hidden;
  std::vector<double> dz = Forward(params, example.features, &hidden);
  SoftmaxInPlace(dz);
  dz.at(example.label) -= 1.0;

  std::vector<double> g(params.size(), 0.0);
  const auto& x = example.features;
  const size_t d = a.input_dim;
  if (a.kind == ModelKind::kLogistic) {
    for (int c = 0; c < a.num_classes; ++c) {
      double* row = g.data() + c * d;
      for (size_t j = 0; j < d; ++j) row[j] = dz[c] * x[j];
      g[params.layers[1].offset + c] = dz[c];
    }
    return g;
  }
  const size_t h = a.hidden;
  const auto w2 = params.layer(2);
  double* gw2 = g.data() + params.layers[2].offset;
  double* gb2 = g.data() + params.layers[3].offset;
  std::vector<double> dh(h, 0.0);
  for (int c = 0; c < a.num_classes; ++c) {
    for (size_t k = 0; k < h; ++k) {
      gw2[c * h + k] = dz[c] * hidden[k];
      dh[k] += w2[c * h + k] * dz[c];
    }
    gb2[c] = dz[c];
  }
  double* gw1 = g.data() + params.layers[0].offset;
  double* gb1 = g.data() + params.layers[1].offset;
  for (size_t k = 0; k < h; ++k) {
    const double da = dh[k] * (1.0 - hidden[k] * hidden[k]);
    for (size_t j = 0; j < d; ++j) gw1[k * d + j] = da * x[j];
    gb1[k] = da;
  }
  return g;
}

GradientRecord Grad(const ModelParams& params,
                    std::span<const LabeledExample> batch) {
  if (batch.empty()) throw UsageError("Grad: empty batch");
  GradientRecord rec;
  rec.per_example.reserve(batch.size());
  rec.batch_mean.assign(params.size(), 0.0);
  for (const auto& ex : batch) {
    rec.per_example.push_back(ExampleGradient(params, ex));
    const auto& g = rec.per_example.back();
    for (size_t i = 0; i < g.size(); ++i) rec.batch_mean[i] += g[i];
  }
  const double n = static_cast<double>(batch.size());
  for (double& v : rec.batch_mean) v /= n;
  return rec;
}

ModelParams SgdStep(const ModelParams& params, std::span<const double> gradient,
                    const SgdOptions& options, SgdState& state) {
  if (gradient.size() != params.size()) {
    throw ShapeError("gradient length " + std::to_string(gradient.size()) +
                     " does not match parameter count " +
                     std::to_string(params.size()));
  }
  const bool first = state.velocity.empty();
  if (first) state.velocity.assign(params.size(), 0.0);
  if (state.velocity.size() != params.size()) {
    throw ShapeError("momentum buffer length does not match parameters");
  }
  ModelParams out = params;
  for (size_t i = 0; i < out.flat.size(); ++i) {
    const double g = gradient[i] + options.weight_decay * params.flat[i];
    double& v = state.velocity[i];
    v = first ? g : options.momentum * v + g;
    out.flat[i] -= options.learning_rate * v;
  }
  return out;
}

double Accuracy(const ModelParams& params, const Dataset& data) {
  if (data.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& ex : data) {
    if (Predict(params, ex.features) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<uint8_t> SerializeCheckpoint(const ModelParams& params) {
  std::vector<uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  Put<uint32_t>(out, kCheckpointVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(params.arch.kind));
  Put<uint64_t>(out, params.arch.input_dim);
  Put<uint64_t>(out, static_cast<uint64_t>(params.arch.num_classes));
  Put<uint64_t>(out, params.arch.hidden);
  Put<uint32_t>(out, static_cast<uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    Put<uint32_t>(out, static_cast<uint32_t>(l.name.size()));
    out.insert(out.end(), l.name.begin(), l.name.end());
    Put<uint64_t>(out, l.offset);
    Put<uint64_t>(out, l.length);
  }
  Put<uint64_t>(out, params.flat.size());
  for (double v : params.flat) Put<double>(out, v);
  return out;
}

ModelParams ParseCheckpoint(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (r.GetString(4, "magic") != std::string(kCheckpointMagic, 4)) {
    throw FormatError("bad checkpoint magic");
  }
  if (r.Get<uint32_t>("version") != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version");
  }
  ModelParams p;
  const uint32_t kind = r.Get<uint32_t>("model kind");
  if (kind > 1) throw FormatError("bad checkpoint model kind");
  p.arch.kind = static_cast<ModelKind>(kind);
  p.arch.input_dim = r.Get<uint64_t>("input dim");
  p.arch.num_classes = static_cast<int>(r.Get<uint64_t>("class count"));
  p.arch.hidden = r.Get<uint64_t>("hidden width");
  const uint32_t num_layers = r.Get<uint32_t>("layer count");
  for (uint32_t i = 0; i < num_layers; ++i) {
    LayerView l;
    const uint32_t len = r.Get<uint32_t>("layer name length");
    l.name = r.GetString(len, "layer name");
    l.offset = r.Get<uint64_t>("layer offset");
    l.length = r.Get<uint64_t>("layer length");
    p.layers.push_back(std::move(l));
  }
  const uint64_t count = r.Get<uint64_t>("parameter count");
  if (count > bytes.size() / sizeof(double)) {
    throw FormatError("truncated checkpoint: parameter array");
  }
  p.flat.resize(count);
  for (auto& v : p.flat) v = r.Get<double>("parameter array");
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  if (p.layers != LayoutFor(p.arch)) {
    throw FormatError("checkpoint layer table does not match architecture");
  }
  if (p.layers.empty() ||
      p.layers.back().offset + p.layers.back().length != p.flat.size()) {
    throw FormatError("checkpoint parameter count does not match layer table");
  }
  return p;
}

void WriteCheckpoint(const std::string& path, const ModelParams& params) {
  WriteFileBytes(path, SerializeCheckpoint(params));
}

ModelParams ReadCheckpoint(const std::string& path) {
  return ParseCheckpoint(ReadFileBytes(path));
}

}  // namespace fedcert

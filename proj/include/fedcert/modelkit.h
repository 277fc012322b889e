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

// Small differentiable classifiers over a flat parameter vector:
// multinomial logistic regression and a one-hidden-layer tanh MLP.

#ifndef FEDCERT_MODELKIT_H_
#define FEDCERT_MODELKIT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcert/datakit.h"

namespace fedcert {

enum class ModelKind { kLogistic = 0, kMlp = 1 };

struct Architecture {
  ModelKind kind = ModelKind::kLogistic;
  size_t input_dim = 0;
  int num_classes = 2;
  size_t hidden = 0;  // MLP only.

  bool operator==(const Architecture&) const = default;
};

// A named contiguous slice of the flat parameter vector.
struct LayerView {
  std::string name;
  size_t offset = 0;
  size_t length = 0;

  bool operator==(const LayerView&) const = default;
};

struct ModelParams {
  Architecture arch;
  std::vector<double> flat;
  std::vector<LayerView> layers;

  size_t size() const { return flat.size(); }
  std::span<const double> layer(size_t i) const {
    return std::span<const double>(flat).subspan(layers[i].offset,
                                                 layers[i].length);
  }

  bool operator==(const ModelParams&) const = default;
};

// Layer layout for an architecture. Weights are row-major (out x in).
std::vector<LayerView> LayoutFor(const Architecture& arch);

// Logistic models start at zero. MLP first-layer weights are drawn
// uniformly from +-sqrt(6 / (in + hidden)) using `seed`; everything else is
// zero.
ModelParams InitParams(const Architecture& arch, uint64_t seed);

// Softmax of the logits. Throws ShapeError when x has the wrong length.
std::vector<double> PredictConfidence(const ModelParams& params,
                                      std::span<const double> x);

// Argmax of PredictConfidence, lowest index on ties.
int Predict(const ModelParams& params, std::span<const double> x);

inline constexpr double kConfidenceFloor = 1e-12;

// Cross-entropy -log f_y(x) with the confidence clamped below at 1e-12.
double Loss(const ModelParams& params, const LabeledExample& example);

struct GradientRecord {
  std::vector<std::vector<double>> per_example;
  std::vector<double> batch_mean;
};

std::vector<double> ExampleGradient(const ModelParams& params,
                                    const LabeledExample& example);

// Analytic per-example gradients of Loss and their mean. Throws UsageError
// on an empty batch.
GradientRecord Grad(const ModelParams& params,
                    std::span<const LabeledExample> batch);

struct SgdOptions {
  double learning_rate = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

// Momentum buffer. Lives with a single local training run and is never
// part of ModelParams.
struct SgdState {
  std::vector<double> velocity;
};

// g' = g + wd * w;  v = momentum * v + g';  w = w - lr * v.
// The first step initialises v to g'.
ModelParams SgdStep(const ModelParams& params, std::span<const double> gradient,
                    const SgdOptions& options, SgdState& state);

double Accuracy(const ModelParams& params, const Dataset& data);

// Checkpoint: little-endian, "FCKP" magic, version, architecture, layer
// descriptor table (name, offset, length), then the flat float64 array.
std::vector<uint8_t> SerializeCheckpoint(const ModelParams& params);
ModelParams ParseCheckpoint(std::span<const uint8_t> bytes);
void WriteCheckpoint(const std::string& path, const ModelParams& params);
ModelParams ReadCheckpoint(const std::string& path);

}  // namespace fedcert

#endif  // FEDCERT_MODELKIT_H_

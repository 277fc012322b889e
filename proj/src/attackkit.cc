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

#include "fedcert/attackkit.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedcert/errors.h"

namespace fedcert {

std::string AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kBackdoor:
      return "BKD";
    case AttackKind::kLabelFlip:
      return "LF";
    case AttackKind::kDistributedBackdoor:
      return "DBA";
  }
  return "?";
}

AttackKind ParseAttackKind(const std::string& name) {
  if (name == "BKD" || name == "bkd" || name == "backdoor") {
    return AttackKind::kBackdoor;
  }
  if (name == "LF" || name == "lf" || name == "labelflip") {
    return AttackKind::kLabelFlip;
  }
  if (name == "DBA" || name == "dba") return AttackKind::kDistributedBackdoor;
  throw ConfigError("unknown attack kind '" + name + "'");
}

Pattern ParsePattern(const std::string& text) {
  Pattern p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("pattern entry '" + item + "' is not index:value");
    }
    try {
      p.push_back({std::stoul(item.substr(0, colon)),
                   std::stod(item.substr(colon + 1))});
    } catch (const std::logic_error&) {
      throw ConfigError("pattern entry '" + item + "' is not index:value");
    }
  }
  return p;
}

std::string FormatPattern(const Pattern& pattern) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < pattern.size(); ++i) {
    if (i) os << ',';
    os << pattern[i].index << ':' << pattern[i].value;
  }
  return os.str();
}

Pattern TailTriggerPattern(size_t dim) {
  if (dim < 3) throw ConfigError("tail trigger needs at least 3 features");
  return {{dim - 3, 1.0}, {dim - 2, 1.0}, {dim - 1, 1.0}};
}

Pattern CornerTrianglePattern(size_t rows, size_t cols) {
  if (rows < 2 || cols < 2) throw ConfigError("image too small for trigger");
  auto at = [cols](size_t r, size_t c) { return r * cols + c; };
  return {{at(rows - 2, cols - 1), 1.0},
          {at(rows - 1, cols - 2), 1.0},
          {at(rows - 1, cols - 1), 1.0}};
}

void ValidateAttack(const AttackSpec& spec) {
  if (spec.k < 0) throw ConfigError("attack k must be >= 0");
  if (!(spec.poison_fraction >= 0.0 && spec.poison_fraction <= 1.0)) {
    throw ConfigError("poison_fraction must lie in [0,1]");
  }
  if (!(spec.scale >= 1.0)) throw ConfigError("scale gamma must be >= 1");
  if (spec.kind == AttackKind::kDistributedBackdoor && spec.k >= 1 &&
      static_cast<size_t>(spec.k) > spec.pattern.size()) {
    throw ConfigError("DBA pattern has fewer entries than attackers");
  }
}

LabeledExample ApplyBackdoor(const LabeledExample& example,
                             const Pattern& pattern, int target_label) {
  LabeledExample out = example;
  for (const auto& e : pattern) {
    if (e.index >= out.features.size()) {
      throw PatternError("pattern index " + std::to_string(e.index) +
                         " outside feature range " +
                         std::to_string(out.features.size()));
    }
    out.features[e.index] = std::clamp(e.value, 0.0, 1.0);
  }
  out.label = target_label;
  return out;
}

std::vector<Pattern> DecomposeDba(const Pattern& pattern, int k) {
  if (k < 1 || static_cast<size_t>(k) > pattern.size()) {
    throw ConfigError("DBA needs 1 <= k <= |pattern| (k=" + std::to_string(k) +
                      ", |pattern|=" + std::to_string(pattern.size()) + ")");
  }
  const size_t parts = static_cast<size_t>(k);
  const size_t base = pattern.size() / parts;
  const size_t extra = pattern.size() % parts;
  std::vector<Pattern> out(parts);
  size_t cursor = 0;
  for (size_t i = 0; i < parts; ++i) {
    const size_t n = base + (i < extra ? 1 : 0);
    out[i].assign(pattern.begin() + cursor, pattern.begin() + cursor + n);
    cursor += n;
  }
  return out;
}

LabeledExample FlipLabel(const LabeledExample& example, int source_class,
                         int target_label) {
  LabeledExample out = example;
  if (out.label == source_class) out.label = target_label;
  return out;
}

std::vector<double> ScaleUpdate(std::span<const double> delta, double gamma) {
  if (!(gamma >= 1.0)) {
    throw ConfigError("model-replacement scale must be >= 1, got " +
                      std::to_string(gamma));
  }
  std::vector<double> out(delta.begin(), delta.end());
  for (double& v : out) v *= gamma;
  return out;
}

PoisonedView::PoisonedView(const Dataset& base, const Partition& partition,
                           const AttackSpec& spec, AttackLevel level)
    : base_(&base), partition_(&partition), spec_(spec), level_(level) {
  ValidateAttack(spec);
  const size_t num_users = partition.num_users();
  flags_.resize(num_users);
  for (size_t u = 0; u < num_users; ++u) {
    flags_[u].assign(partition.users[u].size(), false);
  }
  if (level == AttackLevel::kUser) {
    if (static_cast<size_t>(spec.k) > num_users) {
      throw ConfigError("more adversarial users than users");
    }
    for (size_t u = 0; u < static_cast<size_t>(spec.k); ++u) {
      const size_t n = flags_[u].size();
      const auto count = static_cast<size_t>(
          std::ceil(spec.poison_fraction * static_cast<double>(n)));
      std::fill_n(flags_[u].begin(), std::min(count, n), true);
    }
    if (spec.kind == AttackKind::kDistributedBackdoor && spec.k > 0) {
      user_patterns_ = DecomposeDba(spec.pattern, spec.k);
    }
  } else {
    if (spec.kind == AttackKind::kDistributedBackdoor) {
      throw ConfigError("DBA is a user-level attack");
    }
    size_t remaining = static_cast<size_t>(spec.k);
    for (size_t u = 0; u < num_users && remaining > 0; ++u) {
      for (size_t j = 0; j < flags_[u].size() && remaining > 0; ++j) {
        flags_[u][j] = true;
        --remaining;
      }
    }
    if (remaining > 0) throw ConfigError("more poisoned instances than examples");
  }
}

bool PoisonedView::is_adversarial(size_t user) const {
  if (level_ == AttackLevel::kUser) return user < static_cast<size_t>(spec_.k);
  return std::find(flags_[user].begin(), flags_[user].end(), true) !=
         flags_[user].end();
}

size_t PoisonedView::flagged_count() const {
  size_t n = 0;
  for (const auto& f : flags_) n += static_cast<size_t>(std::count(f.begin(), f.end(), true));
  return n;
}

LabeledExample PoisonedView::Poison(const LabeledExample& ex, size_t user) const {
  switch (spec_.kind) {
    case AttackKind::kBackdoor:
      return ApplyBackdoor(ex, spec_.pattern, spec_.target_label);
    case AttackKind::kDistributedBackdoor:
      return ApplyBackdoor(ex, user_patterns_.at(user), spec_.target_label);
    case AttackKind::kLabelFlip:
      return FlipLabel(ex, spec_.source_class, spec_.target_label);
  }
  return ex;
}

Dataset PoisonedView::LocalDataset(size_t user) const {
  const auto& indices = partition_->users.at(user);
  Dataset out;
  out.reserve(indices.size());
  for (size_t j = 0; j < indices.size(); ++j) {
    const auto& ex = base_->at(indices[j]);
    out.push_back(flags_[user][j] ? Poison(ex, user) : ex);
  }
  return out;
}

}  // namespace fedcert

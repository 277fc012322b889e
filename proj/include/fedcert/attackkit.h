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

// Poisoning transforms (backdoor, distributed backdoor, label flip) and
// model-replacement scaling of malicious updates.

#ifndef FEDCERT_ATTACKKIT_H_
#define FEDCERT_ATTACKKIT_H_

#include <span>
#include <string>
#include <vector>

#include "fedcert/datakit.h"

namespace fedcert {

enum class AttackKind { kBackdoor, kLabelFlip, kDistributedBackdoor };

// "BKD", "LF", "DBA".
std::string AttackKindName(AttackKind kind);
AttackKind ParseAttackKind(const std::string& name);

// Trigger entry: feature `index` is set to `value`.
struct PatternEntry {
  size_t index = 0;
  double value = 1.0;

  bool operator==(const PatternEntry&) const = default;
};

using Pattern = std::vector<PatternEntry>;

// "i:v,i:v,..." <-> Pattern.
Pattern ParsePattern(const std::string& text);
std::string FormatPattern(const Pattern& pattern);

// Last three coordinates set to 1.0; stands in for the image corner
// trigger on feature vectors without geometry.
Pattern TailTriggerPattern(size_t dim);

// Three-pixel right-angle triangle in the lower-right corner of a
// rows x cols image, intensity 1.0: (r-1,c-1), (r-1,c-2), (r-2,c-1).
Pattern CornerTrianglePattern(size_t rows, size_t cols);

// Whether the attacker is counted in users or in training instances.
enum class AttackLevel { kUser, kInstance };

struct AttackSpec {
  AttackKind kind = AttackKind::kBackdoor;
  int k = 0;                     // adversarial users or poisoned instances
  double poison_fraction = 1.0;  // per adversarial user (user level)
  double scale = 1.0;            // model-replacement gamma (user level)
  Pattern pattern;
  int target_label = 0;
  int source_class = 1;  // label flip only

  bool operator==(const AttackSpec&) const = default;
};

// Checks the attack's own invariants (k >= 0, fraction in [0,1], gamma >= 1,
// DBA pattern splittable into k parts). Throws ConfigError.
void ValidateAttack(const AttackSpec& spec);

// Sets the pattern features (values clamped to [0,1]) and the label.
LabeledExample ApplyBackdoor(const LabeledExample& example,
                             const Pattern& pattern, int target_label);

// Splits the pattern into k disjoint contiguous parts whose sizes differ by
// at most one (larger parts first). Throws ConfigError when k > |pattern|.
std::vector<Pattern> DecomposeDba(const Pattern& pattern, int k);

LabeledExample FlipLabel(const LabeledExample& example, int source_class,
                         int target_label);

// Multiplies every component by gamma. Throws ConfigError when gamma < 1.
std::vector<double> ScaleUpdate(std::span<const double> delta, double gamma);

// A poisoned reading of a partitioned dataset. The base dataset is held by
// reference and never modified; poisoned copies are produced on demand.
//
// User level: users 0..k-1 are adversarial and each flags the first
// ceil(alpha * |D_i|) examples of its local list. Instance level: exactly k
// examples are flagged, taken in user order then local order.
class PoisonedView {
 public:
  PoisonedView(const Dataset& base, const Partition& partition,
               const AttackSpec& spec, AttackLevel level);

  const AttackSpec& spec() const { return spec_; }
  AttackLevel level() const { return level_; }
  bool is_adversarial(size_t user) const;
  // Flags per local example of `user`, aligned with partition.users[user].
  const std::vector<bool>& flags(size_t user) const { return flags_[user]; }
  size_t flagged_count() const;

  // The local dataset of `user` with its flagged examples poisoned.
  Dataset LocalDataset(size_t user) const;

 private:
  LabeledExample Poison(const LabeledExample& ex, size_t user) const;

  const Dataset* base_;
  const Partition* partition_;
  AttackSpec spec_;
  AttackLevel level_;
  std::vector<std::vector<bool>> flags_;
  std::vector<Pattern> user_patterns_;
};

}  // namespace fedcert

#endif  // FEDCERT_ATTACKKIT_H_

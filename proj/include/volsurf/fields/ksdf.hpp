// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "volsurf/fields/sdf.hpp"

namespace volsurf {

inline constexpr int kMaxLayers = 9;

enum class OffsetSign { inside, outside };

/// Offset between adjacent shells. The activated magnitude is
/// softplus(raw + sum_i modulation[i] * Y_i(dir)), where dir is the unit
/// direction from `center` to the query point; with no modulation it is a
/// constant.
struct OffsetField {
  double raw = 0.0;
  OffsetSign sign = OffsetSign::inside;
  Vec3 center;
  std::vector<double> modulation;  // SH coefficients, size 0, 1, 4, 9 or 16

  static OffsetField constant(double activated, OffsetSign sign);
  static OffsetField from_raw(double raw, OffsetSign sign);

  double pre_activation(const Vec3& x) const;
  double activated(const Vec3& x) const;
  Vec3 activated_gradient(const Vec3& x) const;
  /// Lower bound of activated() over all directions.
  double min_activated() const;
  /// Upper bound of activated() over all directions.
  double max_activated() const;
};

/// Main SDF plus nested support shells. Layers are indexed outermost first:
/// outer offsets (farthest first), the main surface, then inner offsets.
class KSdf {
 public:
  KSdf(SdfField main, std::vector<OffsetField> inner_offsets,
       std::vector<OffsetField> outer_offsets, double beta);

  int k() const { return 1 + static_cast<int>(inner_.size() + outer_.size()); }
  int main_index() const { return static_cast<int>(outer_.size()); }
  double beta() const { return beta_; }
  KSdf with_beta(double beta) const;

  const SdfField& main() const { return main_; }
  const std::vector<OffsetField>& inner_offsets() const { return inner_; }
  const std::vector<OffsetField>& outer_offsets() const { return outer_; }

  /// Signed distances of all k layers at x, outermost first.
  std::vector<double> layer_distances(const Vec3& x) const;
  /// Same, written into `out` (size >= k) without allocating.
  void layer_distances(const Vec3& x, std::span<double> out) const;
  double layer_distance(int layer, const Vec3& x) const;
  /// Signed cumulative offset added to the main distance for `layer`.
  double layer_shift(int layer, const Vec3& x) const;
  Vec3 layer_gradient(int layer, const Vec3& x) const;
  /// Smallest gap between `layer` and its neighbours, over all directions.
  double min_gap(int layer) const;

 private:
  SdfField main_;
  std::vector<OffsetField> inner_;
  std::vector<OffsetField> outer_;
  double beta_;
};

std::vector<double> ksdf_layer_distances(const KSdf& k, const Vec3& x);

}  // namespace volsurf

// SPDX-License-Identifier: Apache-2.0
#include "volsurf/fields/ksdf.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include "volsurf/appearance/sh.hpp"
#include "volsurf/core/error.hpp"
#include "volsurf/fields/kernels.hpp"

namespace volsurf {
namespace {

int modulation_degree(std::size_t count) {
  switch (count) {
    case 0: return -1;
    case 1: return 0;
    case 4: return 1;
    case 9: return 2;
    case 16: return 3;
    default: throw InvalidArgument("offset modulation must have 0, 1, 4, 9 or 16 coefficients");
  }
}

// Upper bound on |Y_lm| over the sphere for real harmonics: sqrt(2(2l+1)/(4 pi)).
double sh_magnitude_bound(int coefficient) {
  const int l = sh_band_of(coefficient);
  return std::sqrt(2.0 * (2 * l + 1) / (4.0 * std::numbers::pi));
}

double modulation_bound(const OffsetField& o) {
  double bound = 0.0;
  for (std::size_t i = 0; i < o.modulation.size(); ++i) {
    bound += std::abs(o.modulation[i]) * sh_magnitude_bound(static_cast<int>(i));
  }
  return bound;
}

void validate_offsets(const std::vector<OffsetField>& offsets, OffsetSign expected,
                      const char* what) {
  for (const auto& o : offsets) {
    if (o.sign != expected) throw InvalidArgument(std::string(what) + " offset has the wrong sign");
    if (!std::isfinite(o.raw)) throw InvalidArgument(std::string(what) + " offset raw value is not finite");
    modulation_degree(o.modulation.size());
  }
}

}  // namespace

OffsetField OffsetField::constant(double activated, OffsetSign sign) {
  if (!(activated > 0.0)) throw InvalidArgument("activated offset must be positive");
  return from_raw(softplus_inverse(activated), sign);
}

OffsetField OffsetField::from_raw(double raw, OffsetSign sign) {
  OffsetField o;
  o.raw = raw;
  o.sign = sign;
  return o;
}

double OffsetField::pre_activation(const Vec3& x) const {
  const int degree = modulation_degree(modulation.size());
  if (degree < 0) return raw;
  const Vec3 d = x - center;
  const double len = length(d);
  const Vec3 dir = len > 0.0 ? d / len : Vec3{0, 0, 1};
  std::array<double, kMaxShCoefficients> basis{};
  sh_basis(degree, dir, basis);
  double s = raw;
  for (std::size_t i = 0; i < modulation.size(); ++i) s += modulation[i] * basis[i];
  return s;
}

double OffsetField::activated(const Vec3& x) const { return softplus(pre_activation(x)); }

Vec3 OffsetField::activated_gradient(const Vec3& x) const {
  if (modulation.empty()) return {};
  constexpr double h = 1e-6;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    g[a] = (activated(xp) - activated(xm)) / (2.0 * h);
  }
  return g;
}

double OffsetField::min_activated() const { return softplus(raw - modulation_bound(*this)); }
double OffsetField::max_activated() const { return softplus(raw + modulation_bound(*this)); }

KSdf::KSdf(SdfField main, std::vector<OffsetField> inner_offsets,
           std::vector<OffsetField> outer_offsets, double beta)
    : main_(std::move(main)),
      inner_(std::move(inner_offsets)),
      outer_(std::move(outer_offsets)),
      beta_(beta) {
  if (k() < 1 || k() > kMaxLayers) {
    throw InvalidArgument("k must be in [1,9] (got " + std::to_string(k()) + ")");
  }
  if (!(beta_ > 0.0) || !std::isfinite(beta_)) throw InvalidArgument("beta must be positive");
  validate_offsets(inner_, OffsetSign::inside, "inner");
  validate_offsets(outer_, OffsetSign::outside, "outer");
}

KSdf KSdf::with_beta(double beta) const { return KSdf(main_, inner_, outer_, beta); }

double KSdf::layer_shift(int layer, const Vec3& x) const {
  if (layer < 0 || layer >= k()) throw InvalidArgument("layer index out of range");
  const int m = main_index();
  double shift = 0.0;
  if (layer < m) {
    // Outer layer at position `layer`: subtract offsets main..layer.
    for (int i = 0; i < m - layer; ++i) shift -= outer_[i].activated(x);
  } else {
    for (int i = 0; i < layer - m; ++i) shift += inner_[i].activated(x);
  }
  return shift;
}

double KSdf::layer_distance(int layer, const Vec3& x) const {
  return main_.eval(x) + layer_shift(layer, x);
}

std::vector<double> KSdf::layer_distances(const Vec3& x) const {
  std::vector<double> out(k());
  layer_distances(x, out);
  return out;
}

void KSdf::layer_distances(const Vec3& x, std::span<double> out) const {
  const double d = main_.eval(x);
  const int m = main_index();
  out[m] = d;
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(outer_.size()); ++i) {
    acc += outer_[i].activated(x);
    out[m - 1 - i] = d - acc;
  }
  acc = 0.0;
  for (int i = 0; i < static_cast<int>(inner_.size()); ++i) {
    acc += inner_[i].activated(x);
    out[m + 1 + i] = d + acc;
  }
}

Vec3 KSdf::layer_gradient(int layer, const Vec3& x) const {
  if (layer < 0 || layer >= k()) throw InvalidArgument("layer index out of range");
  Vec3 g = main_.gradient(x, default_gradient_step(main_));
  const int m = main_index();
  if (layer < m) {
    for (int i = 0; i < m - layer; ++i) g -= outer_[i].activated_gradient(x);
  } else {
    for (int i = 0; i < layer - m; ++i) g += inner_[i].activated_gradient(x);
  }
  return g;
}

double KSdf::min_gap(int layer) const {
  if (layer < 0 || layer >= k()) throw InvalidArgument("layer index out of range");
  const int m = main_index();
  double gap = std::numeric_limits<double>::infinity();
  // Offset separating `layer` from its outer neighbour, then from its inner one.
  auto offset_between = [&](int outer_layer) -> const OffsetField& {
    return outer_layer < m ? outer_[m - 1 - outer_layer] : inner_[outer_layer - m];
  };
  if (layer > 0) gap = std::min(gap, offset_between(layer - 1).min_activated());
  if (layer + 1 < k()) gap = std::min(gap, offset_between(layer).min_activated());
  return gap;
}

std::vector<double> ksdf_layer_distances(const KSdf& k, const Vec3& x) { return k.layer_distances(x); }

}  // namespace volsurf

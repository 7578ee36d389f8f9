// SPDX-License-Identifier: Apache-2.0
#include "volsurf/appearance/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/shellrender/render.hpp"

namespace volsurf {
namespace {

constexpr std::size_t kChunk = 256;
constexpr int kMaxFragments = 9;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_layout(const ShTextureSet& texset, const TextureLayout& layout, std::size_t params) {
  const TextureLayout l = texset.layout();
  if (l.degree != layout.degree || l.v_min != layout.v_min || l.v_max != layout.v_max ||
      !std::equal(l.band_resolutions.begin(), l.band_resolutions.end(),
                  layout.band_resolutions.begin())) {
    throw InvalidArgument("texture set layout differs from the fit layout");
  }
  if (texset.parameter_count() != params) {
    throw InvalidArgument("texture set has the wrong number of layers");
  }
  for (const auto& bands : texset.layers) {
    for (const auto& t : bands) {
      if (t.storage != TexelStorage::raw) throw InvalidArgument("fitting needs raw texel storage");
    }
  }
}

}  // namespace

void FitConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(final_lr_ratio > 0.0)) throw InvalidArgument("final learning rate ratio must be positive");
  if (batch_size < 0) throw InvalidArgument("batch size must be >= 0");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip norm must be positive");
  layout.validate();
}

std::vector<double> flatten_parameters(const ShTextureSet& texset) {
  std::vector<double> flat;
  flat.reserve(texset.parameter_count());
  for (const auto& bands : texset.layers) {
    for (const auto& t : bands) flat.insert(flat.end(), t.values.begin(), t.values.end());
  }
  return flat;
}

void unflatten_parameters(const std::vector<double>& flat, ShTextureSet& texset) {
  if (flat.size() != texset.parameter_count()) throw InvalidArgument("parameter count mismatch");
  std::size_t i = 0;
  for (auto& bands : texset.layers) {
    for (auto& t : bands) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(i), t.values.size(), t.values.begin());
      i += t.values.size();
    }
  }
}

TextureFitter::TextureFitter(const ShellSet& shells, const std::vector<FitTarget>& targets,
                             const FitConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  if (shells.k() < 1 || shells.k() > kMaxFragments) throw InvalidArgument("k must be in [1,9]");
  const int degree = cfg_.layout.degree;
  const ShTextureSet layout_set = ShTextureSet::zeros(shells.k(), cfg_.layout);
  param_count_ = layout_set.parameter_count();
  for (int j = 0; j < shells.k(); ++j) {
    for (int b = 0; b <= degree; ++b) band_offsets_.push_back(layout_set.parameter_offset(j, b));
  }

  const ShellRenderer renderer(shells);
  for (const FitTarget& target : targets) {
    const Camera& cam = target.camera;
    if (target.image.width != cam.width || target.image.height != cam.height) {
      throw InvalidArgument("target image size differs from its camera");
    }
    const std::size_t pixels = static_cast<std::size_t>(cam.width) * cam.height;
    std::vector<Fragment> frags(pixels * shells.k());
    std::vector<std::uint32_t> counts(pixels, 0);
    parallel_for(pixels, 64, [&](std::size_t p0, std::size_t p1) {
      for (std::size_t p = p0; p < p1; ++p) {
        const Ray ray = cam.pixel_ray(static_cast<int>(p % cam.width), static_cast<int>(p / cam.width));
        for (int j = 0; j < shells.k(); ++j) {
          const auto hit = renderer.first_hit(j, ray);
          if (!hit) continue;
          Fragment& f = frags[p * shells.k() + counts[p]++];
          f.layer = j;
          f.v = ray.direction.vec();
          f.attenuation = alpha_attenuation(ray.direction.vec(), hit->normal.vec());
          for (int b = 0; b <= degree; ++b) {
            const ShTexture& tex = layout_set.layers[j][b];
            const BilinearTaps taps = bilinear_taps(tex.width, tex.height, hit->uv);
            const std::size_t base = band_offsets_[static_cast<std::size_t>(j) * (degree + 1) + b];
            for (int q = 0; q < 4; ++q) {
              f.offsets[b * 4 + q] =
                  static_cast<std::uint32_t>(base + tex.texel_offset(taps.x[q], taps.y[q]));
              f.weights[b * 4 + q] = taps.w[q];
            }
          }
        }
      }
    });
    for (std::size_t p = 0; p < pixels; ++p) {
      RayRecord r;
      r.first = static_cast<std::uint32_t>(fragments_.size());
      r.count = counts[p];
      for (std::uint32_t i = 0; i < counts[p]; ++i) fragments_.push_back(frags[p * shells.k() + i]);
      for (int c = 0; c < 4; ++c) r.target[c] = target.image.rgba[p * 4 + c];
      rays_.push_back(r);
    }
  }
}

void TextureFitter::TexelCache::update(const std::vector<double>& params, bool quantize_values,
                                      std::size_t i) {
  unit[i] = texel_unit_value(params[i], TexelStorage::raw, quantize_values);
  slope[i] = sigmoid_derivative(params[i]);
}

template <typename Emit>
double TextureFitter::eval_ray(const RayRecord& ray, const TexelCache& cache, double grad_scale,
                               bool want_grad, Emit&& emit) const {
  const int degree = cfg_.layout.degree;
  const double v_min = cfg_.layout.v_min;
  const double range = cfg_.layout.v_max - v_min;
  const double* unit = cache.unit.data();

  struct Processed {
    const Fragment* f;
    double transmittance;
    double alpha;
    double s[4];
    double c[4];
    std::array<double, kMaxShCoefficients> basis;
  };
  std::array<Processed, kMaxFragments> done;
  int processed = 0;

  // Same operation order as decode_rgba and ShellRenderer::shade_ray.
  FrontToBack acc;
  for (std::uint32_t i = 0; i < ray.count; ++i) {
    if (acc.transmittance < kEarlyExitTransmittance) break;
    const Fragment& f = fragments_[ray.first + i];
    Processed& pr = done[processed++];
    pr.f = &f;
    pr.transmittance = acc.transmittance;
    sh_basis(degree, f.v, pr.basis);
    double s[4] = {0, 0, 0, 0};
    for (int b = 0; b <= degree; ++b) {
      const int n = sh_band_size(b) * 4;
      const std::uint32_t* off = &f.offsets[b * 4];
      const double* w = &f.weights[b * 4];
      for (int e = 0; e < n; ++e) {
        double u = 0.0;
        for (int q = 0; q < 4; ++q) u += w[q] * unit[off[q] + e];
        const double coef = v_min + range * u;
        s[e % 4] += coef * pr.basis[sh_band_offset(b) + e / 4];
      }
    }
    for (int c = 0; c < 4; ++c) {
      pr.s[c] = s[c];
      pr.c[c] = sigmoid(s[c]);
    }
    pr.alpha = pr.c[3] * f.attenuation;
    acc.add({{pr.c[0], pr.c[1], pr.c[2]}, pr.alpha});
  }
  const Rgba out = acc.over(cfg_.background);
  const double o[4] = {out.r, out.g, out.b, out.a};
  double loss = 0.0;
  double g_out[4];
  for (int c = 0; c < 4; ++c) {
    const double d = o[c] - static_cast<double>(ray.target[c]);
    loss += std::abs(d);
    g_out[c] = grad_scale * static_cast<double>((d > 0.0) - (d < 0.0));
  }
  if (!want_grad) return loss;

  // Walk back through the processed layers. behind = color of everything
  // behind layer j composited over the background; opaque_behind =
  // prod_{i>j} (1 - a_i).
  const double* slope = cache.slope.data();
  double behind[3] = {cfg_.background.r, cfg_.background.g, cfg_.background.b};
  double opaque_behind = 1.0;
  for (int j = processed - 1; j >= 0; --j) {
    const Processed& pr = done[j];
    const double a = pr.alpha;
    const double t = pr.transmittance;
    double g_a = g_out[3] * t * opaque_behind;
    double g_s[4];
    for (int c = 0; c < 3; ++c) {
      g_a += g_out[c] * t * (pr.c[c] - behind[c]);
      g_s[c] = g_out[c] * t * a * sigmoid_derivative(pr.s[c]);
    }
    g_s[3] = g_a * pr.f->attenuation * sigmoid_derivative(pr.s[3]);
    for (int b = 0; b <= degree; ++b) {
      const int n = sh_band_size(b) * 4;
      const std::uint32_t* off = &pr.f->offsets[b * 4];
      const double* w = &pr.f->weights[b * 4];
      for (int e = 0; e < n; ++e) {
        const double g_unit = g_s[e % 4] * pr.basis[sh_band_offset(b) + e / 4] * range;
        if (g_unit == 0.0) continue;
        for (int q = 0; q < 4; ++q) {
          if (w[q] == 0.0) continue;
          const std::uint32_t idx = off[q] + static_cast<std::uint32_t>(e);
          // Straight-through: the quantizer passes the gradient unchanged.
          emit(idx, g_unit * w[q] * slope[idx]);
        }
      }
    }
    for (int c = 0; c < 3; ++c) behind[c] = a * pr.c[c] + (1.0 - a) * behind[c];
    opaque_behind *= 1.0 - a;
  }
  return loss;
}

double TextureFitter::eval_batch(const std::vector<std::uint32_t>* subset,
                                 const TexelCache& cache, GradSink* grad) const {
  const std::size_t n = subset ? subset->size() : rays_.size();
  if (n == 0) return 0.0;
  const double scale = 1.0 / (4.0 * static_cast<double>(n));
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> chunk_loss(chunks, 0.0);
  auto ray_at = [&](std::size_t i) -> const RayRecord& { return rays_[subset ? (*subset)[i] : i]; };

  if (grad && default_thread_count() == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      double l = 0.0;
      for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
        l += eval_ray(ray_at(i), cache, scale, true,
                      [&](std::uint32_t idx, double g) { grad->add(idx, g); });
      }
      chunk_loss[c] = l;
    }
  } else {
    std::vector<std::vector<std::pair<std::uint32_t, double>>> chunk_grad(grad ? chunks : 0);
    parallel_for(n, kChunk, [&](std::size_t b0, std::size_t b1) {
      const std::size_t c = b0 / kChunk;
      double l = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        if (grad) {
          l += eval_ray(ray_at(i), cache, scale, true,
                        [&](std::uint32_t idx, double g) { chunk_grad[c].emplace_back(idx, g); });
        } else {
          l += eval_ray(ray_at(i), cache, scale, false, [](std::uint32_t, double) {});
        }
      }
      chunk_loss[c] = l;
    });
    if (grad) {
      for (const auto& entries : chunk_grad) {
        for (const auto& [idx, g] : entries) grad->add(idx, g);
      }
    }
  }
  double total = 0.0;
  for (double l : chunk_loss) total += l;
  return total * scale;
}

double TextureFitter::loss(const ShTextureSet& texset) const {
  check_layout(texset, cfg_.layout, param_count_);
  const std::vector<double> params = flatten_parameters(texset);
  TexelCache cache{std::vector<double>(param_count_), std::vector<double>(param_count_)};
  for (std::size_t i = 0; i < param_count_; ++i) cache.update(params, texset.quantize, i);
  return eval_batch(nullptr, cache, nullptr);
}

double TextureFitter::loss_and_gradient(const ShTextureSet& texset,
                                        std::vector<double>& grad) const {
  check_layout(texset, cfg_.layout, param_count_);
  const std::vector<double> params = flatten_parameters(texset);
  TexelCache cache{std::vector<double>(param_count_), std::vector<double>(param_count_)};
  for (std::size_t i = 0; i < param_count_; ++i) cache.update(params, texset.quantize, i);
  GradSink sink{std::vector<double>(param_count_, 0.0), std::vector<std::uint8_t>(param_count_, 0),
                {}};
  const double l = eval_batch(nullptr, cache, &sink);
  grad = std::move(sink.values);
  return l;
}

ShTextureSet TextureFitter::fit(ShTextureSet init, FitReport* report) const {
  const auto start = std::chrono::steady_clock::now();
  check_layout(init, cfg_.layout, param_count_);
  if (report) *report = {};
  if (cfg_.iterations == 0 || rays_.empty()) return init;
  init.quantize = cfg_.quantize;

  std::vector<double> params = flatten_parameters(init);
  TexelCache cache{std::vector<double>(param_count_), std::vector<double>(param_count_)};
  for (std::size_t i = 0; i < param_count_; ++i) cache.update(params, cfg_.quantize, i);
  GradSink grad{std::vector<double>(param_count_, 0.0), std::vector<std::uint8_t>(param_count_, 0), {}};
  std::vector<double> m1(param_count_, 0.0), m2(param_count_, 0.0);

  const std::size_t n = rays_.size();
  const bool full = cfg_.batch_size == 0 || static_cast<std::size_t>(cfg_.batch_size) >= n;
  const std::size_t batch = full ? n : static_cast<std::size_t>(cfg_.batch_size);
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(cfg_.seed);
  std::size_t cursor = n;
  std::vector<std::uint32_t> subset(batch);

  double b1t = 1.0, b2t = 1.0;
  for (int it = 0; it < cfg_.iterations; ++it) {
    if (!full) {
      for (std::size_t i = 0; i < batch; ++i) {
        if (cursor == n) {
          std::shuffle(perm.begin(), perm.end(), rng);
          cursor = 0;
        }
        subset[i] = perm[cursor++];
      }
    }
    const double loss = eval_batch(full ? nullptr : &subset, cache, &grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("non-finite loss at iteration " + std::to_string(it));
    }
    if (report) report->loss_history.push_back(loss);

    double norm2 = 0.0;
    for (std::uint32_t idx : grad.touched) norm2 += grad.values[idx] * grad.values[idx];
    const double norm = std::sqrt(norm2);
    const double clip = norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;

    const double progress =
        cfg_.iterations > 1 ? static_cast<double>(it) / (cfg_.iterations - 1) : 0.0;
    const double lr = cfg_.learning_rate * std::pow(cfg_.final_lr_ratio, progress);
    b1t *= kAdamBeta1;
    b2t *= kAdamBeta2;
    for (std::uint32_t idx : grad.touched) {
      const double g = grad.values[idx] * clip;
      grad.values[idx] = 0.0;
      grad.mark[idx] = 0;
      m1[idx] = kAdamBeta1 * m1[idx] + (1.0 - kAdamBeta1) * g;
      m2[idx] = kAdamBeta2 * m2[idx] + (1.0 - kAdamBeta2) * g * g;
      const double mh = m1[idx] / (1.0 - b1t);
      const double vh = m2[idx] / (1.0 - b2t);
      params[idx] -= lr * mh / (std::sqrt(vh) + kAdamEps);
      cache.update(params, cfg_.quantize, idx);
    }
    grad.touched.clear();
  }
  unflatten_parameters(params, init);
  if (report) {
    report->iterations = cfg_.iterations;
    report->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return init;
}

ShTextureSet fit_textures(const ShellSet& shells, const std::vector<FitTarget>& targets,
                          const FitConfig& cfg, FitReport* report) {
  return fit_textures(shells, targets, cfg, ShTextureSet::zeros(shells.k(), cfg.layout, cfg.quantize),
                      report);
}

ShTextureSet fit_textures(const ShellSet& shells, const std::vector<FitTarget>& targets,
                          const FitConfig& cfg, ShTextureSet init, FitReport* report) {
  return TextureFitter(shells, targets, cfg).fit(std::move(init), report);
}

}  // namespace volsurf

// SPDX-License-Identifier: Apache-2.0
#include "volsurf/shellrender/render.hpp"

#include <algorithm>
#include <cmath>

#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"

namespace volsurf {
namespace {

template <typename PixelFn>
FrameBuffer render_pixels(const Camera& camera, PixelFn&& fn) {
  if (camera.width < 1 || camera.height < 1) throw InvalidArgument("image size must be positive");
  FrameBuffer fb(camera.width, camera.height);
  parallel_for(static_cast<std::size_t>(camera.height), 1, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        fb.set(x, static_cast<int>(y), fn(camera.pixel_ray(x, static_cast<int>(y))));
      }
    }
  });
  return fb;
}

}  // namespace

LayerSample shade_texture(const ShTextureSet& texset, int layer, const LayerHit& hit,
                          const Ray& ray) {
  const Rgba c = decode_rgba(texset, layer, hit.uv, ray.direction);
  return {c.rgb(), c.a * alpha_attenuation(ray.direction.vec(), hit.normal.vec())};
}

ShellRenderer::ShellRenderer(ShellSet shells) : shells_(std::move(shells)) {
  bvhs_.reserve(shells_.shells.size());
  for (const TriMesh& m : shells_.shells) bvhs_.emplace_back(m);
}

std::optional<LayerHit> ShellRenderer::first_hit(int layer, const Ray& ray) const {
  return volsurf::first_hit(bvhs_[layer], shells_.shells[layer], ray);
}

Rgba ShellRenderer::shade_ray(const Ray& ray, const LayerShader& shader, const Rgb& background,
                              bool early_exit) const {
  FrontToBack acc;
  for (int j = 0; j < k(); ++j) {
    if (early_exit && acc.transmittance < kEarlyExitTransmittance) break;
    const auto hit = first_hit(j, ray);
    if (hit) acc.add(shader(j, *hit, ray));
  }
  return acc.over(background);
}

Rgba ShellRenderer::shade_ray(const Ray& ray, const ShTextureSet& texset, const Rgb& background,
                              bool early_exit) const {
  return shade_ray(
      ray, [&](int j, const LayerHit& h, const Ray& r) { return shade_texture(texset, j, h, r); },
      background, early_exit);
}

Rgba ShellRenderer::shade_ray_sorted(const Ray& ray, const LayerShader& shader,
                                     const Rgb& background) const {
  struct Entry {
    int layer;
    LayerHit hit;
  };
  std::vector<Entry> hits;
  for (int j = 0; j < k(); ++j) {
    if (auto h = first_hit(j, ray)) hits.push_back({j, *h});
  }
  std::sort(hits.begin(), hits.end(), [](const Entry& a, const Entry& b) {
    return a.hit.t < b.hit.t || (a.hit.t == b.hit.t && a.layer < b.layer);
  });
  FrontToBack acc;
  for (const Entry& e : hits) {
    if (acc.transmittance < kEarlyExitTransmittance) break;
    acc.add(shader(e.layer, e.hit, ray));
  }
  return acc.over(background);
}

FrameBuffer ShellRenderer::render(const Camera& camera, const LayerShader& shader,
                                  const Rgb& background, bool early_exit) const {
  return render_pixels(camera,
                       [&](const Ray& r) { return shade_ray(r, shader, background, early_exit); });
}

FrameBuffer ShellRenderer::render(const Camera& camera, const ShTextureSet& texset,
                                  const Rgb& background, bool early_exit) const {
  return render_pixels(camera,
                       [&](const Ray& r) { return shade_ray(r, texset, background, early_exit); });
}

FrameBuffer ShellRenderer::render_sorted(const Camera& camera, const LayerShader& shader,
                                         const Rgb& background) const {
  return render_pixels(camera, [&](const Ray& r) { return shade_ray_sorted(r, shader, background); });
}

FrameBuffer render_shells(const Camera& camera, const ShellSet& shells, const ShTextureSet& texset,
                          const Rgb& background) {
  if (texset.k() != shells.k()) throw InvalidArgument("texture layers do not match shell count");
  return ShellRenderer(shells).render(camera, texset, background);
}

FrameBuffer oracle_sorted_blend(const Camera& camera, const ShellSet& shells,
                                const ShTextureSet& texset, const Rgb& background) {
  if (texset.k() != shells.k()) throw InvalidArgument("texture layers do not match shell count");
  return ShellRenderer(shells).render_sorted(
      camera, [&](int j, const LayerHit& h, const Ray& r) { return shade_texture(texset, j, h, r); },
      background);
}

std::vector<LayerBuffers> render_debug_buffers(const Camera& camera, const ShellSet& shells,
                                               const ShTextureSet& texset) {
  if (texset.k() != shells.k()) throw InvalidArgument("texture layers do not match shell count");
  const ShellRenderer renderer(shells);
  std::vector<LayerBuffers> out(shells.k());
  for (int j = 0; j < shells.k(); ++j) {
    LayerBuffers& b = out[j];
    b.normal = b.uv = b.opacity = b.color = FrameBuffer(camera.width, camera.height);
    parallel_for(static_cast<std::size_t>(camera.height), 1, [&](std::size_t y0, std::size_t y1) {
      for (std::size_t yy = y0; yy < y1; ++yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < camera.width; ++x) {
          const Ray ray = camera.pixel_ray(x, y);
          const auto hit = renderer.first_hit(j, ray);
          if (!hit) continue;
          const Vec3& n = hit->normal.vec();
          const Vec3 nv{dot(n, camera.right), -dot(n, camera.down), -dot(n, camera.forward)};
          b.normal.set(x, y, {0.5 * nv.x + 0.5, 0.5 * nv.y + 0.5, 0.5 * nv.z + 0.5, 1.0});
          b.uv.set(x, y, {hit->uv.x, hit->uv.y, 0.0, 1.0});
          const LayerSample s = shade_texture(texset, j, *hit, ray);
          b.opacity.set(x, y, {s.alpha, s.alpha, s.alpha, 1.0});
          b.color.set(x, y, {s.color.r * s.alpha, s.color.g * s.alpha, s.color.b * s.alpha, s.alpha});
        }
      }
    });
  }
  return out;
}

ImageMetrics image_metrics(const FrameBuffer& a, const FrameBuffer& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument("image sizes differ: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height));
  }
  double se = 0.0, ae = 0.0;
  const std::size_t pixels = static_cast<std::size_t>(a.width) * a.height;
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a.rgba[p * 4 + c]) - b.rgba[p * 4 + c];
      se += d * d;
      ae += std::abs(d);
    }
  }
  const double n = 3.0 * static_cast<double>(std::max<std::size_t>(pixels, 1));
  const double mse = se / n;
  ImageMetrics m;
  m.mae = ae / n;
  m.psnr = mse > 0.0 ? std::min(kPsnrCap, -10.0 * std::log10(mse)) : kPsnrCap;
  return m;
}

}  // namespace volsurf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "volsurf/appearance/texture.hpp"
#include "volsurf/core/camera.hpp"
#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr double kAttenuationConstant = 10.0;
inline constexpr const char* kAttenuationFormula = "2*sigmoid(c*abs(dot(v,n)))-1";
inline constexpr const char* kRoundingMode = "half_away_from_zero";

/// Bundle metadata beyond meshes and textures.
struct BundleMeta {
  std::string name;
  Rgb background{1.0, 1.0, 1.0};
  std::optional<Camera> camera;
};

struct Bundle {
  ShellSet shells;
  ShTextureSet textures;  // unit storage after import
  BundleMeta meta;
};

/// File names inside a bundle directory.
std::string bundle_mesh_name(int layer);
std::string bundle_texture_name(int layer, int coefficient);

/// Manifest text for the given contents (UTF-8 JSON, fixed key order, two
/// space indent, trailing newline).
std::string bundle_manifest(const ShellSet& shells, const ShTextureSet& texset,
                            const BundleMeta& meta);

/// Writes manifest.json, layer{L}.obj and layer{L}_coef{I}.png into `dir`,
/// creating it if needed. Output bytes depend only on the inputs. Throws
/// InvalidArgument when shell and texture layer counts differ, IoError on
/// write failures.
void export_bundle(const std::filesystem::path& dir, const ShellSet& shells,
                   const ShTextureSet& texset, const BundleMeta& meta);

/// Reads and validates a bundle. Errors name the offending manifest field:
/// VersionError for an unknown version, FormatError for schema violations,
/// broken invariants and missing files.
Bundle import_bundle(const std::filesystem::path& dir);

}  // namespace volsurf

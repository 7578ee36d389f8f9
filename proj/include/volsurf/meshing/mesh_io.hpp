// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

/// Wavefront OBJ with `v`, `vt`, `vn` and `f v/vt/vn`. Doubles are written in
/// shortest round-trip form.
std::string obj_to_string(const TriMesh& mesh);
TriMesh obj_from_string(const std::string& text);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_obj(const std::filesystem::path& path);

/// Binary little-endian PLY with double vertex attributes.
void write_ply(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_ply(const std::filesystem::path& path);

}  // namespace volsurf

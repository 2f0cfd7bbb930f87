#pragma once

#include <filesystem>
#include <string>

#include "bmkn/mesh.hpp"

namespace bmkn {

enum class MeshFormat { Obj, PlyAscii, PlyBinary };

/// Guesses the format from the file extension (.obj / .ply); PLY files are
/// sniffed for ascii vs binary on load.
MeshFormat format_from_path(const std::filesystem::path& path);

/// Loads an OBJ or PLY mesh. If `<path>.labels` exists, it is read as one
/// BodyPart ordinal per line and attached to the mesh.
Mesh load_mesh(const std::filesystem::path& path);
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);

/// Saves the mesh; positions are written at full double precision. A label
/// sidecar `<path>.labels` is emitted when the mesh carries labels.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               MeshFormat format);

/// Loads all frames `<dir>/*.obj|*.ply` in lexicographic filename order.
Sequence load_sequence(const std::filesystem::path& dir);

/// Writes frames as `frame_0000.obj`, ... with label sidecars.
void save_sequence(const Sequence& seq, const std::filesystem::path& dir,
                   MeshFormat format = MeshFormat::Obj);

}  // namespace bmkn

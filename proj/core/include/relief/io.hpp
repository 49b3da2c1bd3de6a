#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "relief/cloud.hpp"
#include "relief/mesh.hpp"

namespace relief {

enum class CloudFormat { PLY, XYZ };
enum class MeshFormat { PLY, OBJ };

/// Reads an oriented point cloud. PLY may be ascii or
/// binary_little_endian with float or double vertex properties; XYZ is
/// six whitespace-separated columns per line.
PointCloud load_cloud(std::istream& in, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

void save_mesh(const ReliefMesh& mesh, std::ostream& out, MeshFormat format);
void save_mesh(const ReliefMesh& mesh, const std::filesystem::path& path);

/// Reads back a triangle mesh written by save_mesh (or any PLY/OBJ with
/// vertex positions and triangular faces).
ReliefMesh load_mesh(std::istream& in, MeshFormat format);

/// Format from extension (.ply, .xyz/.txt, .obj); throws MalformedFile.
CloudFormat cloud_format_for(const std::filesystem::path& path);
MeshFormat mesh_format_for(const std::filesystem::path& path);
MeshFormat parse_mesh_format(std::string_view name);

}  // namespace relief

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relief/cloud.hpp"
#include "relief/mesh.hpp"

namespace relief {

/// "RFM1" read as a little-endian u32.
inline constexpr std::uint32_t kFrameMagic = 0x52464D31;
inline constexpr std::size_t kFrameHeaderBytes = 16;

/// Binary frame: u32 magic, u32 seq, u32 count, f32 span, f32 z[count],
/// f32 normals[3 count]; all little-endian.
std::vector<std::uint8_t> encode_frame(std::uint32_t seq, float span, std::span<const float> z,
                                       std::span<const float> normals_xyz);
std::vector<std::uint8_t> encode_frame(std::uint32_t seq, double span, std::span<const double> z,
                                       std::span<const Vec3> normals);

struct DecodedFrame {
  std::uint32_t seq = 0;
  float span = 0.0f;
  std::vector<float> z;
  std::vector<float> normals;  // x, y, z per point
};

/// Throws MalformedFile on a bad magic or a length other than
/// 16 + 16 count.
DecodedFrame decode_frame(std::span<const std::uint8_t> bytes);

/// f32 x, y per point.
std::vector<std::uint8_t> encode_xy(std::span<const Vec2> xy);
/// u32 vertex indices, three per triangle.
std::vector<std::uint8_t> encode_topology(std::span<const Triangle> triangles);

}  // namespace relief

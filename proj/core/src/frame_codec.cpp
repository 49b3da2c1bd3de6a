#include "relief/frame_codec.hpp"

#include <bit>
#include <cstring>

#include "relief/error.hpp"

namespace relief {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, std::size_t& at, T v) {
  std::memcpy(out.data() + at, &v, sizeof(T));
  at += sizeof(T);
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t at) {
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(std::uint32_t seq, float span, std::span<const float> z,
                                       std::span<const float> normals_xyz) {
  if (normals_xyz.size() != 3 * z.size()) throw Error(ErrorCode::InvalidArgument, "need three normal components per point");
  std::vector<std::uint8_t> out(kFrameHeaderBytes + 16 * z.size());
  std::size_t at = 0;
  put(out, at, kFrameMagic);
  put(out, at, seq);
  put(out, at, static_cast<std::uint32_t>(z.size()));
  put(out, at, span);
  std::memcpy(out.data() + at, z.data(), 4 * z.size());
  at += 4 * z.size();
  std::memcpy(out.data() + at, normals_xyz.data(), 4 * normals_xyz.size());
  return out;
}

std::vector<std::uint8_t> encode_frame(std::uint32_t seq, double span, std::span<const double> z,
                                       std::span<const Vec3> normals) {
  if (normals.size() != z.size()) throw Error(ErrorCode::InvalidArgument, "need one normal per point");
  std::vector<float> zf(z.begin(), z.end());
  std::vector<float> nf(3 * normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    nf[3 * i] = static_cast<float>(normals[i].x());
    nf[3 * i + 1] = static_cast<float>(normals[i].y());
    nf[3 * i + 2] = static_cast<float>(normals[i].z());
  }
  return encode_frame(seq, static_cast<float>(span), zf, nf);
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw Error(ErrorCode::MalformedFile, "frame shorter than its header");
  if (get<std::uint32_t>(bytes, 0) != kFrameMagic) throw Error(ErrorCode::MalformedFile, "bad frame magic");
  DecodedFrame f;
  f.seq = get<std::uint32_t>(bytes, 4);
  const std::uint32_t count = get<std::uint32_t>(bytes, 8);
  f.span = get<float>(bytes, 12);
  if (bytes.size() != kFrameHeaderBytes + 16ull * count) {
    throw Error(ErrorCode::MalformedFile, "frame length does not match its point count");
  }
  f.z.resize(count);
  f.normals.resize(3ull * count);
  std::memcpy(f.z.data(), bytes.data() + kFrameHeaderBytes, 4ull * count);
  std::memcpy(f.normals.data(), bytes.data() + kFrameHeaderBytes + 4ull * count, 12ull * count);
  return f;
}

std::vector<std::uint8_t> encode_xy(std::span<const Vec2> xy) {
  std::vector<std::uint8_t> out(8 * xy.size());
  std::size_t at = 0;
  for (const Vec2& p : xy) {
    put(out, at, static_cast<float>(p.x()));
    put(out, at, static_cast<float>(p.y()));
  }
  return out;
}

std::vector<std::uint8_t> encode_topology(std::span<const Triangle> triangles) {
  std::vector<std::uint8_t> out(12 * triangles.size());
  if (!triangles.empty()) std::memcpy(out.data(), triangles.data(), out.size());
  return out;
}

}  // namespace relief

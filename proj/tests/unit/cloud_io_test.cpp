#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "expect.hpp"
#include "models.hpp"
#include "relief/cloud.hpp"
#include "relief/io.hpp"

using namespace relief;
namespace rt = relief::testing;

namespace {

double brute_mean_nn(const std::vector<Vec3>& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i != j) best = std::min(best, (p[i] - p[j]).norm());
    }
    sum += best;
  }
  return sum / static_cast<double>(p.size());
}

ReliefMesh small_mesh() {
  ReliefMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0.25), Vec3(0, 1, 0.5), Vec3(1, 1, 1.0 / 3.0)};
  m.normals = {Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ(), Vec3(0.6, 0, 0.8)};
  m.triangles = {{0, 1, 2}, {1, 3, 2}};
  return m;
}

}  // namespace

TEST(LoadCloud, XyzFourPoints) {
  std::istringstream in("0 0 0 0 0 1\n1 0 0 0 0 1\n0 1 0 0 0 1\n1 1 0 0 0 1\n");
  const PointCloud c = load_cloud(in, CloudFormat::XYZ);
  ASSERT_EQ(c.size(), 4u);
  for (const Vec3& n : c.normals()) EXPECT_EQ(n, Vec3::UnitZ());
  EXPECT_EQ(c.points()[3], Vec3(1, 1, 0));
}

TEST(LoadCloud, PlyNormalsAreRenormalized) {
  std::istringstream in(
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "property float nx\nproperty float ny\nproperty float nz\nend_header\n"
      "0 0 0 0 0 2\n1 0 0 0 0 2\n0 1 0 3 4 0\n1 1 0 0 0 2\n");
  const PointCloud c = load_cloud(in, CloudFormat::PLY);
  EXPECT_NEAR(c.normals()[0].z(), 1.0, 1e-15);
  EXPECT_NEAR(c.normals()[2].x(), 0.6, 1e-15);
  for (const Vec3& n : c.normals()) EXPECT_NEAR(n.norm(), 1.0, 1e-6);
}

TEST(LoadCloud, PlyWithoutNormalsIsRejected) {
  std::istringstream in(
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "end_header\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n");
  EXPECT_RELIEF_ERROR(load_cloud(in, CloudFormat::PLY), ErrorCode::MissingNormals);
}

TEST(LoadCloud, XyzWithoutNormalsIsRejected) {
  std::istringstream in("0 0 0\n1 0 0\n0 1 0\n1 1 0\n");
  EXPECT_RELIEF_ERROR(load_cloud(in, CloudFormat::XYZ), ErrorCode::MissingNormals);
}

TEST(LoadCloud, RejectsNonFiniteAndTooFew) {
  std::istringstream nan_in("0 0 0 0 0 1\n1 0 nan 0 0 1\n0 1 0 0 0 1\n1 1 0 0 0 1\n");
  EXPECT_RELIEF_ERROR(load_cloud(nan_in, CloudFormat::XYZ), ErrorCode::MalformedFile);
  std::istringstream three("0 0 0 0 0 1\n1 0 0 0 0 1\n0 1 0 0 0 1\n");
  EXPECT_RELIEF_ERROR(load_cloud(three, CloudFormat::XYZ), ErrorCode::TooFewPoints);
  std::istringstream garbage("ply\nformat ascii 1.0\nelement vertex 4\nend_header\n");
  EXPECT_RELIEF_ERROR(load_cloud(garbage, CloudFormat::PLY), ErrorCode::MalformedFile);
  std::istringstream truncated(
      "ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
      "property float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\nabc");
  EXPECT_RELIEF_ERROR(load_cloud(truncated, CloudFormat::PLY), ErrorCode::MalformedFile);
}

TEST(LoadCloud, BinaryPlyFloatAndDouble) {
  const auto dir = rt::scratch_dir("ply");
  const rt::Samples s = rt::plane_grid(5, 5, 0.5, 1.25);
  rt::write_ply(dir / "grid.ply", s);
  const PointCloud c = load_cloud(dir / "grid.ply");
  ASSERT_EQ(c.size(), 25u);
  EXPECT_EQ(c.points()[7], s.points[7]);

  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\ncomment doubles\nelement vertex 4\n"
      << "property double x\nproperty double y\nproperty double z\nproperty uchar flag\n"
      << "property double nx\nproperty double ny\nproperty double nz\nend_header\n";
  std::string bytes = hdr.str();
  for (int i = 0; i < 4; ++i) {
    const double v[3] = {0.1 * i, 0.2 * (i % 2), 1.0 / 3.0};
    const double n[3] = {0, 0, 1};
    bytes.append(reinterpret_cast<const char*>(v), sizeof v);
    bytes.push_back('\x07');
    bytes.append(reinterpret_cast<const char*>(n), sizeof n);
  }
  std::istringstream in(bytes);
  const PointCloud d = load_cloud(in, CloudFormat::PLY);
  EXPECT_EQ(d.points()[2].z(), 1.0 / 3.0);
  EXPECT_EQ(d.points()[3].x(), 0.1 * 3);
}

TEST(PointCloud, BoundingBoxAndDiagonal) {
  const PointCloud c = rt::plane_grid(3, 5, 1.0).cloud();
  EXPECT_DOUBLE_EQ(c.diagonal(), std::sqrt(2.0 * 2.0 + 4.0 * 4.0));
  for (const Vec3& p : c.points()) EXPECT_TRUE(c.bbox().contains(p));
}

TEST(EstimateDensity, UnitGridIsExactlyOne) {
  EXPECT_DOUBLE_EQ(estimate_density(rt::plane_grid(10, 10, 1.0).cloud()).rho, 1.0);
  EXPECT_DOUBLE_EQ(estimate_density(rt::plane_grid(17, 9, 0.125).cloud()).rho, 0.125);
}

TEST(EstimateDensity, TwoPoints) {
  EXPECT_DOUBLE_EQ(estimate_density(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(0.3, 0.4, 0)}).rho, 0.5);
  EXPECT_RELIEF_ERROR(estimate_density(std::vector<Vec3>{Vec3::Zero()}), ErrorCode::TooFewPoints);
}

TEST(EstimateDensity, MatchesQuadraticOracleOnRandomSquare) {
  std::vector<Vec3> p;
  for (const Vec2& q : rt::random_square(1000, 11)) p.emplace_back(q.x(), q.y(), 0.0);
  const double rho = estimate_density(p).rho;
  EXPECT_NEAR(rho, brute_mean_nn(p), 1e-12);
  EXPECT_NEAR(rho, 0.5 / std::sqrt(1000.0), 0.2 * 0.5 / std::sqrt(1000.0));
}

TEST(EstimateDensity, MatchesOracleOnClusteredInput) {
  std::mt19937 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> p;
  for (int i = 0; i < 600; ++i) p.emplace_back(g(rng), g(rng), 0.01 * g(rng));
  for (int i = 0; i < 200; ++i) p.emplace_back(50.0 + 0.001 * g(rng), 0.001 * g(rng), 0.0);
  EXPECT_NEAR(estimate_density(p).rho, brute_mean_nn(p), 1e-12);
}

TEST(SaveMesh, PlyHeaderCountsFaces) {
  ReliefMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.normals.assign(3, Vec3::UnitZ());
  m.triangles = {{0, 1, 2}};
  std::ostringstream out;
  save_mesh(m, out, MeshFormat::PLY);
  EXPECT_NE(out.str().find("element face 1\n"), std::string::npos);
  EXPECT_NE(out.str().find("element vertex 3\n"), std::string::npos);
}

TEST(SaveMesh, RoundTripsPlyAndObj) {
  const ReliefMesh m = small_mesh();
  for (MeshFormat f : {MeshFormat::PLY, MeshFormat::OBJ}) {
    std::stringstream io;
    save_mesh(m, io, f);
    const ReliefMesh back = load_mesh(io, f);
    ASSERT_EQ(back.vertices.size(), m.vertices.size());
    ASSERT_EQ(back.triangles.size(), m.triangles.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      EXPECT_LE((back.vertices[i] - m.vertices[i]).norm(), 1e-6 * std::max(1.0, m.vertices[i].norm()));
    }
    EXPECT_EQ(back.triangles, m.triangles);
  }
}

TEST(SaveMesh, RejectsEmptyMeshAndBadPath) {
  ReliefMesh m = small_mesh();
  m.triangles.clear();
  std::ostringstream out;
  EXPECT_RELIEF_ERROR(save_mesh(m, out, MeshFormat::PLY), ErrorCode::EmptyMesh);
  EXPECT_RELIEF_ERROR(save_mesh(small_mesh(), std::filesystem::path("/nonexistent-dir/x.ply")),
                      ErrorCode::IOFailure);
  EXPECT_RELIEF_ERROR(load_cloud(std::filesystem::path("/nonexistent-dir/x.ply")), ErrorCode::IOFailure);
}

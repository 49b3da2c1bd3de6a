#include "relief/io.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "relief/error.hpp"

namespace relief {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> parse_scalar_type(const std::string& name) {
  static const std::unordered_map<std::string, ScalarType> table = {
      {"char", ScalarType::Int8},      {"int8", ScalarType::Int8},
      {"uchar", ScalarType::UInt8},    {"uint8", ScalarType::UInt8},
      {"short", ScalarType::Int16},    {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16},  {"uint16", ScalarType::UInt16},
      {"int", ScalarType::Int32},      {"int32", ScalarType::Int32},
      {"uint", ScalarType::UInt32},    {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32},  {"float32", ScalarType::Float32},
      {"double", ScalarType::Float64}, {"float64", ScalarType::Float64},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

template <class T>
T read_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::Int8: return read_as<std::int8_t>(p);
    case ScalarType::UInt8: return read_as<std::uint8_t>(p);
    case ScalarType::Int16: return read_as<std::int16_t>(p);
    case ScalarType::UInt16: return read_as<std::uint16_t>(p);
    case ScalarType::Int32: return read_as<std::int32_t>(p);
    case ScalarType::UInt32: return read_as<std::uint32_t>(p);
    case ScalarType::Float32: return read_as<float>(p);
    case ScalarType::Float64: return read_as<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;

  int find(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

struct PlyData {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  bool has_normals = false;
  std::vector<Triangle> faces;
};

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFile, what); }

double parse_double(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) malformed("bad number '" + std::string(token) + "'");
  return v;
}

void append_polygon(std::vector<Triangle>& faces, const std::vector<std::int64_t>& idx,
                    std::size_t vertex_count) {
  if (idx.size() < 3) malformed("face with fewer than 3 vertices");
  for (std::int64_t i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= vertex_count) malformed("face index out of range");
  }
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
    faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                     static_cast<std::uint32_t>(idx[k + 1])});
  }
}

PlyData read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") malformed("missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  while (true) {
    if (!std::getline(in, line)) malformed("unterminated PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        malformed("unsupported PLY format '" + fmt + "'");
      }
      have_format = true;
    } else if (word == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) malformed("bad element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (word == "property") {
      if (elements.empty()) malformed("property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        auto c = parse_scalar_type(ct);
        auto i = parse_scalar_type(it);
        if (!c || !i) malformed("bad list property types");
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        auto t = parse_scalar_type(type);
        if (!t) malformed("unknown property type '" + type + "'");
        p.type = *t;
        ls >> p.name;
      }
      if (p.name.empty()) malformed("property without name");
      elements.back().properties.push_back(std::move(p));
    } else {
      malformed("unexpected header line '" + line + "'");
    }
  }
  if (!have_format) malformed("missing format line");

  PlyData data;
  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    int px = -1, py = -1, pz = -1, nx = -1, ny = -1, nz = -1, pf = -1;
    if (is_vertex) {
      px = e.find("x");
      py = e.find("y");
      pz = e.find("z");
      nx = e.find("nx");
      ny = e.find("ny");
      nz = e.find("nz");
      if (px < 0 || py < 0 || pz < 0) malformed("vertex element lacks x/y/z");
      data.has_normals = nx >= 0 && ny >= 0 && nz >= 0;
      data.positions.resize(e.count);
      if (data.has_normals) data.normals.resize(e.count);
    }
    if (is_face) {
      pf = e.find("vertex_indices");
      if (pf < 0) pf = e.find("vertex_index");
    }
    std::vector<double> scalars(e.properties.size());
    std::vector<std::int64_t> list;
    for (std::size_t row = 0; row < e.count; ++row) {
      if (binary) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const PlyProperty& p = e.properties[k];
          char buf[8];
          if (p.is_list) {
            if (!in.read(buf, static_cast<std::streamsize>(scalar_size(p.count_type)))) {
              malformed("truncated binary PLY");
            }
            const double n = decode_scalar(p.count_type, buf);
            if (n < 0) malformed("negative list length");
            list.clear();
            for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
              if (!in.read(buf, static_cast<std::streamsize>(scalar_size(p.type)))) {
                malformed("truncated binary PLY");
              }
              list.push_back(static_cast<std::int64_t>(decode_scalar(p.type, buf)));
            }
            if (static_cast<int>(k) == pf) append_polygon(data.faces, list, data.positions.size());
          } else {
            if (!in.read(buf, static_cast<std::streamsize>(scalar_size(p.type)))) {
              malformed("truncated binary PLY");
            }
            scalars[k] = decode_scalar(p.type, buf);
          }
        }
      } else {
        if (!std::getline(in, line)) malformed("truncated ascii PLY");
        std::istringstream ls(line);
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const PlyProperty& p = e.properties[k];
          std::string tok;
          if (p.is_list) {
            if (!(ls >> tok)) malformed("truncated list in ascii PLY");
            const double n = parse_double(tok);
            if (n < 0) malformed("negative list length");
            list.clear();
            for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
              if (!(ls >> tok)) malformed("truncated list in ascii PLY");
              list.push_back(static_cast<std::int64_t>(parse_double(tok)));
            }
            if (static_cast<int>(k) == pf) append_polygon(data.faces, list, data.positions.size());
          } else {
            if (!(ls >> tok)) malformed("too few values on ascii PLY row");
            scalars[k] = parse_double(tok);
          }
        }
      }
      if (is_vertex) {
        data.positions[row] = Vec3(scalars[px], scalars[py], scalars[pz]);
        if (data.has_normals) data.normals[row] = Vec3(scalars[nx], scalars[ny], scalars[nz]);
      }
    }
  }
  return data;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

PointCloud read_xyz(std::istream& in) {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    values.clear();
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (std::isspace(static_cast<unsigned char>(line[pos])) || line[pos] == ',')) ++pos;
      if (pos >= line.size() || line[pos] == '#') break;
      std::size_t end = pos;
      while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])) && line[end] != ',') ++end;
      values.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
      pos = end;
    }
    if (values.empty()) continue;
    if (values.size() == 3) {
      throw Error(ErrorCode::MissingNormals, "XYZ line " + std::to_string(line_no) + " has no normal columns");
    }
    if (values.size() < 6) malformed("XYZ line " + std::to_string(line_no) + " needs 6 columns");
    points.emplace_back(values[0], values[1], values[2]);
    normals.emplace_back(values[3], values[4], values[5]);
  }
  return PointCloud(std::move(points), std::move(normals));
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

void check_mesh(const ReliefMesh& mesh) {
  if (mesh.vertices.size() < 3 || mesh.triangles.empty()) {
    throw Error(ErrorCode::EmptyMesh, "mesh needs at least 3 vertices and 1 face");
  }
  if (!mesh.normals.empty() && mesh.normals.size() != mesh.vertices.size()) {
    throw Error(ErrorCode::InvalidArgument, "normal count differs from vertex count");
  }
}

ReliefMesh read_obj(std::istream& in) {
  ReliefMesh mesh;
  std::vector<Vec3> vn;
  std::vector<std::array<std::int64_t, 2>> corner;  // (position, normal)
  std::vector<std::vector<std::array<std::int64_t, 2>>> faces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v" || tag == "vn") {
      std::string a, b, c;
      if (!(ls >> a >> b >> c)) malformed("short OBJ vector record");
      Vec3 v(parse_double(a), parse_double(b), parse_double(c));
      (tag == "v" ? mesh.vertices : vn).push_back(v);
    } else if (tag == "f") {
      std::vector<std::array<std::int64_t, 2>> f;
      std::string tok;
      while (ls >> tok) {
        std::array<std::int64_t, 2> ref{0, 0};
        std::size_t s1 = tok.find('/');
        ref[0] = static_cast<std::int64_t>(parse_double(tok.substr(0, s1)));
        if (s1 != std::string::npos) {
          std::size_t s2 = tok.find('/', s1 + 1);
          if (s2 != std::string::npos && s2 + 1 < tok.size()) {
            ref[1] = static_cast<std::int64_t>(parse_double(tok.substr(s2 + 1)));
          }
        }
        f.push_back(ref);
      }
      faces.push_back(std::move(f));
    }
  }
  const auto resolve = [](std::int64_t i, std::size_t n) -> std::int64_t {
    return i < 0 ? static_cast<std::int64_t>(n) + i : i - 1;
  };
  if (vn.size() == mesh.vertices.size()) mesh.normals = vn;
  for (const auto& f : faces) {
    std::vector<std::int64_t> idx;
    for (const auto& ref : f) idx.push_back(resolve(ref[0], mesh.vertices.size()));
    append_polygon(mesh.triangles, idx, mesh.vertices.size());
  }
  return mesh;
}

}  // namespace

PointCloud load_cloud(std::istream& in, CloudFormat format) {
  if (format == CloudFormat::XYZ) return read_xyz(in);
  PlyData data = read_ply(in);
  if (!data.has_normals) throw Error(ErrorCode::MissingNormals, "PLY vertex element lacks nx/ny/nz");
  return PointCloud(std::move(data.positions), std::move(data.normals));
}

PointCloud load_cloud(const std::filesystem::path& path) {
  const CloudFormat format = cloud_format_for(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOFailure, "cannot open " + path.string());
  return load_cloud(in, format);
}

void save_mesh(const ReliefMesh& mesh, std::ostream& out, MeshFormat format) {
  check_mesh(mesh);
  const bool with_normals = !mesh.normals.empty();
  if (format == MeshFormat::PLY) {
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n";
    if (with_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar uint vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      out.write(reinterpret_cast<const char*>(mesh.vertices[i].data()), 3 * sizeof(double));
      if (with_normals) out.write(reinterpret_cast<const char*>(mesh.normals[i].data()), 3 * sizeof(double));
    }
    for (const Triangle& t : mesh.triangles) {
      const std::uint8_t n = 3;
      out.write(reinterpret_cast<const char*>(&n), 1);
      out.write(reinterpret_cast<const char*>(t.data()), 3 * sizeof(std::uint32_t));
    }
  } else {
    for (const Vec3& v : mesh.vertices) {
      out << "v ";
      write_number(out, v.x());
      out << ' ';
      write_number(out, v.y());
      out << ' ';
      write_number(out, v.z());
      out << '\n';
    }
    for (const Vec3& n : mesh.normals) {
      out << "vn ";
      write_number(out, n.x());
      out << ' ';
      write_number(out, n.y());
      out << ' ';
      write_number(out, n.z());
      out << '\n';
    }
    for (const Triangle& t : mesh.triangles) {
      out << 'f';
      for (std::uint32_t i : t) {
        out << ' ' << i + 1;
        if (with_normals) out << "//" << i + 1;
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IOFailure, "mesh write failed");
}

void save_mesh(const ReliefMesh& mesh, const std::filesystem::path& path) {
  const MeshFormat format = mesh_format_for(path);
  check_mesh(mesh);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot open " + path.string() + " for writing");
  save_mesh(mesh, out, format);
  out.flush();
  if (!out) throw Error(ErrorCode::IOFailure, "write to " + path.string() + " failed");
}

ReliefMesh load_mesh(std::istream& in, MeshFormat format) {
  if (format == MeshFormat::OBJ) return read_obj(in);
  PlyData data = read_ply(in);
  ReliefMesh mesh;
  mesh.vertices = std::move(data.positions);
  if (data.has_normals) mesh.normals = std::move(data.normals);
  mesh.triangles = std::move(data.faces);
  return mesh;
}

CloudFormat cloud_format_for(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ply") return CloudFormat::PLY;
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::XYZ;
  throw Error(ErrorCode::MalformedFile, "unknown cloud extension '" + ext + "'");
}

MeshFormat mesh_format_for(const std::filesystem::path& path) {
  return parse_mesh_format(lower_ext(path));
}

MeshFormat parse_mesh_format(std::string_view name) {
  if (!name.empty() && name.front() == '.') name.remove_prefix(1);
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ply") return MeshFormat::PLY;
  if (lower == "obj") return MeshFormat::OBJ;
  throw Error(ErrorCode::InvalidArgument, "unknown mesh format '" + std::string(name) + "'");
}

}  // namespace relief

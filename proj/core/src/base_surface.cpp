#include "relief/base_surface.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "relief/error.hpp"

namespace relief {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double number(std::string_view s, std::string_view what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, "bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

BaseSurface BaseSurface::plane(double z0) {
  BaseSurface b;
  b.kind_ = Kind::Plane;
  b.a_ = z0;
  return b;
}

BaseSurface BaseSurface::folded(double x0, double s1, double s2) {
  BaseSurface b;
  b.kind_ = Kind::FoldedPlane;
  b.a_ = x0;
  b.b_ = s1;
  b.c_ = s2;
  return b;
}

BaseSurface BaseSurface::wave(double amp, double freq, char axis) {
  if (axis != 'x' && axis != 'y') throw Error(ErrorCode::InvalidArgument, "wave axis must be x or y");
  BaseSurface b;
  b.kind_ = Kind::Wave;
  b.a_ = amp;
  b.b_ = freq;
  b.axis_ = axis;
  return b;
}

BaseSurface BaseSurface::heightfield(HeightGrid grid) {
  if (grid.nx < 1 || grid.ny < 1 || grid.z.size() != static_cast<std::size_t>(grid.nx) * grid.ny ||
      !(grid.cell > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "heightfield grid is malformed");
  }
  BaseSurface b;
  b.kind_ = Kind::Heightfield;
  b.grid_ = std::make_shared<const HeightGrid>(std::move(grid));
  return b;
}

BaseSurface BaseSurface::parse(std::string_view text) {
  const std::size_t colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  const auto parts = args.empty() ? std::vector<std::string_view>{} : split(args, ',');
  if (name == "plane") {
    if (parts.size() > 1) throw Error(ErrorCode::InvalidArgument, "plane takes at most one value");
    return plane(parts.empty() ? 0.0 : number(parts[0], "z0"));
  }
  if (name == "fold") {
    if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "fold expects x0,s1,s2");
    return folded(number(parts[0], "x0"), number(parts[1], "s1"), number(parts[2], "s2"));
  }
  if (name == "wave") {
    if (parts.size() != 3 || parts[2].size() != 1) {
      throw Error(ErrorCode::InvalidArgument, "wave expects amp,freq,axis");
    }
    return wave(number(parts[0], "amp"), number(parts[1], "freq"), parts[2][0]);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown base surface '" + std::string(name) + "'");
}

std::string BaseSurface::to_string() const {
  switch (kind_) {
    case Kind::Plane:
      return "plane:" + shortest(a_);
    case Kind::FoldedPlane:
      return "fold:" + shortest(a_) + "," + shortest(b_) + "," + shortest(c_);
    case Kind::Wave:
      return "wave:" + shortest(a_) + "," + shortest(b_) + "," + std::string(1, axis_);
    case Kind::Heightfield:
      return "heightfield:" + std::to_string(grid_->nx) + "x" + std::to_string(grid_->ny);
  }
  return {};
}

double BaseSurface::operator()(double x, double y) const {
  switch (kind_) {
    case Kind::Plane:
      return a_;
    case Kind::FoldedPlane:
      return (x < a_ ? b_ : c_) * (x - a_);
    case Kind::Wave:
      return a_ * std::sin(b_ * (axis_ == 'x' ? x : y));
    case Kind::Heightfield: {
      const HeightGrid& g = *grid_;
      const double fx = std::clamp((x - g.origin.x()) / g.cell, 0.0, static_cast<double>(g.nx - 1));
      const double fy = std::clamp((y - g.origin.y()) / g.cell, 0.0, static_cast<double>(g.ny - 1));
      const int i = std::min(static_cast<int>(fx), std::max(g.nx - 2, 0));
      const int j = std::min(static_cast<int>(fy), std::max(g.ny - 2, 0));
      const int i1 = std::min(i + 1, g.nx - 1);
      const int j1 = std::min(j + 1, g.ny - 1);
      const double u = fx - i;
      const double v = fy - j;
      const auto at = [&](int a, int b) { return g.z[static_cast<std::size_t>(b) * g.nx + a]; };
      return (1 - v) * ((1 - u) * at(i, j) + u * at(i1, j)) + v * ((1 - u) * at(i, j1) + u * at(i1, j1));
    }
  }
  return 0.0;
}

bool BaseSurface::operator==(const BaseSurface& o) const {
  if (kind_ != o.kind_) return false;
  if (kind_ == Kind::Heightfield) {
    return grid_ == o.grid_ || (grid_->origin == o.grid_->origin && grid_->cell == o.grid_->cell &&
                                grid_->nx == o.grid_->nx && grid_->ny == o.grid_->ny && grid_->z == o.grid_->z);
  }
  return a_ == o.a_ && b_ == o.b_ && c_ == o.c_ && axis_ == o.axis_;
}

}  // namespace relief

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace relief {

/// Uniform-grid bucket index over a fixed point set in 2 or 3 dimensions.
/// Points are bucketed once; radius and k-nearest queries scan rings of
/// cells around the query.
template <int Dim>
class GridIndex {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Cell = Eigen::Matrix<std::int64_t, Dim, 1>;

  GridIndex() = default;

  GridIndex(std::span<const Point> points, double cell_size) : points_(points), cell_(cell_size) {
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) cell_ = 1.0;
    inv_cell_ = 1.0 / cell_;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      keyed[i] = {key(cell_of(points[i])), static_cast<std::uint32_t>(i)};
    }
    std::sort(keyed.begin(), keyed.end());
    cell_lo_.setConstant(std::numeric_limits<std::int64_t>::max());
    cell_hi_.setConstant(std::numeric_limits<std::int64_t>::min());
    for (const Point& p : points) {
      const Cell c = cell_of(p);
      cell_lo_ = cell_lo_.cwiseMin(c);
      cell_hi_ = cell_hi_.cwiseMax(c);
    }
    order_.resize(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      order_[i] = keyed[i].second;
      if (i == 0 || keyed[i].first != keyed[i - 1].first) {
        ranges_.emplace(keyed[i].first, std::pair<std::uint32_t, std::uint32_t>(i, i));
      }
      ranges_[keyed[i].first].second = static_cast<std::uint32_t>(i + 1);
    }
  }

  double cell_size() const noexcept { return cell_; }
  std::size_t size() const noexcept { return points_.size(); }

  Cell cell_of(const Point& p) const {
    Cell c;
    for (int d = 0; d < Dim; ++d) c[d] = static_cast<std::int64_t>(std::floor(p[d] * inv_cell_));
    return c;
  }

  /// Indices stored in one cell (possibly empty).
  std::span<const std::uint32_t> bucket(const Cell& c) const {
    auto it = ranges_.find(key(c));
    if (it == ranges_.end()) return {};
    return std::span<const std::uint32_t>(order_).subspan(it->second.first,
                                                          it->second.second - it->second.first);
  }

  /// Calls f(index, squared_distance) for every point within `radius` of q.
  template <class F>
  void for_each_in_radius(const Point& q, double radius, F&& f) const {
    const double r2 = radius * radius;
    Cell lo, hi;
    for (int d = 0; d < Dim; ++d) {
      lo[d] = static_cast<std::int64_t>(std::floor((q[d] - radius) * inv_cell_));
      hi[d] = static_cast<std::int64_t>(std::floor((q[d] + radius) * inv_cell_));
    }
    Cell c = lo;
    while (true) {
      for (std::uint32_t i : bucket(c)) {
        const double d2 = (points_[i] - q).squaredNorm();
        if (d2 <= r2) f(i, d2);
      }
      int d = 0;
      for (; d < Dim; ++d) {
        if (++c[d] <= hi[d]) break;
        c[d] = lo[d];
      }
      if (d == Dim) break;
    }
  }

  /// The k nearest points to q ordered by distance (ties by index),
  /// skipping `exclude`. Returns fewer than k only if the set is smaller.
  std::vector<std::uint32_t> k_nearest(const Point& q, std::size_t k,
                                       std::uint32_t exclude = kNone) const {
    std::vector<std::pair<double, std::uint32_t>> best;
    best.reserve(k + 1);
    const std::size_t available = points_.size() - (exclude < points_.size() ? 1 : 0);
    k = std::min(k, available);
    if (k == 0) return {};
    const Cell centre = cell_of(q);
    std::int64_t last_ring = 0;
    for (int d = 0; d < Dim; ++d) {
      last_ring = std::max({last_ring, centre[d] - cell_lo_[d], cell_hi_[d] - centre[d]});
    }
    for (std::int64_t ring = 0;; ++ring) {
      visit_ring(centre, ring, [&](std::uint32_t i) {
        if (i == exclude) return;
        const double d2 = (points_[i] - q).squaredNorm();
        std::pair<double, std::uint32_t> cand{d2, i};
        if (best.size() < k) {
          best.push_back(cand);
          std::push_heap(best.begin(), best.end());
        } else if (cand < best.front()) {
          std::pop_heap(best.begin(), best.end());
          best.back() = cand;
          std::push_heap(best.begin(), best.end());
        }
      });
      if (best.size() == k) {
        const double reach = static_cast<double>(ring) * cell_;
        if (best.front().first <= reach * reach) break;
      }
      if (ring >= last_ring) break;
    }
    std::sort_heap(best.begin(), best.end());
    std::vector<std::uint32_t> out(best.size());
    for (std::size_t i = 0; i < best.size(); ++i) out[i] = best[i].second;
    return out;
  }

  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

 private:
  static std::uint64_t key(const Cell& c) {
    constexpr int bits = 64 / Dim;
    constexpr std::int64_t bias = std::int64_t{1} << (bits - 1);
    constexpr std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    std::uint64_t k = 0;
    for (int d = 0; d < Dim; ++d) {
      k = (k << bits) | (static_cast<std::uint64_t>(c[d] + bias) & mask);
    }
    return k;
  }

  template <class F>
  void visit_ring(const Cell& centre, std::int64_t ring, F&& f) const {
    const Cell shell_lo = centre.array() - ring;
    const Cell shell_hi = centre.array() + ring;
    const Cell lo = shell_lo.cwiseMax(cell_lo_);
    const Cell hi = shell_hi.cwiseMin(cell_hi_);
    for (int d = 0; d < Dim; ++d) {
      if (lo[d] > hi[d]) return;
    }
    Cell c = lo;
    while (true) {
      bool on_shell = false;
      for (int d = 0; d < Dim; ++d) on_shell |= (c[d] == shell_lo[d] || c[d] == shell_hi[d]);
      if (on_shell) {
        for (std::uint32_t i : bucket(c)) f(i);
      }
      int d = 0;
      for (; d < Dim; ++d) {
        if (++c[d] <= hi[d]) break;
        c[d] = lo[d];
      }
      if (d == Dim) break;
    }
  }

  std::span<const Point> points_;
  double cell_ = 1.0;
  double inv_cell_ = 1.0;
  std::vector<std::uint32_t> order_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> ranges_;
  Cell cell_lo_ = Cell::Zero();
  Cell cell_hi_ = Cell::Zero();
};

using GridIndex2 = GridIndex<2>;
using GridIndex3 = GridIndex<3>;

}  // namespace relief

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "relief/base_surface.hpp"
#include "relief/cloud.hpp"
#include "relief/control_sampling.hpp"

namespace relief {

inline constexpr double kDefaultBoundaryWeight = 10.0;

class NormalEquationsFactor;

/// Over-determined height system. One row per directed neighbour pair
/// (p, q) with +1 at p and -1 at q, then one row lambda_b at each
/// boundary node. The matrix never depends on the relief parameters, so
/// A^T A is factored once and reused by every solve.
struct LinearSystem {
  std::vector<Vec2> xy;
  std::vector<std::uint32_t> row_p;
  std::vector<std::uint32_t> row_q;
  std::vector<std::uint32_t> boundary_nodes;
  double lambda_b = kDefaultBoundaryWeight;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  std::shared_ptr<const NormalEquationsFactor> factor;

  std::size_t node_count() const noexcept { return xy.size(); }
  std::size_t normal_rows() const noexcept { return row_p.size(); }
};

/// Builds and factors the system for an arbitrary node set. Throws
/// FloatingComponent when a connected component of the (undirected)
/// graph has no boundary node, FactorizationFailure otherwise.
LinearSystem assemble_system(std::span<const Vec2> xy, const NeighborGraph& graph,
                             std::span<const std::uint8_t> is_boundary,
                             double lambda_b = kDefaultBoundaryWeight);

LinearSystem assemble_system(const ControlSet& controls, double lambda_b = kDefaultBoundaryWeight);

/// Right-hand side B: -(n_x dx + n_y dy) / max(n_z, floor) for normal
/// rows, lambda_b z_b at boundary rows.
Eigen::VectorXd assemble_rhs(const LinearSystem& sys, std::span<const Vec3> n_tilde, const BaseSurface& base);

struct HeightSolution {
  std::vector<double> z;
  double span = 0.0;
};

/// Least-squares heights through the retained factorization.
HeightSolution solve_heights(const LinearSystem& sys, std::span<const Vec3> n_tilde, const BaseSurface& base);

/// max(z - z_b) over the nodes, never below 0.
double height_span(std::span<const double> z, std::span<const Vec2> xy, const BaseSurface& base);

/// Sparse Cholesky factor of A^T A with a fill-reducing ordering chosen
/// at construction. Immutable afterwards; solve() is thread-safe.
class NormalEquationsFactor {
 public:
  explicit NormalEquationsFactor(const Eigen::SparseMatrix<double>& normal_matrix);
  ~NormalEquationsFactor();
  NormalEquationsFactor(const NormalEquationsFactor&) = delete;
  NormalEquationsFactor& operator=(const NormalEquationsFactor&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Fill-reducing permutation, for immutability checks.
  std::vector<int> ordering() const;
  std::size_t factor_nonzeros() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relief

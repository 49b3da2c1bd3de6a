#include "relief/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "relief/compression.hpp"
#include "relief/error.hpp"

namespace relief {

struct NormalEquationsFactor::Impl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

NormalEquationsFactor::NormalEquationsFactor(const Eigen::SparseMatrix<double>& normal_matrix)
    : impl_(std::make_unique<Impl>()) {
  impl_->llt.compute(normal_matrix);
  if (impl_->llt.info() != Eigen::Success) {
    throw Error(ErrorCode::FactorizationFailure, "Cholesky factorization of the normal equations failed");
  }
}

NormalEquationsFactor::~NormalEquationsFactor() = default;

Eigen::VectorXd NormalEquationsFactor::solve(const Eigen::VectorXd& rhs) const { return impl_->llt.solve(rhs); }

std::vector<int> NormalEquationsFactor::ordering() const {
  const auto& p = impl_->llt.permutationP().indices();
  return std::vector<int>(p.data(), p.data() + p.size());
}

std::size_t NormalEquationsFactor::factor_nonzeros() const {
  return static_cast<std::size_t>(impl_->llt.matrixL().nestedExpression().nonZeros());
}

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void check_anchored(std::size_t n, const NeighborGraph& graph, std::span<const std::uint8_t> is_boundary) {
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  for (std::size_t p = 0; p < graph.node_count(); ++p) {
    for (std::uint32_t q : graph.of(p)) {
      const std::uint32_t a = find_root(parent, static_cast<std::uint32_t>(p));
      const std::uint32_t b = find_root(parent, q);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::uint8_t> anchored(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_boundary[i]) anchored[find_root(parent, static_cast<std::uint32_t>(i))] = 1;
  }
  std::size_t floating = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (find_root(parent, static_cast<std::uint32_t>(i)) == i && !anchored[i]) ++floating;
  }
  if (floating > 0) {
    throw Error(ErrorCode::FloatingComponent,
                std::to_string(floating) + " connected component(s) have no boundary point");
  }
}

}  // namespace

LinearSystem assemble_system(std::span<const Vec2> xy, const NeighborGraph& graph,
                             std::span<const std::uint8_t> is_boundary, double lambda_b) {
  const std::size_t n = xy.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty node set");
  if (is_boundary.size() != n || (n > 1 && graph.node_count() != n)) {
    throw Error(ErrorCode::InvalidArgument, "graph/boundary sizes do not match the node set");
  }
  if (!(lambda_b > 0.0)) throw Error(ErrorCode::InvalidArgument, "boundary weight must be positive");
  check_anchored(n, graph, is_boundary);

  LinearSystem sys;
  sys.xy.assign(xy.begin(), xy.end());
  sys.lambda_b = lambda_b;
  for (std::size_t p = 0; p < graph.node_count(); ++p) {
    for (std::uint32_t q : graph.of(p)) {
      sys.row_p.push_back(static_cast<std::uint32_t>(p));
      sys.row_q.push_back(q);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (is_boundary[i]) sys.boundary_nodes.push_back(static_cast<std::uint32_t>(i));
  }

  const std::size_t rows = sys.row_p.size() + sys.boundary_nodes.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * sys.row_p.size() + sys.boundary_nodes.size());
  for (std::size_t r = 0; r < sys.row_p.size(); ++r) {
    trip.emplace_back(static_cast<int>(r), static_cast<int>(sys.row_p[r]), 1.0);
    trip.emplace_back(static_cast<int>(r), static_cast<int>(sys.row_q[r]), -1.0);
  }
  for (std::size_t b = 0; b < sys.boundary_nodes.size(); ++b) {
    trip.emplace_back(static_cast<int>(sys.row_p.size() + b), static_cast<int>(sys.boundary_nodes[b]), lambda_b);
  }
  sys.A.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.A.makeCompressed();

  const Eigen::SparseMatrix<double> normal = Eigen::SparseMatrix<double>(sys.A.transpose()) * sys.A;
  sys.factor = std::make_shared<const NormalEquationsFactor>(normal);
  return sys;
}

LinearSystem assemble_system(const ControlSet& controls, double lambda_b) {
  return assemble_system(controls.xy, controls.graph, controls.is_boundary, lambda_b);
}

namespace {

// Height step p - q implied by the normal at p.
double normal_row_rhs(const LinearSystem& sys, std::span<const Vec3> n_tilde, std::size_t r) {
  const Vec3& n = n_tilde[sys.row_p[r]];
  const Vec2 d = sys.xy[sys.row_p[r]] - sys.xy[sys.row_q[r]];
  return -(n.x() * d.x() + n.y() * d.y()) / std::max(n.z(), kNormalZFloor);
}

}  // namespace

Eigen::VectorXd assemble_rhs(const LinearSystem& sys, std::span<const Vec3> n_tilde, const BaseSurface& base) {
  if (n_tilde.size() != sys.node_count()) {
    throw Error(ErrorCode::InvalidArgument, "normal count does not match the system");
  }
  Eigen::VectorXd b(static_cast<Eigen::Index>(sys.row_p.size() + sys.boundary_nodes.size()));
  for (std::size_t r = 0; r < sys.row_p.size(); ++r) {
    b[static_cast<Eigen::Index>(r)] = normal_row_rhs(sys, n_tilde, r);
  }
  for (std::size_t k = 0; k < sys.boundary_nodes.size(); ++k) {
    b[static_cast<Eigen::Index>(sys.row_p.size() + k)] = sys.lambda_b * base(sys.xy[sys.boundary_nodes[k]]);
  }
  return b;
}

HeightSolution solve_heights(const LinearSystem& sys, std::span<const Vec3> n_tilde, const BaseSurface& base) {
  if (n_tilde.size() != sys.node_count()) {
    throw Error(ErrorCode::InvalidArgument, "normal count does not match the system");
  }
  // A^T B accumulated row by row; A has +1/-1 normal rows and lambda_b
  // boundary rows, so this avoids materializing B.
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.node_count()));
  for (std::size_t r = 0; r < sys.row_p.size(); ++r) {
    const double v = normal_row_rhs(sys, n_tilde, r);
    atb[sys.row_p[r]] += v;
    atb[sys.row_q[r]] -= v;
  }
  const double l2 = sys.lambda_b * sys.lambda_b;
  for (std::uint32_t i : sys.boundary_nodes) atb[i] += l2 * base(sys.xy[i]);

  const Eigen::VectorXd x = sys.factor->solve(atb);
  HeightSolution sol;
  sol.z.assign(x.data(), x.data() + x.size());
  for (double v : sol.z) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteSolution, "height solve produced a non-finite value");
  }
  sol.span = height_span(sol.z, sys.xy, base);
  return sol;
}

double height_span(std::span<const double> z, std::span<const Vec2> xy, const BaseSurface& base) {
  double h = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) h = std::max(h, z[i] - base(xy[i]));
  return h;
}

}  // namespace relief

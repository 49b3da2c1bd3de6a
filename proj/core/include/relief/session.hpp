#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "relief/cloud.hpp"
#include "relief/compression.hpp"
#include "relief/control_sampling.hpp"
#include "relief/curvature.hpp"
#include "relief/height_mapping.hpp"
#include "relief/mesh.hpp"
#include "relief/solver.hpp"
#include "relief/triangulation.hpp"
#include "relief/viewprep.hpp"

namespace relief {

struct SessionConfig {
  ReliefParams params;
  std::size_t control_target = 8000;
  int mbs_levels = 8;
  double lambda_b = kDefaultBoundaryWeight;
  /// Run every adjust sequentially with no one-step lag.
  bool reference_mode = false;
  std::optional<std::chrono::milliseconds> prepare_timeout;
};

struct PrepareTimings {
  double align_ms = 0.0;
  double visible_ms = 0.0;
  double boundary_ms = 0.0;
  double curvature_ms = 0.0;
  double sampling_ms = 0.0;
  double assemble_ms = 0.0;
  double reference_ms = 0.0;
  double triangulate_ms = 0.0;
  double total_ms = 0.0;
};

/// Mapped, detail-enhanced heights with refreshed normals for one
/// parameter set; parallel to the visible points.
struct FrameGeometry {
  ReliefParams params;
  std::vector<double> z;
  std::vector<Vec3> normals;
  /// Span of the mapped heights before and after detail enhancement.
  double mapped_span = 0.0;
  double final_span = 0.0;
  double map_ms = 0.0;
  double normals_ms = 0.0;
};

struct FrameResult {
  std::uint64_t seq = 0;
  std::shared_ptr<const FrameGeometry> geometry;
  /// Parameters of the most recent control solve and its span.
  ReliefParams params;
  double span = 0.0;
  double solve_ms = 0.0;
  double map_ms = 0.0;
  double normals_ms = 0.0;
  bool error = false;
  std::string error_message;
};

/// Control solve for one parameter set.
struct ControlSolution {
  ReliefParams params;
  HeightSolution heights;
  double solve_ms = 0.0;
};

/// Prepared relief state for one cloud and view direction. Everything
/// built by prepare() is immutable afterwards; adjust() only swaps frame
/// snapshots. adjust() and export_mesh() serialize on an internal mutex.
class Session {
 public:
  static std::unique_ptr<Session> prepare(const PointCloud& cloud, const Vec3& view_direction,
                                          SessionConfig config = {});

  /// Solves the controls at `params` while mapping the previous solve, and
  /// returns the previous solve's geometry with the new span. In
  /// reference mode both happen in sequence for the same parameters.
  std::shared_ptr<const FrameResult> adjust(const ReliefParams& params);

  /// Maps the latest solve (no lag) and returns it as a mesh.
  ReliefMesh export_mesh();
  /// Geometry for the latest parameters, mapping it now if needed.
  std::shared_ptr<const FrameGeometry> drain();

  std::shared_ptr<const FrameResult> latest_frame() const;
  ReliefParams current_params() const;

  /// One control solve, no side effects. Thread-safe.
  ControlSolution solve_controls(const ReliefParams& params) const;
  /// Full mapping of a control solution. Thread-safe.
  std::shared_ptr<const FrameGeometry> map_solution(const ControlSolution& sol) const;

  const PointCloud& aligned_cloud() const noexcept { return aligned_; }
  const ViewFrame& view_frame() const noexcept { return frame_; }
  SamplingDensity density() const noexcept { return rho_; }
  double diagonal() const noexcept { return aligned_.diagonal(); }
  const VisibleSet& visible() const noexcept { return vis_; }
  const BoundaryInfo& boundary() const noexcept { return bnd_; }
  const CurvatureField& curvature() const noexcept { return curv_; }
  const ControlSet& controls() const noexcept { return controls_; }
  const LinearSystem& control_system() const noexcept { return control_sys_; }
  const ReferenceRelief& prepared_reference() const noexcept { return reference_; }
  const MeshTopology& topology() const noexcept { return topo_; }
  const PrepareTimings& timings() const noexcept { return timings_; }
  const SessionConfig& config() const noexcept { return config_; }

  /// Hash over A, the factor ordering, z_ref and the triangles.
  std::uint64_t prepared_fingerprint() const;

 private:
  Session() = default;

  std::shared_ptr<const ReferenceRelief> reference_for(const BaseSurface& base) const;

  SessionConfig config_;
  PointCloud aligned_;
  ViewFrame frame_;
  SamplingDensity rho_;
  VisibleSet vis_;
  BoundaryInfo bnd_;
  CurvatureField curv_;
  ControlSet controls_;
  LinearSystem control_sys_;
  LinearSystem visible_sys_;
  std::vector<Vec3> visible_normals_;
  ReferenceRelief reference_;
  MeshTopology topo_;
  PrepareTimings timings_;

  mutable std::mutex reference_mutex_;
  mutable std::shared_ptr<const ReferenceRelief> alt_reference_;
  mutable BaseSurface alt_base_;

  mutable std::mutex mutex_;
  std::shared_ptr<const ControlSolution> pending_;
  std::shared_ptr<const FrameGeometry> pending_geometry_;  // mapping of pending_, if done
  std::shared_ptr<const FrameResult> latest_;
  std::uint64_t seq_ = 0;
};

}  // namespace relief

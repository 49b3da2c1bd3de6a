#include "relief/session.hpp"

#include <algorithm>
#include <cstring>
#include <future>

#include "relief/error.hpp"

namespace relief {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class Fnv1a {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 1099511628211ull;
    }
  }
  template <typename T>
  void range(const T* p, std::size_t n) {
    bytes(p, n * sizeof(T));
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

}  // namespace

std::unique_ptr<Session> Session::prepare(const PointCloud& cloud, const Vec3& view_direction,
                                          SessionConfig config) {
  config.params.validate();
  if (config.mbs_levels < 1 || config.mbs_levels > 16) {
    throw Error(ErrorCode::InvalidArgument, "MBS level count must lie in [1, 16]");
  }
  std::unique_ptr<Session> s(new Session());
  s->config_ = config;
  const Clock::time_point start = Clock::now();
  auto check_deadline = [&](const char* stage) {
    if (config.prepare_timeout && Clock::now() - start > *config.prepare_timeout) {
      throw Error(ErrorCode::PrepareTimeout, std::string("prepare exceeded its time budget during ") + stage);
    }
  };

  Clock::time_point t = Clock::now();
  auto [aligned, frame] = align_view(cloud, view_direction);
  s->aligned_ = std::move(aligned);
  s->frame_ = frame;
  s->rho_ = estimate_density(s->aligned_);
  s->timings_.align_ms = ms_since(t);
  check_deadline("alignment");

  t = Clock::now();
  s->vis_ = detect_visible(s->aligned_, s->rho_);
  s->timings_.visible_ms = ms_since(t);
  check_deadline("visibility");

  t = Clock::now();
  s->bnd_ = detect_boundary(s->vis_, s->rho_);
  s->timings_.boundary_ms = ms_since(t);
  check_deadline("boundary detection");

  t = Clock::now();
  s->curv_ = normalize_curvature(
      mean_curvature_field(s->aligned_, s->vis_.indices, MLSConfig::for_density(s->rho_)));
  s->timings_.curvature_ms = ms_since(t);
  check_deadline("curvature");

  t = Clock::now();
  if (config.control_target >= s->vis_.size()) {
    s->controls_ = all_visible_controls(s->aligned_, s->vis_, s->bnd_, s->curv_, s->rho_);
  } else {
    s->controls_ = sample_controls(s->aligned_, s->vis_, s->bnd_, s->curv_, s->rho_, config.control_target);
  }
  s->timings_.sampling_ms = ms_since(t);
  check_deadline("control sampling");

  t = Clock::now();
  s->control_sys_ = assemble_system(s->controls_, config.lambda_b);
  s->timings_.assemble_ms = ms_since(t);
  check_deadline("assembly");

  t = Clock::now();
  s->visible_normals_.resize(s->vis_.size());
  for (std::size_t i = 0; i < s->vis_.size(); ++i) {
    s->visible_normals_[i] = s->aligned_.normals()[s->vis_.indices[i]];
  }
  const NeighborGraph vis_graph = build_neighbor_graph(s->vis_.xy, 6);
  s->visible_sys_ = assemble_system(s->vis_.xy, vis_graph, s->bnd_.is_boundary, config.lambda_b);
  s->reference_ = build_reference(s->visible_sys_, s->visible_normals_, s->bnd_, config.params.base, s->rho_.rho);
  s->timings_.reference_ms = ms_since(t);
  check_deadline("reference relief");

  t = Clock::now();
  s->topo_ = triangulate_xy(s->vis_.xy, 4.0 * s->rho_.rho);
  s->timings_.triangulate_ms = ms_since(t);
  s->timings_.total_ms = ms_since(start);
  check_deadline("triangulation");

  // Initial frame at the configured parameters, fully mapped.
  auto sol = std::make_shared<const ControlSolution>(s->solve_controls(config.params));
  auto geom = s->map_solution(*sol);
  auto fr = std::make_shared<FrameResult>();
  fr->seq = 0;
  fr->geometry = geom;
  fr->params = sol->params;
  fr->span = sol->heights.span;
  fr->solve_ms = sol->solve_ms;
  fr->map_ms = geom->map_ms;
  fr->normals_ms = geom->normals_ms;
  s->pending_ = std::move(sol);
  s->pending_geometry_ = std::move(geom);
  s->latest_ = std::move(fr);
  return s;
}

std::shared_ptr<const ReferenceRelief> Session::reference_for(const BaseSurface& base) const {
  std::lock_guard lock(reference_mutex_);
  if (base == config_.params.base) {
    return std::shared_ptr<const ReferenceRelief>(std::shared_ptr<const ReferenceRelief>{}, &reference_);
  }
  if (!alt_reference_ || !(alt_base_ == base)) {
    alt_reference_ = std::make_shared<const ReferenceRelief>(
        build_reference(visible_sys_, visible_normals_, bnd_, base, rho_.rho));
    alt_base_ = base;
  }
  return alt_reference_;
}

ControlSolution Session::solve_controls(const ReliefParams& params) const {
  params.validate();
  const Clock::time_point t = Clock::now();
  ControlSolution sol;
  sol.params = params;
  const std::vector<Vec3> nt = compress_normals(controls_, params, rho_.rho);
  sol.heights = solve_heights(control_sys_, nt, params.base);
  sol.solve_ms = ms_since(t);
  return sol;
}

std::shared_ptr<const FrameGeometry> Session::map_solution(const ControlSolution& sol) const {
  const Clock::time_point t0 = Clock::now();
  const auto ref = reference_for(sol.params.base);
  const BaseSurface& base = sol.params.base;
  auto geom = std::make_shared<FrameGeometry>();
  geom->params = sol.params;

  std::vector<double> zref_controls(controls_.size());
  for (std::size_t c = 0; c < controls_.size(); ++c) zref_controls[c] = ref->z_ref[controls_.indices[c]];
  const RatioSamples samples = control_ratios(controls_, sol.heights.z, zref_controls, base, ref->h_ref);
  const RatioField field =
      RatioField::fit(samples.sites, samples.values, ratio_domain(vis_.xy, 2.0 * rho_.rho), config_.mbs_levels);
  std::vector<double> z = map_heights(vis_.xy, ref->z_ref, field, base);
  geom->mapped_span = height_span(z, vis_.xy, base);
  geom->z = enhance_details(z, curv_.k_norm, curv_.degenerate, sol.params.gamma, geom->mapped_span);
  geom->final_span = height_span(geom->z, vis_.xy, base);
  geom->map_ms = ms_since(t0);

  const Clock::time_point t1 = Clock::now();
  geom->normals = update_normals(topo_, vis_.xy, geom->z);
  geom->normals_ms = ms_since(t1);
  return geom;
}

std::shared_ptr<const FrameResult> Session::adjust(const ReliefParams& params) {
  std::lock_guard lock(mutex_);
  auto fr = std::make_shared<FrameResult>();
  try {
    params.validate();
    std::shared_ptr<const ControlSolution> sol;
    std::shared_ptr<const FrameGeometry> geom;
    if (config_.reference_mode) {
      sol = std::make_shared<const ControlSolution>(solve_controls(params));
      geom = map_solution(*sol);
    } else {
      // Solve the new parameters while the previous solve is mapped.
      std::shared_ptr<const ControlSolution> prev = pending_;
      std::shared_ptr<const FrameGeometry> prev_geom = pending_geometry_;
      std::future<std::shared_ptr<const FrameGeometry>> mapped;
      if (!prev_geom) {
        mapped = std::async(std::launch::async, [this, prev] { return map_solution(*prev); });
      }
      sol = std::make_shared<const ControlSolution>(solve_controls(params));
      geom = prev_geom ? prev_geom : mapped.get();
    }
    fr->seq = ++seq_;
    fr->geometry = geom;
    fr->params = sol->params;
    fr->span = sol->heights.span;
    fr->solve_ms = sol->solve_ms;
    fr->map_ms = geom->map_ms;
    fr->normals_ms = geom->normals_ms;
    pending_ = std::move(sol);
    pending_geometry_ = config_.reference_mode ? geom : nullptr;
  } catch (const std::exception& e) {
    *fr = *latest_;
    fr->seq = ++seq_;
    fr->error = true;
    fr->error_message = e.what();
  }
  latest_ = fr;
  return fr;
}

std::shared_ptr<const FrameGeometry> Session::drain() {
  std::lock_guard lock(mutex_);
  if (!pending_) throw Error(ErrorCode::NoFrameYet, "no frame has been produced");
  if (!pending_geometry_) pending_geometry_ = map_solution(*pending_);
  return pending_geometry_;
}

ReliefMesh Session::export_mesh() {
  const auto geom = drain();
  ReliefMesh mesh;
  mesh.vertices.resize(vis_.size());
  for (std::size_t i = 0; i < vis_.size(); ++i) mesh.vertices[i] = Vec3(vis_.xy[i].x(), vis_.xy[i].y(), geom->z[i]);
  mesh.normals = geom->normals;
  mesh.triangles = topo_.triangles;
  return mesh;
}

std::shared_ptr<const FrameResult> Session::latest_frame() const {
  std::lock_guard lock(mutex_);
  return latest_;
}

ReliefParams Session::current_params() const {
  std::lock_guard lock(mutex_);
  return pending_ ? pending_->params : config_.params;
}

std::uint64_t Session::prepared_fingerprint() const {
  Fnv1a h;
  const auto& A = control_sys_.A;
  h.range(A.valuePtr(), static_cast<std::size_t>(A.nonZeros()));
  h.range(A.innerIndexPtr(), static_cast<std::size_t>(A.nonZeros()));
  h.range(A.outerIndexPtr(), static_cast<std::size_t>(A.outerSize() + 1));
  const std::vector<int> ord = control_sys_.factor->ordering();
  h.range(ord.data(), ord.size());
  h.range(reference_.z_ref.data(), reference_.z_ref.size());
  h.range(topo_.triangles.data(), topo_.triangles.size());
  return h.value();
}

}  // namespace relief

// relief: batch front end. gen, target, info and serve.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "relief/error.hpp"
#include "relief/height_target.hpp"
#include "relief/io.hpp"
#include "relief/session.hpp"
#include "relief_service/params_json.hpp"
#include "relief_service/service.hpp"

namespace {

using namespace relief;
using json = nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kPipeline = 3 };

struct Common {
  std::string input;
  std::string output;
  std::vector<double> view = {0.0, 0.0, 1.0};
  ReliefParams params;
  std::string base = "plane";
  std::size_t controls = 8000;
  int levels = 8;
  bool reference_mode = false;
  bool timings = false;
};

void add_input(CLI::App* cmd, Common& c) {
  cmd->add_option("-i,--input", c.input, "Oriented point cloud (.ply, .xyz)")->required();
}

void add_knobs(CLI::App* cmd, Common& c) {
  cmd->add_option("--view", c.view, "View direction x,y,z")->delimiter(',')->expected(3)->capture_default_str();
  cmd->add_option("--alpha", c.params.alpha, "Compression strength")->capture_default_str();
  cmd->add_option("--beta", c.params.beta, "Saturation")->capture_default_str();
  cmd->add_option("--gamma", c.params.gamma, "Detail enhancement")->capture_default_str();
  cmd->add_option("--base", c.base, "plane[:z0] | fold:x0,s1,s2 | wave:amp,freq,axis")->capture_default_str();
  cmd->add_option("--controls", c.controls, "Control point target")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--levels", c.levels, "B-spline levels for height mapping")->capture_default_str()->check(CLI::Range(1, 16));
  cmd->add_flag("--reference-mode", c.reference_mode, "Run every stage sequentially");
  cmd->add_flag("--timings", c.timings, "Print per-stage timings as JSON");
}

// Flag values that do not describe a valid run are usage errors.
std::pair<SessionConfig, Vec3> session_setup(Common& c) {
  SessionConfig cfg;
  cfg.params = c.params;
  cfg.params.base = BaseSurface::parse(c.base);
  cfg.params.validate();
  cfg.control_target = c.controls;
  cfg.mbs_levels = c.levels;
  cfg.reference_mode = c.reference_mode;
  const Vec3 view(c.view[0], c.view[1], c.view[2]);
  if (!view.allFinite() || view.norm() == 0.0) throw Error(ErrorCode::ZeroDirection, "--view must be a nonzero direction");
  return {cfg, view};
}

json frame_timings(const Session& s, const FrameResult& f) {
  return {{"visible_points", s.visible().size()},
          {"control_points", s.controls().size()},
          {"t1_ms", f.solve_ms},
          {"t2_ms", f.map_ms},
          {"t3_ms", f.normals_ms},
          {"prepare", service::timings_to_json(s.timings())}};
}

void write_mesh(Session& s, const std::string& path) {
  const MeshFormat fmt = mesh_format_for(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot open '" + path + "' for writing");
  save_mesh(s.export_mesh(), out, fmt);
  out.flush();
  if (!out) throw Error(ErrorCode::IOFailure, "failed writing '" + path + "'");
}

PointCloud read_cloud(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IOFailure, "cannot open '" + path + "'");
  return load_cloud(std::filesystem::path(path));
}

int run_gen(Common& c) {
  auto [cfg, view] = session_setup(c);
  mesh_format_for(c.output);
  const auto s = Session::prepare(read_cloud(c.input), view, cfg);
  const auto f = s->adjust(cfg.params);
  if (f->error) throw std::runtime_error(f->error_message);
  write_mesh(*s, c.output);
  if (c.timings) std::cout << frame_timings(*s, *f).dump(2) << "\n";
  return kOk;
}

int run_target(Common& c, std::optional<double> height, std::optional<double> frac) {
  auto [cfg, view] = session_setup(c);
  mesh_format_for(c.output);
  if ((height && !(*height > 0.0)) || (frac && !(*frac > 0.0))) {
    throw Error(ErrorCode::InvalidArgument, "target height must be positive");
  }
  const auto s = Session::prepare(read_cloud(c.input), view, cfg);
  const double h0 = height ? *height : *frac * s->diagonal();
  const TargetResult r = solve_for_height(*s, cfg.params, {h0});
  ReliefParams p = cfg.params;
  p.alpha = r.alpha;
  p.beta = r.beta;
  const auto f = s->adjust(p);
  if (f->error) throw std::runtime_error(f->error_message);
  write_mesh(*s, c.output);
  // span: the exported relief, detail included; control_span: the solve
  // the search steered to (1 - gamma) h0.
  const auto geom = s->drain();
  json out = {{"h0", h0},
              {"diagonal", s->diagonal()},
              {"alpha", r.alpha},
              {"beta", r.beta},
              {"span", geom->final_span},
              {"mapped_span", geom->mapped_span},
              {"control_span", r.span},
              {"target_span", r.target_span},
              {"solves", r.solves}};
  if (c.timings) out["timings"] = frame_timings(*s, *f);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int run_info(Common& c) {
  auto [cfg, view] = session_setup(c);
  const PointCloud cloud = read_cloud(c.input);
  const auto s = Session::prepare(cloud, view, cfg);
  json out = {{"input_points", cloud.size()},
              {"visible_points", s->visible().size()},
              {"boundary_points", s->boundary().boundary_count()},
              {"control_points", s->controls().size()},
              {"triangles", s->topology().triangles.size()},
              {"rho", s->density().rho},
              {"diagonal", s->diagonal()},
              {"delta", s->controls().delta},
              {"span", s->latest_frame()->span},
              {"timings", service::timings_to_json(s->timings())}};
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::IOFailure: return kIo;
    case ErrorCode::InvalidArgument:
    case ErrorCode::ZeroDirection: return kUsage;
    default: return kPipeline;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bas-relief generation from oriented point clouds"};
  app.require_subcommand(1);
  Common c;
  std::optional<double> height, frac;
  service::ServiceConfig serve_cfg;

  auto* gen = app.add_subcommand("gen", "Generate a relief mesh");
  add_input(gen, c);
  gen->add_option("-o,--output", c.output, "Output mesh (.ply, .obj)")->required();
  add_knobs(gen, c);

  auto* target = app.add_subcommand("target", "Generate a relief with a prescribed height span");
  add_input(target, c);
  target->add_option("-o,--output", c.output, "Output mesh (.ply, .obj)")->required();
  auto* h_abs = target->add_option("--height", height, "Target span in model units");
  auto* h_frac = target->add_option("--height-frac", frac, "Target span as a fraction of the bounding-box diagonal");
  h_abs->excludes(h_frac);
  add_knobs(target, c);

  auto* info = app.add_subcommand("info", "Print prepare statistics as JSON");
  add_input(info, c);
  add_knobs(info, c);

  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  std::optional<unsigned short> port;
  std::optional<std::size_t> max_upload;
  serve->add_option("--port", port, "Listen port (default RELIEF_PORT or 7878)");
  serve->add_option("--max-upload", max_upload, "Upload cap in bytes (default RELIEF_MAX_UPLOAD or 512 MiB)");
  serve->add_option("--address", serve_cfg.address, "Listen address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (target->parsed() && !height && !frac) {
    std::cerr << "error: target needs --height or --height-frac\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return run_gen(c);
    if (target->parsed()) return run_target(c, height, frac);
    if (info->parsed()) return run_info(c);
    if (serve->parsed()) {
      const std::string address = serve_cfg.address;
      serve_cfg = service::ServiceConfig::from_env();
      serve_cfg.address = address;
      if (port) serve_cfg.port = *port;
      if (max_upload) serve_cfg.max_upload = *max_upload;
      service::Service svc(serve_cfg);
      std::cerr << "listening on http://" << serve_cfg.address << ":" << svc.port() << "\n";
      svc.run();
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPipeline;
  }
  return kUsage;
}

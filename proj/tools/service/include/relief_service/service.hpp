#pragma once

#include <cstddef>
#include <memory>
#include <string>

namespace relief::service {

struct ServiceConfig {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see Service::port().
  unsigned short port = 7878;
  std::size_t max_upload = std::size_t{512} << 20;
  int io_threads = 2;
  int compute_threads = 2;

  /// Defaults overridden by RELIEF_PORT and RELIEF_MAX_UPLOAD (bytes).
  /// Throws InvalidArgument on unparsable values.
  static ServiceConfig from_env();
};

/// HTTP + WebSocket front end for relief sessions.
///
///   POST   /session                      multipart: cloud file, view, config JSON
///   GET    /session/{id}                 state, counts, timings
///   GET    /session/{id}/span            {seq, span} of the latest frame
///   GET    /session/{id}/xy              f32 x, y per visible point
///   GET    /session/{id}/mesh-topology   u32 triangle indices
///   GET    /session/{id}/mesh?format=    drained mesh as ply or obj
///   GET    /session/{id}/exports/{name}  file produced by a stream export
///   DELETE /session/{id}
///   WS     /session/{id}/stream          init JSON, then binary frames
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Port actually bound (the listener opens in the constructor).
  unsigned short port() const;

  /// Serves on background threads and returns.
  void start();
  /// Serves on the calling thread plus the remaining io threads until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relief::service

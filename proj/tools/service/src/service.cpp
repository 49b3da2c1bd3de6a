#include "relief_service/service.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <nlohmann/json.hpp>

#include "relief/error.hpp"
#include "relief/frame_codec.hpp"
#include "relief/height_target.hpp"
#include "relief/io.hpp"
#include "relief/session.hpp"
#include "relief_service/multipart.hpp"
#include "relief_service/params_json.hpp"

namespace relief::service {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;
using Bytes = std::shared_ptr<const std::string>;

std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

enum class State { Preparing, Ready, Targeting, Error };

const char* state_name(State s) {
  switch (s) {
    case State::Preparing: return "Preparing";
    case State::Ready: return "Ready";
    case State::Targeting: return "Targeting";
    case State::Error: return "Error";
  }
  return "Error";
}

json error_json(std::string_view code, std::string_view message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

json error_json(const std::exception& e) {
  if (const auto* re = dynamic_cast<const Error*>(&e)) return error_json(re->code_name(), e.what());
  return error_json("InternalError", e.what());
}

std::size_t parse_size(const char* text, const char* name) {
  std::size_t v = 0;
  const std::string_view s(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " is not a non-negative integer: " + text);
  }
  return v;
}

class StreamConn;

struct Entry {
  Entry(std::string id_, asio::thread_pool& pool) : id(std::move(id_)), strand(asio::make_strand(pool)) {}

  const std::string id;
  asio::strand<asio::thread_pool::executor_type> strand;
  std::atomic<State> state{State::Preparing};
  std::atomic<bool> closed{false};
  std::size_t input_points = 0;
  std::string upload_name;

  // Written once before state leaves Preparing.
  std::unique_ptr<Session> session;
  std::string error_code;
  std::string error_message;

  std::mutex m;
  ReliefParams requested;
  std::optional<ReliefParams> pending;
  bool apply_scheduled = false;
  std::uint32_t frame_seq = 0;
  double last_span = 0.0;
  Bytes last_frame;
  std::vector<std::weak_ptr<StreamConn>> subscribers;
  std::map<std::string, Bytes> exports;
  int export_count = 0;
};

/// One WebSocket client. Every member runs on the socket's strand; other
/// threads reach it through post().
class StreamConn : public std::enable_shared_from_this<StreamConn> {
 public:
  StreamConn(websocket::stream<beast::tcp_stream> ws, std::shared_ptr<Entry> entry)
      : ws_(std::move(ws)), entry_(std::move(entry)), wake_(ws_.get_executor()) {
    wake_.expires_at(asio::steady_timer::time_point::max());
  }

  auto executor() { return ws_.get_executor(); }
  const std::shared_ptr<Entry>& entry() const { return entry_; }

  void send_text(std::string text) {
    asio::post(executor(), [self = shared_from_this(), t = std::make_shared<const std::string>(std::move(text))] {
      self->queue_.push_back({false, t});
      self->wake_.cancel();
    });
  }

  /// Latest wins: an unsent frame still in the queue is replaced.
  void send_frame(Bytes frame) {
    asio::post(executor(), [self = shared_from_this(), frame = std::move(frame)] {
      std::erase_if(self->queue_, [](const Outgoing& o) { return o.binary; });
      self->queue_.push_back({true, frame});
      self->wake_.cancel();
    });
  }

  void close(websocket::close_code code, std::string reason) {
    asio::post(executor(), [self = shared_from_this(), code, reason = std::move(reason)] {
      if (!self->close_) self->close_ = websocket::close_reason(code, reason);
      self->wake_.cancel();
    });
  }

  asio::awaitable<void> writer() {
    auto self = shared_from_this();
    for (;;) {
      if (queue_.empty() && !close_) {
        beast::error_code ignored;
        co_await wake_.async_wait(asio::redirect_error(asio::use_awaitable, ignored));
        continue;
      }
      if (!queue_.empty()) {
        const Outgoing o = queue_.front();
        queue_.pop_front();
        ws_.binary(o.binary);
        beast::error_code ec;
      co_await ws_.async_write(asio::buffer(*o.data), asio::redirect_error(asio::use_awaitable, ec));
        if (ec) co_return;
        continue;
      }
      beast::error_code ignored;
      co_await ws_.async_close(*close_, asio::redirect_error(asio::use_awaitable, ignored));
      co_return;
    }
  }

  websocket::stream<beast::tcp_stream>& ws() { return ws_; }
  void stop_writer() {
    if (!close_) close_ = websocket::close_reason(websocket::close_code::normal);
    wake_.cancel();
  }

 private:
  struct Outgoing {
    bool binary;
    Bytes data;
  };
  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Entry> entry_;
  asio::steady_timer wake_;
  std::deque<Outgoing> queue_;
  std::optional<websocket::close_reason> close_;
};

std::string new_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = [] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }();
  const std::uint64_t n = ++counter;
  std::uint64_t h = (n * 0x9E3779B97F4A7C15ull) ^ salt;
  h ^= h >> 31;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llx-%llu", static_cast<unsigned long long>(h & 0xffffffffffull),
                static_cast<unsigned long long>(n));
  return buf;
}

Vec3 parse_view(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream in(s);
  Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z())) throw Error(ErrorCode::InvalidArgument, "view must be three numbers");
  std::string rest;
  if (in >> rest) throw Error(ErrorCode::InvalidArgument, "view must be three numbers");
  if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "view must be finite");
  if (v.norm() == 0.0) throw Error(ErrorCode::ZeroDirection, "view direction has zero length");
  return v;
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig cfg;
  if (const char* p = std::getenv("RELIEF_PORT")) {
    const std::size_t port = parse_size(p, "RELIEF_PORT");
    if (port > 65535) throw Error(ErrorCode::InvalidArgument, "RELIEF_PORT out of range");
    cfg.port = static_cast<unsigned short>(port);
  }
  if (const char* m = std::getenv("RELIEF_MAX_UPLOAD")) cfg.max_upload = parse_size(m, "RELIEF_MAX_UPLOAD");
  return cfg;
}

struct Service::Impl {
  explicit Impl(ServiceConfig c)
      : cfg(std::move(c)), pool(static_cast<std::size_t>(std::max(1, cfg.compute_threads))), acceptor(ioc) {
    const tcp::endpoint ep(asio::ip::make_address(cfg.address), cfg.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
  }

  ServiceConfig cfg;
  asio::io_context ioc;
  asio::thread_pool pool;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::once_flag started;

  std::mutex registry_m;
  std::map<std::string, std::shared_ptr<Entry>> registry;

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(registry_m);
    const auto it = registry.find(id);
    return it == registry.end() ? nullptr : it->second;
  }

  void spawn_accept() {
    asio::co_spawn(ioc, accept_loop(), asio::detached);
  }

  asio::awaitable<void> accept_loop() {
    for (;;) {
      tcp::socket socket(asio::make_strand(ioc));
      beast::error_code ec;
      co_await acceptor.async_accept(socket, asio::redirect_error(asio::use_awaitable, ec));
      if (ec) {
        if (ec == asio::error::operation_aborted) co_return;
        continue;
      }
      auto exec = socket.get_executor();
      asio::co_spawn(exec, serve_http(beast::tcp_stream(std::move(socket))), asio::detached);
    }
  }

  // ---- frames and broadcast -------------------------------------------

  /// Records and encodes a frame for `geom`; called on the entry strand
  /// (or before any subscriber exists).
  Bytes make_frame(Entry& e, const FrameGeometry& geom) {
    std::lock_guard lock(e.m);
    const std::uint32_t seq = e.frame_seq++;
    const auto bytes = encode_frame(seq, geom.final_span, geom.z, geom.normals);
    e.last_span = geom.final_span;
    e.last_frame = std::make_shared<const std::string>(bytes.begin(), bytes.end());
    return e.last_frame;
  }

  std::vector<std::shared_ptr<StreamConn>> subscribers(Entry& e) {
    std::lock_guard lock(e.m);
    std::vector<std::shared_ptr<StreamConn>> out;
    std::erase_if(e.subscribers, [](const std::weak_ptr<StreamConn>& w) { return w.expired(); });
    for (const auto& w : e.subscribers) {
      if (auto s = w.lock()) out.push_back(std::move(s));
    }
    return out;
  }

  void broadcast_frame(Entry& e, const Bytes& frame) {
    for (const auto& s : subscribers(e)) s->send_frame(frame);
  }

  void broadcast_text(Entry& e, const json& j) {
    const std::string text = j.dump();
    for (const auto& s : subscribers(e)) s->send_text(text);
  }

  json init_message(Entry& e) {
    std::lock_guard lock(e.m);
    const std::string base = "/session/" + e.id;
    return {{"type", "init"},
            {"seq", e.frame_seq == 0 ? 0 : e.frame_seq - 1},
            {"point_count", e.session->visible().size()},
            {"xy", base + "/xy"},
            {"topology", base + "/mesh-topology"},
            {"diagonal", e.session->diagonal()},
            {"params", params_to_json(e.requested)}};
  }

  void greet(const std::shared_ptr<StreamConn>& conn) {
    Entry& e = *conn->entry();
    conn->send_text(init_message(e).dump());
    Bytes frame;
    {
      std::lock_guard lock(e.m);
      frame = e.last_frame;
    }
    if (frame) conn->send_frame(frame);
  }

  // ---- session work (entry strand) --------------------------------------

  void prepare(const std::shared_ptr<Entry>& e, std::shared_ptr<PointCloud> cloud, Vec3 view, SessionConfig cfg) {
    asio::post(e->strand, [this, e, cloud = std::move(cloud), view, cfg] {
      try {
        e->session = Session::prepare(*cloud, view, cfg);
        {
          std::lock_guard lock(e->m);
          e->requested = cfg.params;
        }
        make_frame(*e, *e->session->latest_frame()->geometry);
        e->state = State::Ready;
        for (const auto& s : subscribers(*e)) greet(s);
      } catch (const std::exception& ex) {
        const auto* re = dynamic_cast<const Error*>(&ex);
        e->error_code = re ? std::string(re->code_name()) : "InternalError";
        e->error_message = ex.what();
        e->state = State::Error;
        for (const auto& s : subscribers(*e)) s->close(websocket::close_code::internal_error, e->error_code);
      }
    });
  }

  void schedule_apply(const std::shared_ptr<Entry>& e) {
    {
      std::lock_guard lock(e->m);
      if (e->apply_scheduled) return;
      e->apply_scheduled = true;
    }
    asio::post(e->strand, [this, e] { apply_pending(e); });
  }

  // Applies only the newest requested parameters; requests that arrive
  // while a solve runs collapse into the next iteration.
  void apply_pending(const std::shared_ptr<Entry>& e) {
    for (;;) {
      ReliefParams p;
      {
        std::lock_guard lock(e->m);
        if (!e->pending || e->closed) {
          e->apply_scheduled = false;
          break;
        }
        p = *e->pending;
        e->pending.reset();
      }
      const auto f = e->session->adjust(p);
      if (f->error) {
        broadcast_text(*e, error_json("InvalidArgument", f->error_message));
        continue;
      }
      broadcast_frame(*e, make_frame(*e, *f->geometry));
    }
    // Idle: catch the display up with the last parameters.
    if (e->closed) return;
    const auto geom = e->session->drain();
    const auto latest = e->session->latest_frame();
    if (latest && latest->geometry != geom) broadcast_frame(*e, make_frame(*e, *geom));
  }

  void target_height(const std::shared_ptr<Entry>& e, std::weak_ptr<StreamConn> who, double h0, int max_solves) {
    asio::post(e->strand, [this, e, who, h0, max_solves] {
      if (e->closed) return;
      ReliefParams start;
      {
        std::lock_guard lock(e->m);
        start = e->pending.value_or(e->requested);
        e->pending.reset();
      }
      e->state = State::Targeting;
      try {
        const TargetResult r = solve_for_height(*e->session, start, {h0, max_solves}, [&](const TargetProgress& p) {
          broadcast_text(*e, {{"type", "progress"}, {"solves", p.solves}, {"alpha", p.alpha}, {"beta", p.beta},
                              {"span", p.span}});
        });
        ReliefParams done = start;
        done.alpha = r.alpha;
        done.beta = r.beta;
        {
          std::lock_guard lock(e->m);
          e->requested = done;
        }
        e->session->adjust(done);
        const auto geom = e->session->drain();
        broadcast_text(*e, {{"type", "target"}, {"h0", h0}, {"alpha", r.alpha}, {"beta", r.beta}, {"span", r.span},
                            {"target_span", r.target_span}, {"solves", r.solves}, {"params", params_to_json(done)}});
        broadcast_frame(*e, make_frame(*e, *geom));
      } catch (const std::exception& ex) {
        if (auto s = who.lock()) s->send_text(error_json(ex).dump());
      }
      e->state = State::Ready;
    });
  }

  void export_mesh(const std::shared_ptr<Entry>& e, std::weak_ptr<StreamConn> who, MeshFormat fmt) {
    asio::post(e->strand, [this, e, who, fmt] {
      auto s = who.lock();
      if (!s || e->closed) return;
      try {
        const Bytes bytes = mesh_bytes(*e, fmt);
        std::string name;
        {
          std::lock_guard lock(e->m);
          name = std::to_string(++e->export_count) + (fmt == MeshFormat::PLY ? ".ply" : ".obj");
          e->exports[name] = bytes;
        }
        s->send_text(json{{"type", "export"},
                          {"format", fmt == MeshFormat::PLY ? "ply" : "obj"},
                          {"url", "/session/" + e->id + "/exports/" + name},
                          {"bytes", bytes->size()}}
                         .dump());
      } catch (const std::exception& ex) {
        s->send_text(error_json(ex).dump());
      }
    });
  }

  static Bytes mesh_bytes(Entry& e, MeshFormat fmt) {
    std::ostringstream out(std::ios::binary);
    save_mesh(e.session->export_mesh(), out, fmt);
    return std::make_shared<const std::string>(std::move(out).str());
  }

  // ---- WebSocket ---------------------------------------------------------

  void on_stream_message(const std::shared_ptr<StreamConn>& conn, const std::string& text) {
    const auto& e = conn->entry();
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::exception& ex) {
      conn->send_text(error_json("InvalidArgument", std::string("invalid JSON: ") + ex.what()).dump());
      return;
    }
    try {
      if (!msg.is_object() || msg.size() != 1) {
        throw Error(ErrorCode::InvalidArgument, "expected an object with exactly one command key");
      }
      const State st = e->state.load();
      if (st == State::Preparing) throw Error(ErrorCode::NoFrameYet, "session is still preparing");
      const auto& [key, body] = *msg.items().begin();
      if (key == "set_params" || key == "set_base") {
        const json knobs = key == "set_base" ? json{{"base", body}} : body;
        std::lock_guard lock(e->m);
        ReliefParams p = e->pending.value_or(e->requested);
        apply_params_json(knobs, p);
        e->requested = p;
        e->pending = p;
      } else if (key == "target_height") {
        if (!body.is_object() || !body.contains("h0") || !body["h0"].is_number()) {
          throw Error(ErrorCode::InvalidArgument, "target_height needs a numeric h0");
        }
        const double h0 = body["h0"].get<double>();
        const int max_solves = body.value("max_solves", TargetRequest{}.max_solves);
        if (!(h0 > 0.0) || max_solves < 1) throw Error(ErrorCode::InvalidArgument, "h0 and max_solves must be positive");
        target_height(e, conn, h0, max_solves);
        return;
      } else if (key == "export") {
        const std::string fmt = body.is_object() ? body.value("format", std::string("ply")) : std::string();
        if (fmt.empty()) throw Error(ErrorCode::InvalidArgument, "export needs a format");
        export_mesh(e, conn, parse_mesh_format(fmt));
        return;
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown command '" + key + "'");
      }
    } catch (const Error& ex) {
      conn->send_text(error_json(ex).dump());
      return;
    } catch (const json::exception& ex) {
      conn->send_text(error_json("InvalidArgument", ex.what()).dump());
      return;
    }
    schedule_apply(e);
  }

  asio::awaitable<void> serve_stream(beast::tcp_stream stream, http::request<http::string_body> req,
                                     std::shared_ptr<Entry> entry) {
    beast::get_lowest_layer(stream).expires_never();
    websocket::stream<beast::tcp_stream> ws(std::move(stream));
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws.read_message_max(1 << 20);
    beast::error_code aec;
      co_await ws.async_accept(req, asio::redirect_error(asio::use_awaitable, aec));
    if (aec) co_return;
    auto conn = std::make_shared<StreamConn>(std::move(ws), entry);
    asio::co_spawn(conn->executor(), conn->writer(), asio::detached);
    {
      std::lock_guard lock(entry->m);
      entry->subscribers.push_back(conn);
    }
    const State st = entry->state.load();
    if (st == State::Error) {
      conn->close(websocket::close_code::internal_error, entry->error_code);
    } else if (st != State::Preparing) {
      greet(conn);
    }
    beast::flat_buffer buf;
    for (;;) {
      beast::error_code ec;
      co_await conn->ws().async_read(buf, asio::redirect_error(asio::use_awaitable, ec));
      if (ec) break;
      if (conn->ws().got_text()) {
        on_stream_message(conn, beast::buffers_to_string(buf.data()));
      } else {
        conn->send_text(error_json("InvalidArgument", "binary messages are not accepted").dump());
      }
      buf.consume(buf.size());
    }
    conn->stop_writer();
  }

  // ---- HTTP --------------------------------------------------------------

  using Response = http::response<http::string_body>;

  static Response json_response(const http::request<http::string_body>& req, http::status status, const json& body) {
    Response res(status, req.version());
    res.set(http::field::content_type, "application/json");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
  }

  static Response error_response(const http::request<http::string_body>& req, http::status status,
                                 std::string_view code, std::string_view message) {
    json body = error_json(code, message);
    body.erase("type");
    return json_response(req, status, body);
  }

  static Response bytes_response(const http::request<http::string_body>& req, std::string body,
                                 std::string_view content_type) {
    Response res(http::status::ok, req.version());
    res.set(http::field::content_type, std::string(content_type));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  json describe(Entry& e) {
    json j = {{"id", e.id}, {"state", state_name(e.state.load())}, {"input_points", e.input_points}};
    if (e.state == State::Error) {
      j["error"] = {{"code", e.error_code}, {"message", e.error_message}};
      return j;
    }
    if (e.state == State::Preparing) return j;
    const Session& s = *e.session;
    j["visible_points"] = s.visible().size();
    j["boundary_points"] = s.boundary().boundary_count();
    j["control_points"] = s.controls().size();
    j["triangles"] = s.topology().triangles.size();
    j["rho"] = s.density().rho;
    j["diagonal"] = s.diagonal();
    j["timings"] = timings_to_json(s.timings());
    std::lock_guard lock(e.m);
    j["seq"] = e.frame_seq == 0 ? 0 : e.frame_seq - 1;
    j["span"] = e.last_span;
    j["params"] = params_to_json(e.requested);
    return j;
  }

  Response create_session(const http::request<http::string_body>& req) {
    const auto boundary = multipart_boundary(sv(req[http::field::content_type]));
    if (!boundary) return error_response(req, http::status::bad_request, "InvalidArgument", "expected multipart/form-data");
    try {
      const auto parts = parse_multipart(req.body(), *boundary);
      const FormPart* cloud_part = nullptr;
      Vec3 view = Vec3::UnitZ();
      SessionConfig scfg;
      std::string format;
      for (const FormPart& p : parts) {
        if (p.name == "cloud") {
          cloud_part = &p;
        } else if (p.name == "view") {
          view = parse_view(p.body);
        } else if (p.name == "config") {
          try {
            scfg = session_config_from_json(json::parse(p.body));
          } catch (const json::exception& ex) {
            throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + ex.what());
          }
        } else if (p.name == "format") {
          format = std::string(p.body);
        }
      }
      if (!cloud_part) throw Error(ErrorCode::InvalidArgument, "missing 'cloud' file part");
      CloudFormat cf = CloudFormat::PLY;
      if (!format.empty()) {
        cf = cloud_format_for("cloud." + format);
      } else if (!cloud_part->filename.empty()) {
        cf = cloud_format_for(cloud_part->filename);
      }
      std::istringstream in(std::string(cloud_part->body), std::ios::binary);
      auto cloud = std::make_shared<PointCloud>(load_cloud(in, cf));

      auto e = std::make_shared<Entry>(new_session_id(), pool);
      e->input_points = cloud->size();
      e->upload_name = cloud_part->filename;
      {
        std::lock_guard lock(registry_m);
        registry[e->id] = e;
      }
      prepare(e, std::move(cloud), view, scfg);
      Response res = json_response(req, http::status::accepted, {{"id", e->id}, {"state", "Preparing"}});
      res.set(http::field::location, "/session/" + e->id);
      return res;
    } catch (const Error& ex) {
      return error_response(req, http::status::bad_request, ex.code_name(), ex.what());
    }
  }

  Response route(const http::request<http::string_body>& req) {
    std::string_view target = sv(req.target());
    std::string_view query;
    if (const auto q = target.find('?'); q != std::string_view::npos) {
      query = target.substr(q + 1);
      target = target.substr(0, q);
    }
    std::vector<std::string_view> seg;
    for (std::size_t pos = 1; pos <= target.size();) {
      const std::size_t next = std::min(target.find('/', pos), target.size());
      if (next > pos) seg.push_back(target.substr(pos, next - pos));
      pos = next + 1;
    }
    if (seg.empty() || seg[0] != "session") return error_response(req, http::status::not_found, "NotFound", "no such route");
    if (seg.size() == 1) {
      if (req.method() != http::verb::post) return error_response(req, http::status::method_not_allowed, "MethodNotAllowed", "use POST");
      return create_session(req);
    }
    const auto e = find(std::string(seg[1]));
    if (!e) return error_response(req, http::status::not_found, "NotFound", "no such session");

    if (seg.size() == 2) {
      if (req.method() == http::verb::get) return json_response(req, http::status::ok, describe(*e));
      if (req.method() == http::verb::delete_) {
        remove(e);
        Response res(http::status::no_content, req.version());
        res.keep_alive(req.keep_alive());
        res.prepare_payload();
        return res;
      }
      return error_response(req, http::status::method_not_allowed, "MethodNotAllowed", "use GET or DELETE");
    }
    if (req.method() != http::verb::get) {
      return error_response(req, http::status::method_not_allowed, "MethodNotAllowed", "use GET");
    }
    const State st = e->state.load();
    if (st == State::Error) return error_response(req, http::status::conflict, e->error_code, e->error_message);
    if (st == State::Preparing) return error_response(req, http::status::conflict, "NoFrameYet", "session is still preparing");
    const Session& s = *e->session;
    const std::string_view what = seg[2];
    if (what == "span" && seg.size() == 3) {
      std::lock_guard lock(e->m);
      return json_response(req, http::status::ok, {{"seq", e->frame_seq - 1}, {"span", e->last_span}});
    }
    if (what == "xy" && seg.size() == 3) {
      const auto b = encode_xy(s.visible().xy);
      return bytes_response(req, std::string(b.begin(), b.end()), "application/octet-stream");
    }
    if (what == "mesh-topology" && seg.size() == 3) {
      const auto b = encode_topology(s.topology().triangles);
      return bytes_response(req, std::string(b.begin(), b.end()), "application/octet-stream");
    }
    if (what == "mesh" && seg.size() == 3) {
      std::string fmt = "ply";
      if (const auto p = query.find("format="); p != std::string_view::npos) {
        fmt = std::string(query.substr(p + 7, query.find('&', p) - (p + 7)));
      }
      try {
        const MeshFormat mf = parse_mesh_format(fmt);
        return bytes_response(req, *mesh_bytes(*e, mf), mf == MeshFormat::PLY ? "application/octet-stream" : "text/plain");
      } catch (const Error& ex) {
        return error_response(req, http::status::bad_request, ex.code_name(), ex.what());
      }
    }
    if (what == "exports" && seg.size() == 4) {
      Bytes b;
      {
        std::lock_guard lock(e->m);
        const auto it = e->exports.find(std::string(seg[3]));
        if (it != e->exports.end()) b = it->second;
      }
      if (!b) return error_response(req, http::status::not_found, "NotFound", "no such export");
      return bytes_response(req, *b, "application/octet-stream");
    }
    return error_response(req, http::status::not_found, "NotFound", "no such route");
  }

  void remove(const std::shared_ptr<Entry>& e) {
    {
      std::lock_guard lock(registry_m);
      registry.erase(e->id);
    }
    e->closed = true;
    for (const auto& s : subscribers(*e)) s->close(websocket::close_code::going_away, "session deleted");
  }

  asio::awaitable<void> serve_http(beast::tcp_stream stream) {
    beast::flat_buffer buf;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(cfg.max_upload);
      stream.expires_after(std::chrono::minutes(5));
      beast::error_code hec;
      co_await http::async_read_header(stream, buf, parser, asio::redirect_error(asio::use_awaitable, hec));
      const auto& head = parser.get();
      if (hec == http::error::body_limit ||
          (!hec && head.has_content_length() && parser.content_length() && *parser.content_length() > cfg.max_upload)) {
        co_await write_and_close(stream, error_response(head_request(head), http::status::payload_too_large, "PayloadTooLarge",
                                                        "upload exceeds " + std::to_string(cfg.max_upload) + " bytes"));
        co_return;
      }
      if (hec) co_return;
      beast::error_code ec;
      co_await http::async_read(stream, buf, parser, asio::redirect_error(asio::use_awaitable, ec));
      if (ec == http::error::body_limit) {
        co_await write_and_close(stream, error_response(head_request(head), http::status::payload_too_large, "PayloadTooLarge",
                                                        "upload exceeds " + std::to_string(cfg.max_upload) + " bytes"));
        co_return;
      }
      if (ec) co_return;
      http::request<http::string_body> req = parser.release();

      if (websocket::is_upgrade(req)) {
        std::string_view t = sv(req.target());
        const std::string prefix = "/session/";
        std::shared_ptr<Entry> e;
        if (t.starts_with(prefix) && t.ends_with("/stream")) {
          e = find(std::string(t.substr(prefix.size(), t.size() - prefix.size() - 7)));
        }
        if (!e) {
          co_await write_and_close(stream, error_response(req, http::status::not_found, "NotFound", "no such stream"));
          co_return;
        }
        co_await serve_stream(std::move(stream), std::move(req), std::move(e));
        co_return;
      }

      Response res;
      try {
        res = route(req);
      } catch (const std::exception& ex) {
        res = error_response(req, http::status::internal_server_error, "InternalError", ex.what());
      }
      const bool keep = res.keep_alive();
      beast::error_code wec;
      co_await http::async_write(stream, res, asio::redirect_error(asio::use_awaitable, wec));
      if (wec || !keep) break;
    }
    beast::error_code ignored;
    stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
  }

  static http::request<http::string_body> head_request(const http::request<http::string_body>& head) {
    http::request<http::string_body> r;
    r.version(head.version());
    r.keep_alive(false);
    return r;
  }

  static asio::awaitable<void> write_and_close(beast::tcp_stream& stream, Response res) {
    res.keep_alive(false);
    beast::error_code ignored;
    co_await http::async_write(stream, res, asio::redirect_error(asio::use_awaitable, ignored));
    stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
    // Discard what the client is still sending so the close does not reset the reply.
    stream.expires_after(std::chrono::seconds(2));
    std::array<char, 16384> sink;
    for (std::size_t total = 0; total < (std::size_t{64} << 20);) {
      const std::size_t n =
          co_await stream.async_read_some(asio::buffer(sink), asio::redirect_error(asio::use_awaitable, ignored));
      if (ignored) break;
      total += n;
    }
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

unsigned short Service::port() const { return impl_->acceptor.local_endpoint().port(); }

void Service::start() {
  std::call_once(impl_->started, [this] {
    impl_->spawn_accept();
    for (int i = 0; i < std::max(1, impl_->cfg.io_threads); ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  });
}

void Service::run() {
  start();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

void Service::stop() {
  if (!impl_) return;
  impl_->ioc.stop();
  for (auto& t : impl_->threads) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
  impl_->pool.join();
}

}  // namespace relief::service

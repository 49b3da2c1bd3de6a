#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "models.hpp"
#include "relief/error.hpp"
#include "relief/frame_codec.hpp"
#include "relief/io.hpp"
#include "relief_service/multipart.hpp"
#include "relief_service/service.hpp"

using namespace relief;
namespace rt = relief::testing;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;
using service::Service;
using service::ServiceConfig;

namespace {

struct Reply {
  unsigned status = 0;
  std::string body;
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string ply_bytes(const rt::Samples& s, bool normals = true) {
  const auto dir = rt::scratch_dir("svc");
  rt::write_ply(dir / "cloud.ply", s, normals);
  return read_file(dir / "cloud.ply");
}

struct Field {
  std::string name, filename, body;
};

std::string multipart(const std::vector<Field>& fields, const std::string& boundary) {
  std::string out;
  for (const Field& f : fields) {
    out += "--" + boundary + "\r\nContent-Disposition: form-data; name=\"" + f.name + "\"";
    if (!f.filename.empty()) out += "; filename=\"" + f.filename + "\"";
    out += "\r\n\r\n" + f.body + "\r\n";
  }
  return out + "--" + boundary + "--\r\n";
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.max_upload = 4 << 20;
    svc_ = new Service(cfg);
    svc_->start();
  }
  static void TearDownTestSuite() {
    delete svc_;
    svc_ = nullptr;
  }

  static Reply request(http::verb verb, const std::string& target, const std::string& body = {},
                       const std::string& content_type = {}, unsigned short port = 0) {
    asio::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port ? port : svc_->port()));
    http::request<http::string_body> req(verb, target, 11);
    req.set(http::field::host, "localhost");
    if (!content_type.empty()) req.set(http::field::content_type, content_type);
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response_parser<http::string_body> parser;
    parser.body_limit(1u << 30);
    beast::error_code ec;
    http::read(stream, buf, parser, ec);
    if (ec) return {0, ec.message()};
    return {parser.get().result_int(), parser.get().body()};
  }

  static Reply upload(const std::string& cloud, const std::string& config = "{}", const std::string& view = "0,0,1",
                      const std::string& filename = "cloud.ply") {
    const std::string boundary = "----reliefboundary7d1";
    return request(http::verb::post, "/session",
                   multipart({{"cloud", filename, cloud}, {"view", "", view}, {"config", "", config}}, boundary),
                   "multipart/form-data; boundary=" + boundary);
  }

  static json wait_ready(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      const Reply r = request(http::verb::get, "/session/" + id);
      const json j = json::parse(r.body);
      if (j["state"] != "Preparing") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return {};
  }

  static std::string ready_session(const rt::Samples& s, const std::string& config = "{}") {
    const Reply r = upload(ply_bytes(s), config);
    EXPECT_EQ(r.status, 202u) << r.body;
    const std::string id = json::parse(r.body)["id"];
    EXPECT_EQ(wait_ready(id)["state"], "Ready");
    return id;
  }

  static Service* svc_;
};

Service* ServiceTest::svc_ = nullptr;

/// Blocking WebSocket client with a read timeout.
class Client {
 public:
  explicit Client(unsigned short port, const std::string& target) : ws_(ioc_) {
    beast::get_lowest_layer(ws_).connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
    ws_.handshake("localhost", target);
  }

  void send(const json& j) {
    ws_.text(true);
    ws_.write(asio::buffer(j.dump()));
  }
  void send_raw(const std::string& text) {
    ws_.text(true);
    ws_.write(asio::buffer(text));
  }

  struct Message {
    bool binary = false;
    std::string data;
    beast::error_code ec;
  };

  Message read(std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    beast::flat_buffer buf;
    Message m;
    bool done = false;
    ws_.async_read(buf, [&](beast::error_code ec, std::size_t) {
      m.ec = ec;
      done = true;
    });
    ioc_.restart();
    ioc_.run_for(timeout);
    if (!done) {
      // Timed out. A cancelled read leaves the stream unusable, so callers stop reading after this.
      beast::get_lowest_layer(ws_).socket().cancel();
      ioc_.restart();
      ioc_.run();
      m.ec = asio::error::timed_out;
      return m;
    }
    if (m.ec) return m;
    m.binary = ws_.got_binary();
    m.data = beast::buffers_to_string(buf.data());
    return m;
  }

  json read_json() {
    for (;;) {
      const Message m = read();
      if (m.ec) throw std::runtime_error(m.ec.message());
      if (!m.binary) return json::parse(m.data);
    }
  }

  DecodedFrame read_frame() {
    for (;;) {
      const Message m = read();
      if (m.ec) throw std::runtime_error(m.ec.message());
      if (m.binary) return decode_frame({reinterpret_cast<const std::uint8_t*>(m.data.data()), m.data.size()});
    }
  }

  websocket::close_reason reason() const { return ws_.reason(); }

 private:
  asio::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

}  // namespace

TEST(Multipart, ParsesFieldsAndFiles) {
  const std::string body = multipart({{"cloud", "a.ply", std::string("x\r\ny\0z", 6)}, {"view", "", "0,0,1"}}, "XyZ");
  const auto b = service::multipart_boundary("multipart/form-data; boundary=XyZ");
  ASSERT_TRUE(b);
  const auto parts = service::parse_multipart(body, *b);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].name, "cloud");
  EXPECT_EQ(parts[0].filename, "a.ply");
  EXPECT_EQ(parts[0].body, std::string_view("x\r\ny\0z", 6));
  EXPECT_EQ(parts[1].body, "0,0,1");
  EXPECT_FALSE(service::multipart_boundary("application/json"));
  EXPECT_THROW(service::parse_multipart("garbage", "XyZ"), relief::Error);
}

TEST(ServiceConfigEnv, ReadsPortAndUploadCap) {
  ::setenv("RELIEF_PORT", "9123", 1);
  ::setenv("RELIEF_MAX_UPLOAD", "1000", 1);
  ServiceConfig cfg = ServiceConfig::from_env();
  EXPECT_EQ(cfg.port, 9123);
  EXPECT_EQ(cfg.max_upload, 1000u);
  ::unsetenv("RELIEF_PORT");
  ::unsetenv("RELIEF_MAX_UPLOAD");
  cfg = ServiceConfig::from_env();
  EXPECT_EQ(cfg.port, 7878);
  EXPECT_EQ(cfg.max_upload, std::size_t{512} << 20);
  ::setenv("RELIEF_PORT", "http", 1);
  EXPECT_THROW(ServiceConfig::from_env(), relief::Error);
  ::unsetenv("RELIEF_PORT");
}

TEST_F(ServiceTest, UploadThenDescribe) {
  const rt::Samples dome = rt::hemisphere_dome(6000);
  const Reply a = upload(ply_bytes(dome));
  const Reply b = upload(ply_bytes(dome));
  ASSERT_EQ(a.status, 202u) << a.body;
  ASSERT_EQ(b.status, 202u);
  const std::string id = json::parse(a.body)["id"];
  EXPECT_NE(id, json::parse(b.body)["id"].get<std::string>());
  const json d = wait_ready(id);
  EXPECT_EQ(d["state"], "Ready");
  EXPECT_EQ(d["input_points"], dome.points.size());
  EXPECT_GT(d["visible_points"].get<int>(), 0);
  EXPECT_GT(d["control_points"].get<int>(), 0);
  EXPECT_GT(d["timings"]["total_ms"].get<double>(), 0.0);
}

TEST_F(ServiceTest, UploadErrors) {
  const Reply nn = upload(ply_bytes(rt::hemisphere_dome(2000), false));
  EXPECT_EQ(nn.status, 400u);
  EXPECT_EQ(json::parse(nn.body)["code"], "MissingNormals");
  const Reply bad = upload("this is not a ply file");
  EXPECT_EQ(bad.status, 400u);
  EXPECT_EQ(json::parse(bad.body)["code"], "MalformedFile");
  const Reply cfg = upload(ply_bytes(rt::hemisphere_dome(2000)), R"({"alpha": -1})");
  EXPECT_EQ(cfg.status, 400u);
  EXPECT_EQ(json::parse(cfg.body)["code"], "InvalidArgument");
  const Reply view = upload(ply_bytes(rt::hemisphere_dome(2000)), "{}", "0,0,0");
  EXPECT_EQ(view.status, 400u);
  EXPECT_EQ(json::parse(view.body)["code"], "ZeroDirection");
  EXPECT_EQ(request(http::verb::post, "/session", "{}", "application/json").status, 400u);
}

TEST_F(ServiceTest, OversizedUploadIs413) {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.max_upload = 1000;
  Service small(cfg);
  small.start();
  const std::string boundary = "b0";
  const Reply r = request(http::verb::post, "/session",
                          multipart({{"cloud", "c.ply", ply_bytes(rt::hemisphere_dome(2000))}}, boundary),
                          "multipart/form-data; boundary=" + boundary, small.port());
  EXPECT_EQ(r.status, 413u);
}

TEST_F(ServiceTest, BinaryEndpointsAndMesh) {
  const std::string id = ready_session(rt::hemisphere_dome(6000));
  const json d = json::parse(request(http::verb::get, "/session/" + id).body);
  const std::size_t n = d["visible_points"];
  EXPECT_EQ(request(http::verb::get, "/session/" + id + "/xy").body.size(), 8 * n);
  EXPECT_EQ(request(http::verb::get, "/session/" + id + "/mesh-topology").body.size(),
            12 * d["triangles"].get<std::size_t>());
  for (const char* fmt : {"ply", "obj"}) {
    const Reply m = request(http::verb::get, "/session/" + id + "/mesh?format=" + fmt);
    ASSERT_EQ(m.status, 200u);
    std::istringstream in(m.body);
    const ReliefMesh mesh = load_mesh(in, parse_mesh_format(fmt));
    EXPECT_EQ(mesh.vertices.size(), n);
    EXPECT_EQ(mesh.triangles.size(), d["triangles"].get<std::size_t>());
  }
  EXPECT_EQ(request(http::verb::get, "/session/" + id + "/mesh?format=stl").status, 400u);
  EXPECT_EQ(request(http::verb::get, "/session/nope").status, 404u);
  EXPECT_EQ(request(http::verb::get, "/elsewhere").status, 404u);
}

TEST_F(ServiceTest, DeleteRemovesTheSession) {
  const std::string id = ready_session(rt::hemisphere_dome(3000));
  EXPECT_EQ(request(http::verb::delete_, "/session/" + id).status, 204u);
  EXPECT_EQ(request(http::verb::get, "/session/" + id).status, 404u);
}

TEST_F(ServiceTest, StreamInitAndFrameMatchesSpanEndpoint) {
  const std::string id = ready_session(rt::hemisphere_dome(6000));
  Client c(svc_->port(), "/session/" + id + "/stream");
  const json init = c.read_json();
  EXPECT_EQ(init["type"], "init");
  EXPECT_EQ(init["xy"], "/session/" + id + "/xy");
  const std::size_t n = init["point_count"];
  EXPECT_EQ(init["params"]["alpha"], 4.0);
  const DecodedFrame first = c.read_frame();
  EXPECT_EQ(first.z.size(), n);
  EXPECT_EQ(first.seq, init["seq"].get<std::uint32_t>());

  c.send({{"set_params", {{"alpha", 4.0}, {"beta", 0.01}, {"gamma", 0.02}}}});
  DecodedFrame f = c.read_frame();
  EXPECT_GT(f.seq, first.seq);
  EXPECT_EQ(f.normals.size(), 3 * n);
  // The decoded frame re-encodes to the same bytes.
  const auto again = encode_frame(f.seq, f.span, f.z, f.normals);
  EXPECT_EQ(decode_frame(again).z, f.z);
  // Wait for the idle catch-up frame, then compare with the span endpoint.
  for (;;) {
    const Client::Message m = c.read(std::chrono::milliseconds(500));
    if (m.ec) break;
    if (m.binary) f = decode_frame({reinterpret_cast<const std::uint8_t*>(m.data.data()), m.data.size()});
  }
  const json span = json::parse(request(http::verb::get, "/session/" + id + "/span").body);
  EXPECT_EQ(span["seq"].get<std::uint32_t>(), f.seq);
  EXPECT_EQ(static_cast<float>(span["span"].get<double>()), f.span);
}

TEST_F(ServiceTest, RapidParamsCoalesceAndEndOnTheLastParams) {
  const std::string id = ready_session(rt::hemisphere_dome(20000));
  Client c(svc_->port(), "/session/" + id + "/stream");
  c.read_json();
  c.read_frame();
  for (int i = 0; i < 100; ++i) c.send({{"set_params", {{"alpha", 0.5 + 0.1 * i}}}});
  int frames = 0;
  DecodedFrame last;
  for (;;) {
    const Client::Message m = c.read(std::chrono::milliseconds(1500));
    if (m.ec) break;
    if (m.binary) {
      ++frames;
      last = decode_frame({reinterpret_cast<const std::uint8_t*>(m.data.data()), m.data.size()});
    }
  }
  EXPECT_GT(frames, 0);
  EXPECT_LT(frames, 100);
  // The drained mesh is the geometry for alpha = 10.4; the last frame shows it.
  const json d = json::parse(request(http::verb::get, "/session/" + id).body);
  EXPECT_NEAR(d["params"]["alpha"].get<double>(), 0.5 + 0.1 * 99, 1e-12);
  std::istringstream in(request(http::verb::get, "/session/" + id + "/mesh?format=ply").body);
  const ReliefMesh mesh = load_mesh(in, MeshFormat::PLY);
  ASSERT_EQ(mesh.vertices.size(), last.z.size());
  for (std::size_t i = 0; i < last.z.size(); ++i) ASSERT_EQ(last.z[i], static_cast<float>(mesh.vertices[i].z()));
}

TEST_F(ServiceTest, TargetHeightReportsProgressThenFrame) {
  const std::string id = ready_session(rt::hemisphere_dome(20000), R"({"controls": 3000})");
  Client c(svc_->port(), "/session/" + id + "/stream");
  const json init = c.read_json();
  c.read_frame();
  const double h0 = 0.05 * init["diagonal"].get<double>();
  c.send({{"target_height", {{"h0", h0}}}});
  int progress = 0;
  json done;
  for (;;) {
    const json j = c.read_json();
    if (j["type"] == "progress") {
      ++progress;
      EXPECT_EQ(j["solves"], progress);
    } else {
      done = j;
      break;
    }
  }
  ASSERT_EQ(done["type"], "target") << done.dump();
  EXPECT_GT(progress, 0);
  EXPECT_EQ(done["solves"], progress);
  const DecodedFrame f = c.read_frame();
  EXPECT_LE(std::abs(f.span - h0), 0.01 * h0);
  EXPECT_EQ(json::parse(request(http::verb::get, "/session/" + id).body)["state"], "Ready");

  c.send({{"target_height", {{"h0", 100.0}}}});
  json err;
  do err = c.read_json();
  while (err["type"] == "progress");
  EXPECT_EQ(err["type"], "error");
  EXPECT_EQ(err["code"], "TargetUnreachable");
}

TEST_F(ServiceTest, BadMessagesKeepTheSocketOpen) {
  const std::string id = ready_session(rt::hemisphere_dome(4000));
  Client c(svc_->port(), "/session/" + id + "/stream");
  c.read_json();
  c.read_frame();
  c.send_raw("{not json");
  EXPECT_EQ(c.read_json()["code"], "InvalidArgument");
  c.send({{"launch", 1}});
  EXPECT_EQ(c.read_json()["code"], "InvalidArgument");
  c.send({{"set_params", {{"alpha", "high"}}}});
  EXPECT_EQ(c.read_json()["code"], "InvalidArgument");
  c.send({{"set_params", {{"gamma", 1.5}}}});
  EXPECT_EQ(c.read_json()["code"], "InvalidArgument");
  c.send({{"set_base", "wave:0.02,4,y"}});
  EXPECT_EQ(c.read_frame().z.size(), json::parse(request(http::verb::get, "/session/" + id).body)["visible_points"]);
  EXPECT_EQ(json::parse(request(http::verb::get, "/session/" + id).body)["params"]["base"], "wave:0.02,4,y");
}

TEST_F(ServiceTest, ExportReturnsADownloadUrl) {
  const std::string id = ready_session(rt::hemisphere_dome(4000));
  Client c(svc_->port(), "/session/" + id + "/stream");
  const json init = c.read_json();
  c.send({{"set_params", {{"alpha", 2.0}}}});
  c.send({{"export", {{"format", "obj"}}}});
  json ex;
  do ex = c.read_json();
  while (ex["type"] != "export");
  const Reply file = request(http::verb::get, ex["url"]);
  ASSERT_EQ(file.status, 200u);
  EXPECT_EQ(file.body.size(), ex["bytes"].get<std::size_t>());
  std::istringstream in(file.body);
  EXPECT_EQ(load_mesh(in, MeshFormat::OBJ).vertices.size(), init["point_count"].get<std::size_t>());
  // The export already reflects alpha = 2: it matches the drained mesh.
  EXPECT_EQ(file.body, request(http::verb::get, "/session/" + id + "/mesh?format=obj").body);
}

TEST_F(ServiceTest, FailedPrepareClosesStreamsWith1011) {
  const Reply r = upload(ply_bytes(rt::hemisphere_dome(40000)), R"({"prepare_timeout_ms": 0})");
  ASSERT_EQ(r.status, 202u);
  const std::string id = json::parse(r.body)["id"];
  const json d = wait_ready(id);
  ASSERT_EQ(d["state"], "Error");
  EXPECT_FALSE(d["error"]["code"].get<std::string>().empty());
  Client c(svc_->port(), "/session/" + id + "/stream");
  const Client::Message m = c.read();
  EXPECT_EQ(m.ec, websocket::error::closed);
  EXPECT_EQ(c.reason().code, websocket::close_code::internal_error);
  EXPECT_EQ(request(http::verb::get, "/session/" + id + "/span").status, 409u);
}

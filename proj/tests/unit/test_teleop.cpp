#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "hiernav/il/demos.hpp"
#include "hiernav/replay.hpp"
#include "hiernav/teleop/server.hpp"
#include "hiernav/teleop/session.hpp"
#include "hiernav/teleop/websocket.hpp"

using namespace hiernav;
using namespace hiernav::teleop;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hiernav_teleop_" + name);
  std::filesystem::remove_all(p);
  return p;
}

TeleopConfig straight_config(const std::filesystem::path& out = {}) {
  TeleopConfig c;
  c.empty_corridor = true;
  c.seed = 5;
  c.out_dir = out;
  return c;
}

std::string cmd(double v, double w) { return nlohmann::json{{"type", "cmd"}, {"v", v}, {"w", w}}.dump(); }

// Steps `n` base ticks, re-posting the command every navigation tick.
void drive(Session& s, int n, double v, double w) {
  for (int k = 0; k < n && !s.status().terminal(); ++k) {
    if (s.tick() % 4 == 0) s.post_command(v, w);
    s.step();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// WebSocket framing

TEST(WebSocket, AcceptKeyMatchesRfcExample) {
  EXPECT_EQ("s3pPLMBiTxaQ9kYGzzhZRbK+xOo=", ws::accept_key("dGhlIHNhbXBsZSBub25jZQ=="));
}

TEST(WebSocket, HandshakeParsesHeadersCaseInsensitively) {
  std::string buf =
      "GET /ws HTTP/1.1\r\nHost: x\r\nUPGRADE: WebSocket\r\nConnection: keep-alive, Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\nrest";
  const auto req = ws::parse_http_request(buf);
  ASSERT_TRUE(req);
  EXPECT_EQ("/ws", req->path);
  EXPECT_TRUE(req->wants_upgrade());
  EXPECT_NE(std::string::npos, ws::handshake_response(*req).find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="));
  EXPECT_EQ("rest", buf);
}

TEST(WebSocket, IncompleteHeadWaits) {
  std::string buf = "GET / HTTP/1.1\r\nHost: x\r\n";
  EXPECT_FALSE(ws::parse_http_request(buf));
}

TEST(WebSocket, DecodesMaskedFramesOfEveryLengthClass) {
  for (std::size_t n : {0u, 5u, 125u, 126u, 300u, 70000u}) {
    const std::string payload(n, 'a');
    const auto f = ws::encode_client_frame(ws::Text, payload, 0x12345678u);
    ws::FrameDecoder d;
    // byte at a time: decoding must not depend on read boundaries
    std::optional<ws::Message> m;
    for (char c : f) {
      d.feed(&c, 1);
      if (auto x = d.next()) m = x;
    }
    ASSERT_TRUE(m) << n;
    EXPECT_EQ(payload, m->payload);
  }
}

TEST(WebSocket, ReassemblesFragmentsAroundControlFrames) {
  ws::FrameDecoder d;
  const auto a = ws::encode_client_frame(ws::Text, "{\"type\":", 1, false);
  const auto p = ws::encode_client_frame(ws::Ping, "hi", 2);
  const auto b = ws::encode_client_frame(ws::Continuation, "\"reset\"}", 3);
  const auto all = a + p + b;
  d.feed(all.data(), all.size());
  auto m1 = d.next();
  ASSERT_TRUE(m1);
  EXPECT_EQ(ws::Ping, m1->op);
  auto m2 = d.next();
  ASSERT_TRUE(m2);
  EXPECT_EQ("{\"type\":\"reset\"}", m2->payload);
}

TEST(WebSocket, RejectsUnmaskedClientFrames) {
  ws::FrameDecoder d;
  const auto f = ws::encode_frame(ws::Text, "x");
  d.feed(f.data(), f.size());
  EXPECT_THROW(d.next(), ws::ProtocolError);
}

TEST(WebSocket, BindAddressParsing) {
  EXPECT_EQ(9000, parse_bind("0.0.0.0:9000").port);
  EXPECT_EQ("0.0.0.0", parse_bind("0.0.0.0:9000").host);
  EXPECT_EQ(0, parse_bind(":0").port);
  EXPECT_THROW(parse_bind("host:http"), ConfigError);
}

// ---------------------------------------------------------------------------
// Session

TEST(TeleopSession, CommandsAreClippedBeforeApplication) {
  Session s(straight_config());
  EXPECT_TRUE(s.handle_message(cmd(2.0, -9.0)).accepted);
  s.step();
  EXPECT_EQ(1.0, s.applied().v);
  EXPECT_EQ(-1.5, s.applied().w);
}

TEST(TeleopSession, WatchdogHoldsThenDecaysToStopWithinOneSecond) {
  Session s(straight_config());
  s.post_command(0.8, 0.4);
  s.step();
  double last_nonzero_age = 0.0;
  for (int k = 1; k < 3 * 38; ++k) {
    s.step();
    if (k % 4 != 0) continue;
    const double age = k * kTickDt;
    const auto u = s.applied();
    if (age <= 0.5) {
      EXPECT_EQ(0.8f, static_cast<float>(u.v)) << age;
    } else {
      const double expect = 0.8 * std::max(0.0, 1.0 - (age - 0.5) / 1.0);
      EXPECT_NEAR(expect, u.v, 1e-6) << age;
      EXPECT_NEAR(expect / 2.0, u.w, 1e-6) << age;
    }
    if (u.v > 0.0) last_nonzero_age = age;
  }
  EXPECT_LE(last_nonzero_age, 1.5);
  EXPECT_EQ(Command{}, s.applied());
}

TEST(TeleopSession, MalformedMessagesAreRejectedAndSessionContinues) {
  Session s(straight_config());
  for (const char* bad : {"not json", "[1,2]", "{\"type\":3}", "{\"type\":\"cmd\",\"v\":\"fast\",\"w\":0}",
                          "{\"type\":\"record\"}", "{\"type\":\"fly\"}", "{\"type\":\"hello\",\"protocol\":2}"}) {
    const auto r = s.handle_message(bad);
    EXPECT_FALSE(r.accepted) << bad;
    ASSERT_TRUE(r.reply);
    EXPECT_EQ("error", (*r.reply)["type"]);
  }
  drive(s, 40, 0.5, 0.0);
  EXPECT_GT(s.robot().x, WorldConstants::start.x);
}

TEST(TeleopSession, ObserversCannotSteer) {
  Session s(straight_config());
  EXPECT_FALSE(s.handle_message(cmd(1.0, 0.0), false).accepted);
  EXPECT_TRUE(s.handle_message("{\"type\":\"hello\",\"protocol\":1}", false).accepted);
  s.step();
  EXPECT_EQ(Command{}, s.applied());
}

TEST(TeleopSession, RecordsAtNavigationRate) {
  const auto dir = temp_dir("rate");
  auto cfg = straight_config(dir);
  Session s(cfg);
  s.set_recording(true);
  drive(s, static_cast<int>(30 * kTickHz), 0.5, 0.0);  // 30 s, well short of the goal
  s.reset();
  const auto ds = il::read_dataset(dir, false);
  ASSERT_EQ(1u, ds.trajectories.size());
  EXPECT_NEAR(285.0, static_cast<double>(ds.trajectories[0].records.size()), 1.0);
  EXPECT_FALSE(ds.trajectories[0].keep);
  EXPECT_EQ(il::DemoSource::HumanTeleop, ds.trajectories[0].source);
}

TEST(TeleopSession, RecordedCommandsAreTheAppliedOnes) {
  const auto dir = temp_dir("applied");
  Session s(straight_config(dir));
  s.set_recording(true);
  drive(s, 200, 3.0, 0.2);
  s.reset();
  const auto ds = il::read_dataset(dir, false);
  for (const auto& r : ds.trajectories.at(0).records) {
    EXPECT_EQ(1.0, r.cmd.v);
    EXPECT_EQ((Command{0.0, 0.2}.clipped().w), r.cmd.w);
  }
}

TEST(TeleopSession, SuccessfulEpisodeIsKeptAndFileValidates) {
  const auto dir = temp_dir("success");
  Session s(straight_config(dir));
  s.set_recording(true);
  drive(s, WorldConstants::episode_limit_ticks, 1.0, 0.0);
  ASSERT_TRUE(s.status().success());
  const auto ds = il::read_dataset(dir);
  ASSERT_EQ(1u, ds.trajectories.size());
  EXPECT_TRUE(ds.trajectories[0].keep);
  EXPECT_EQ("success", ds.trajectories[0].status);
  EXPECT_NO_THROW(il::validate(ds.trajectories[0]));
}

TEST(TeleopSession, ResetMovesToNextSeedAndFlushes) {
  const auto dir = temp_dir("reset");
  Session s(straight_config(dir));
  s.set_recording(true);
  drive(s, 40, 0.5, 0.0);
  EXPECT_TRUE(s.handle_message("{\"type\":\"reset\"}").accepted);
  EXPECT_EQ(6u, s.episode_seed());
  EXPECT_EQ(0u, s.tick());
  EXPECT_EQ(WorldConstants::start.x, s.robot().x);
  EXPECT_EQ(1u, s.written().size());
  EXPECT_TRUE(std::filesystem::exists(dir / "teleop_0000.jsonl"));
  drive(s, 40, 0.5, 0.0);
  s.reset();
  EXPECT_TRUE(std::filesystem::exists(dir / "teleop_0001.jsonl"));
}

TEST(TeleopSession, BroadcastObservationEqualsRecordedObservation) {
  const auto dir = temp_dir("broadcast");
  TeleopConfig cfg;
  cfg.difficulty = Difficulty::Hard;
  cfg.out_dir = dir;
  Session s(cfg);
  s.set_recording(true);
  std::vector<nlohmann::json> sent;
  for (int k = 0; k < 80; ++k) {
    if (k % 4 == 0) s.post_command(0.4, 0.1);
    if (s.step()) sent.push_back(s.state_message());
  }
  s.reset();
  const auto ds = il::read_dataset(dir, false);
  const auto& recs = ds.trajectories.at(0).records;
  ASSERT_EQ(recs.size(), sent.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_DOUBLE_EQ(recs[i].t, sent[i]["t"].get<double>());
    for (int b = 0; b < SensorConstants::beams; ++b)
      EXPECT_EQ(recs[i].obs.ranges[b], sent[i]["ranges"][b].get<double>());
  }
}

TEST(TeleopSession, ReplayReproducesTheLiveEpisode) {
  const auto dir = temp_dir("replay");
  TeleopConfig cfg;
  cfg.difficulty = Difficulty::Medium;
  cfg.seed = 17;
  cfg.out_dir = dir;
  cfg.keep_all = true;
  cfg.low_level = MpcGait(PlantMode{true, 0.0, 0x91a7}).spec();
  Session s(cfg);
  s.set_recording(true);
  CounterRng rng(3, 0);
  // erratic steering with gaps long enough to trigger the watchdog
  while (!s.status().terminal()) {
    if (s.tick() % 4 == 0 && rng.uniform() < 0.6) s.post_command(rng.uniform(), 3.0 * rng.uniform() - 1.5);
    s.step();
  }
  const auto live_state = s.robot();
  const auto live_status = s.status().state;
  const auto traj = read_trajectory((dir / "teleop_0000.traj").string());
  const auto check = replay_trajectory(traj);
  EXPECT_EQ(live_status, check.replayed.status.state);
  EXPECT_TRUE(check.equivalent());
  EXPECT_LT(std::abs(check.replayed.final_state.x - live_state.x), 1e-6);
  EXPECT_LT(std::abs(check.replayed.final_state.y - live_state.y), 1e-6);
}

TEST(TeleopSession, WriteFailurePausesWithReason) {
  const auto dir = temp_dir("blocked");
  std::ofstream(dir.string()) << "a file where the directory should be";
  Session s(straight_config(dir));
  s.set_recording(true);
  drive(s, 20, 0.5, 0.0);
  s.reset();
  EXPECT_TRUE(s.paused());
  EXPECT_NE(std::string::npos, s.pause_reason().find("recording failed"));
  EXPECT_FALSE(s.step());
  EXPECT_EQ(0u, s.tick());
  s.reset();
  EXPECT_FALSE(s.paused());
  std::filesystem::remove(dir);
}

// ---------------------------------------------------------------------------
// Live server over loopback

namespace {

struct TestClient {
  int fd = -1;
  std::string buf;

  explicit TestClient(int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) throw std::runtime_error("connect");
    const std::string req =
        "GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
        "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n";
    ::send(fd, req.data(), req.size(), 0);
    while (buf.find("\r\n\r\n") == std::string::npos) fill();
    if (buf.find("101") == std::string::npos) throw std::runtime_error("no upgrade");
    buf.erase(0, buf.find("\r\n\r\n") + 4);
  }
  ~TestClient() { ::close(fd); }

  void fill() {
    char b[4096];
    const auto n = ::recv(fd, b, sizeof b, 0);
    if (n <= 0) throw std::runtime_error("closed");
    buf.append(b, static_cast<std::size_t>(n));
  }

  // Server frames are unmasked and unfragmented.
  nlohmann::json next() {
    for (;;) {
      if (buf.size() >= 2) {
        std::size_t len = static_cast<unsigned char>(buf[1]) & 0x7f, head = 2;
        if (len == 126 && buf.size() >= 4) {
          len = (static_cast<std::size_t>(static_cast<unsigned char>(buf[2])) << 8) | static_cast<unsigned char>(buf[3]);
          head = 4;
        }
        if (len != 126 && buf.size() >= head + len) {
          const auto payload = buf.substr(head, len);
          buf.erase(0, head + len);
          return nlohmann::json::parse(payload);
        }
      }
      fill();
    }
  }

  void send(const std::string& text) {
    const auto f = ws::encode_client_frame(ws::Text, text, 0xa1b2c3d4u);
    ::send(fd, f.data(), f.size(), 0);
  }
};

}  // namespace

TEST(TeleopServer, DrivesAStraightCorridorOverTheWire) {
  const auto dir = temp_dir("server");
  ServerOptions opt;
  opt.bind = parse_bind("127.0.0.1:0");
  opt.speedup = 40.0;
  opt.max_episodes = 1;
  Server server(straight_config(dir), opt);
  std::atomic<bool> stop{false};
  std::thread th([&] { server.run(stop); });

  TestClient driver(server.port());
  const auto hello = driver.next();
  EXPECT_EQ("hello", hello["type"]);
  EXPECT_EQ(1, hello["protocol"]);
  EXPECT_EQ("driver", hello["role"]);
  TestClient observer(server.port());
  EXPECT_EQ("observer", observer.next()["role"]);

  driver.send("{\"type\":\"record\",\"on\":true}");
  driver.send("garbage");
  bool saw_error = false;
  std::string final_status;
  for (int i = 0; i < 5000 && final_status.empty(); ++i) {
    const auto m = driver.next();
    if (m["type"] == "error") saw_error = true;
    if (m["type"] == "state") driver.send(cmd(1.0, 0.0));
    if (m["type"] == "episode") final_status = m["status"];
  }
  stop = true;
  th.join();
  EXPECT_TRUE(saw_error);
  EXPECT_EQ("success", final_status);
  const auto ds = il::read_dataset(dir);
  ASSERT_EQ(1u, ds.trajectories.size());
  EXPECT_GT(ds.trajectories[0].records.size(), 400u);
}

TEST(TeleopServer, PortBusyIsAStartupError) {
  ServerOptions opt;
  opt.bind = parse_bind("127.0.0.1:0");
  Server a(straight_config(), opt);
  opt.bind.port = a.port();
  EXPECT_THROW(Server(straight_config(), opt), ConfigError);
}

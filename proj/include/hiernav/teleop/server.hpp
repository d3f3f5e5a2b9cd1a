#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <sstream>
#include <string>

#include "hiernav/teleop/session.hpp"
#include "hiernav/teleop/websocket.hpp"

namespace hiernav::teleop {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8765;
};

/// "host:port" or ":port" or "port".
inline BindAddress parse_bind(const std::string& s) {
  BindAddress b;
  const auto colon = s.rfind(':');
  std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (colon != std::string::npos && colon > 0) b.host = s.substr(0, colon);
  try {
    std::size_t used = 0;
    b.port = std::stoi(port, &used);
    if (used != port.size() || b.port < 0 || b.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw ConfigError("bad bind address '" + s + "' (expected host:port)");
  }
  return b;
}

struct ServerOptions {
  BindAddress bind;
  double speedup = 1.0;  // wall clock runs this many times faster than sim time
  int max_episodes = 0;  // stop after this many finished episodes; 0 = run until stopped
  std::filesystem::path static_dir;  // plain HTTP GETs are served from here
  std::function<void(const std::string&)> log;
};

/// Real-time host for a Session: one thread, poll()-driven. Ticks are
/// scheduled from a fixed origin on the monotonic clock, so pacing errors do
/// not accumulate.
class Server {
 public:
  Server(TeleopConfig cfg, ServerOptions opt) : session_(std::move(cfg)), opt_(std::move(opt)) {
    if (!(opt_.speedup > 0.0)) throw ConfigError("teleop: speedup must be positive");
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConfigError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(opt_.bind.port));
    if (::inet_pton(AF_INET, opt_.bind.host == "localhost" ? "127.0.0.1" : opt_.bind.host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw ConfigError("bind: '" + opt_.bind.host + "' is not an IPv4 address");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 8) != 0) {
      const std::string err = std::strerror(errno);
      ::close(listen_fd_);
      throw ConfigError("cannot listen on " + opt_.bind.host + ":" + std::to_string(opt_.bind.port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    ::fcntl(listen_fd_, F_SETFL, O_NONBLOCK);
  }

  ~Server() {
    for (auto& c : clients_) ::close(c.fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  const Session& session() const { return session_; }
  int finished_episodes() const { return episodes_; }

  /// Runs until `stop` is set or max_episodes episodes have finished.
  void run(const std::atomic<bool>& stop) {
    using clock = std::chrono::steady_clock;
    const auto tick = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(kTickDt / opt_.speedup));
    auto origin = clock::now();
    std::uint64_t n = 0;
    while (!stop.load()) {
      const auto deadline = origin + tick * static_cast<long>(n + 1);
      poll_until(deadline);
      if (clock::now() < deadline) continue;
      ++n;
      // far behind (suspended process, slow disk): rebase instead of bursting
      if (clock::now() - deadline > std::chrono::milliseconds(500)) {
        origin = clock::now();
        n = 0;
      }
      advance(n);
      if (opt_.max_episodes > 0 && episodes_ >= opt_.max_episodes) break;
    }
    flush_writes();
  }

 private:
  struct Client {
    int fd = -1;
    bool upgraded = false;
    bool driver = false;
    bool closing = false;
    std::string in, out;
    ws::FrameDecoder decoder;
  };

  void log(const std::string& s) const {
    if (opt_.log) opt_.log(s);
  }

  void advance(std::uint64_t wall_tick) {
    const bool was_running = !session_.status().terminal();
    const bool was_paused = session_.paused();
    const bool due = session_.step();
    if (due || (wall_tick % static_cast<std::uint64_t>(session_.config().broadcast_period) == 0 &&
                (session_.status().terminal() || session_.paused())))
      broadcast(session_.state_message());
    if (was_running && session_.status().terminal()) {
      ++episodes_;
      nlohmann::json m{{"type", "episode"},
                       {"seed", session_.episode_seed()},
                       {"status", std::string(to_string(session_.status().state))},
                       {"travel_distance", session_.status().travel_distance}};
      if (!session_.written().empty() && written_seen_ < session_.written().size()) {
        m["file"] = session_.written().back();
        written_seen_ = session_.written().size();
      }
      broadcast(m);
      log("episode " + std::to_string(session_.episode_seed()) + ": " + m["status"].get<std::string>());
    }
    if (!was_paused && session_.paused()) {
      broadcast(error_message(session_.pause_reason()));
      log(session_.pause_reason());
    }
  }

  void broadcast(const nlohmann::json& m) {
    const auto frame = ws::encode_frame(ws::Text, m.dump());
    for (auto& c : clients_)
      if (c.upgraded && !c.closing) c.out += frame;
  }

  void poll_until(std::chrono::steady_clock::time_point deadline) {
    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    for (auto& c : clients_) fds.push_back({c.fd, static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
    const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    const int timeout = static_cast<int>(std::max<long>(0, wait.count()));
    if (::poll(fds.data(), fds.size(), timeout) <= 0) return;
    if (fds[0].revents & POLLIN) accept_clients();
    std::size_t i = 1;
    for (auto it = clients_.begin(); it != clients_.end(); ++i) {
      bool drop = false;
      if (i < fds.size()) {
        if (fds[i].revents & (POLLERR | POLLHUP)) drop = !(fds[i].revents & POLLIN);
        if (!drop && (fds[i].revents & POLLIN)) drop = !read_client(*it);
        if (!drop && (fds[i].revents & POLLOUT)) drop = !write_client(*it);
        if (!drop && it->closing && it->out.empty()) drop = true;
      }
      if (drop) {
        if (it->driver) log("driver disconnected");
        ::close(it->fd);
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void accept_clients() {
    for (;;) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      ::fcntl(fd, F_SETFL, O_NONBLOCK);
      clients_.emplace_back();
      clients_.back().fd = fd;
    }
  }

  bool write_client(Client& c) {
    while (!c.out.empty()) {
      const auto n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
      if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK;
      c.out.erase(0, static_cast<std::size_t>(n));
    }
    return true;
  }

  void flush_writes() {
    for (auto& c : clients_) {
      if (c.upgraded) c.out += ws::encode_frame(ws::Close, std::string("\x03\xe9", 2));  // 1001 going away
      ::fcntl(c.fd, F_SETFL, 0);
      write_client(c);
    }
  }

  bool driver_present() const {
    for (const auto& c : clients_)
      if (c.driver) return true;
    return false;
  }

  bool read_client(Client& c) {
    char buf[4096];
    const auto n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n == 0) return false;
    if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK;
    try {
      if (!c.upgraded) {
        c.in.append(buf, static_cast<std::size_t>(n));
        const auto req = ws::parse_http_request(c.in);
        if (!req) return true;
        if (!req->wants_upgrade()) {
          c.out += static_response(req->path);
          c.closing = true;
          return write_client(c);
        }
        c.out += ws::handshake_response(*req);
        c.upgraded = true;
        c.driver = !driver_present();
        c.out += ws::encode_frame(ws::Text, session_.hello_message(c.driver).dump());
        c.out += ws::encode_frame(ws::Text, session_.state_message().dump());
        log(std::string(c.driver ? "driver" : "observer") + " connected");
        if (!c.in.empty()) c.decoder.feed(c.in.data(), c.in.size());
        c.in.clear();
      } else {
        c.decoder.feed(buf, static_cast<std::size_t>(n));
      }
      while (auto m = c.decoder.next()) {
        switch (m->op) {
          case ws::Ping: c.out += ws::encode_frame(ws::Pong, m->payload); break;
          case ws::Pong: break;
          case ws::Close:
            c.out += ws::encode_frame(ws::Close, m->payload.substr(0, 2));
            c.closing = true;
            break;
          case ws::Binary: c.out += ws::encode_frame(ws::Text, error_message("binary messages are not supported").dump()); break;
          default: {
            const bool was_running = !session_.status().terminal();
            const auto seed = session_.episode_seed();
            const auto r = session_.handle_message(m->payload, c.driver);
            if (r.reply) c.out += ws::encode_frame(ws::Text, r.reply->dump());
            if (session_.episode_seed() != seed) on_reset(was_running, seed);
          }
        }
      }
    } catch (const ws::ProtocolError& e) {
      c.out += ws::encode_frame(ws::Close, std::string("\x03\xea", 2) + e.what());
      c.closing = true;
    }
    return write_client(c);
  }

  void on_reset(bool was_running, std::uint64_t old_seed) {
    if (was_running) {
      nlohmann::json m{{"type", "episode"}, {"seed", old_seed}, {"status", "reset"}};
      if (written_seen_ < session_.written().size()) {
        m["file"] = session_.written().back();
        written_seen_ = session_.written().size();
      }
      broadcast(m);
    }
    for (auto& c : clients_)
      if (c.upgraded) c.out += ws::encode_frame(ws::Text, session_.hello_message(c.driver).dump());
  }

  std::string static_response(std::string path) const {
    auto reply = [](int code, const std::string& type, const std::string& body) {
      std::ostringstream s;
      s << "HTTP/1.1 " << code << (code == 200 ? " OK" : " Not Found") << "\r\nContent-Type: " << type
        << "\r\nContent-Length: " << body.size() << "\r\nConnection: close\r\n\r\n"
        << body;
      return s.str();
    };
    if (path.find("..") != std::string::npos || opt_.static_dir.empty())
      return reply(404, "text/plain", "websocket endpoint only\n");
    if (path == "/") path = "/index.html";
    const auto file = opt_.static_dir / path.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in) return reply(404, "text/plain", "not found\n");
    std::stringstream body;
    body << in.rdbuf();
    const auto ext = file.extension().string();
    const std::string type = ext == ".html" ? "text/html" : ext == ".js" ? "text/javascript" : ext == ".css" ? "text/css"
                             : ext == ".json" ? "application/json" : "application/octet-stream";
    return reply(200, type, body.str());
  }

  Session session_;
  ServerOptions opt_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::list<Client> clients_;
  int episodes_ = 0;
  std::size_t written_seen_ = 0;
};

}  // namespace hiernav::teleop

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace hiernav::teleop::ws {

/// Violation of the framing rules; the connection should be closed.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string base64(const unsigned char* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3) + 1, '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(n));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

/// Sec-WebSocket-Accept value for a client key.
inline std::string accept_key(const std::string& client_key) {
  const std::string s = client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(s.data()), s.size(), digest);
  return base64(digest, sizeof digest);
}

struct HttpRequest {
  std::string method, path;
  std::map<std::string, std::string> headers;  // lower-case names

  std::string header(const std::string& name) const {
    const auto it = headers.find(name);
    return it == headers.end() ? std::string() : it->second;
  }
  bool wants_upgrade() const {
    auto lower = [](std::string s) {
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      return s;
    };
    return lower(header("upgrade")) == "websocket" && lower(header("connection")).find("upgrade") != std::string::npos;
  }
};

/// Parses a request head once `buf` holds it completely; consumes it.
inline std::optional<HttpRequest> parse_http_request(std::string& buf) {
  const auto end = buf.find("\r\n\r\n");
  if (end == std::string::npos) {
    if (buf.size() > 16384) throw ProtocolError("request head too large");
    return std::nullopt;
  }
  HttpRequest req;
  std::size_t pos = buf.find("\r\n");
  const std::string line = buf.substr(0, pos);
  const auto sp1 = line.find(' '), sp2 = line.rfind(' ');
  if (sp1 == std::string::npos || sp2 == sp1) throw ProtocolError("bad request line");
  req.method = line.substr(0, sp1);
  req.path = line.substr(sp1 + 1, sp2 - sp1 - 1);
  while (pos < end) {
    const auto next = buf.find("\r\n", pos + 2);
    const std::string h = buf.substr(pos + 2, next - pos - 2);
    const auto colon = h.find(':');
    if (colon != std::string::npos) {
      std::string name = h.substr(0, colon), value = h.substr(colon + 1);
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      value.erase(0, value.find_first_not_of(" \t"));
      value.erase(value.find_last_not_of(" \t") + 1);
      req.headers[name] = value;
    }
    pos = next;
  }
  buf.erase(0, end + 4);
  return req;
}

inline std::string handshake_response(const HttpRequest& req) {
  const auto key = req.header("sec-websocket-key");
  if (key.empty() || req.header("sec-websocket-version") != "13") throw ProtocolError("missing key or version 13");
  return "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
         accept_key(key) + "\r\n\r\n";
}

enum Opcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

/// Server-to-client frame: final, unmasked.
inline std::string encode_frame(Opcode op, const std::string& payload) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | op));
  const std::uint64_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n <= 0xffff) {
    f.push_back(static_cast<char>(126));
    f.push_back(static_cast<char>(n >> 8));
    f.push_back(static_cast<char>(n & 0xff));
  } else {
    f.push_back(static_cast<char>(127));
    for (int s = 56; s >= 0; s -= 8) f.push_back(static_cast<char>((n >> s) & 0xff));
  }
  return f + payload;
}

/// Client-to-server frame (masked), for tests and scripted clients.
inline std::string encode_client_frame(Opcode op, const std::string& payload, std::uint32_t mask, bool fin = true) {
  std::string f;
  f.push_back(static_cast<char>((fin ? 0x80 : 0x00) | op));
  const std::uint64_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(0x80 | n));
  } else if (n <= 0xffff) {
    f.push_back(static_cast<char>(0x80 | 126));
    f.push_back(static_cast<char>(n >> 8));
    f.push_back(static_cast<char>(n & 0xff));
  } else {
    f.push_back(static_cast<char>(0x80 | 127));
    for (int s = 56; s >= 0; s -= 8) f.push_back(static_cast<char>((n >> s) & 0xff));
  }
  const unsigned char m[4] = {static_cast<unsigned char>(mask >> 24), static_cast<unsigned char>(mask >> 16),
                              static_cast<unsigned char>(mask >> 8), static_cast<unsigned char>(mask)};
  f.append(reinterpret_cast<const char*>(m), 4);
  for (std::size_t i = 0; i < payload.size(); ++i) f.push_back(static_cast<char>(payload[i] ^ m[i % 4]));
  return f;
}

struct Message {
  Opcode op = Text;
  std::string payload;
};

/// Incremental decoder for client frames: reassembles fragmented messages
/// and passes control frames through as they arrive.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_message = 1 << 20) : max_(max_message) {}

  void feed(const char* data, std::size_t n) { buf_.append(data, n); }

  std::optional<Message> next() {
    for (;;) {
      if (buf_.size() < 2) return std::nullopt;
      const auto b0 = static_cast<unsigned char>(buf_[0]), b1 = static_cast<unsigned char>(buf_[1]);
      const bool fin = b0 & 0x80;
      const auto op = static_cast<Opcode>(b0 & 0x0f);
      if (b0 & 0x70) throw ProtocolError("reserved bits set");
      if (!(b1 & 0x80)) throw ProtocolError("client frames must be masked");
      std::uint64_t len = b1 & 0x7f;
      std::size_t head = 2;
      if (len == 126) {
        if (buf_.size() < 4) return std::nullopt;
        len = (static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[2])) << 8) |
              static_cast<unsigned char>(buf_[3]);
        head = 4;
      } else if (len == 127) {
        if (buf_.size() < 10) return std::nullopt;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(buf_[2 + static_cast<std::size_t>(i)]);
        head = 10;
      }
      const bool control = op & 0x8;
      if (control && (len > 125 || !fin)) throw ProtocolError("bad control frame");
      if (len > max_) throw ProtocolError("message too large");
      if (buf_.size() < head + 4 + len) return std::nullopt;
      const unsigned char* mask = reinterpret_cast<const unsigned char*>(buf_.data() + head);
      std::string payload(len, '\0');
      for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<char>(buf_[head + 4 + i] ^ mask[i % 4]);
      buf_.erase(0, head + 4 + len);

      if (control) return Message{op, std::move(payload)};
      if (op == Continuation) {
        if (!in_fragment_) throw ProtocolError("continuation without a started message");
      } else {
        if (in_fragment_) throw ProtocolError("new message inside a fragmented one");
        if (op != Text && op != Binary) throw ProtocolError("unknown opcode");
        frag_op_ = op;
        frag_.clear();
      }
      frag_ += payload;
      if (frag_.size() > max_) throw ProtocolError("message too large");
      in_fragment_ = !fin;
      if (fin) return Message{frag_op_, std::move(frag_)};
    }
  }

 private:
  std::size_t max_;
  std::string buf_, frag_;
  Opcode frag_op_ = Text;
  bool in_fragment_ = false;
};

}  // namespace hiernav::teleop::ws

#include "canopy/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <json.hpp>
#include <stdexcept>

namespace canopy {

using nlohmann::json;

namespace {

constexpr char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<std::uint8_t> frame_to_bytes(const Frame& f) {
  std::vector<std::uint8_t> out(3 * sizeof(std::int32_t) +
                                f.data.size() * sizeof(float));
  std::int32_t hdr[3] = {f.width, f.height, Frame::kChannels};
  std::memcpy(out.data(), hdr, sizeof(hdr));
  std::memcpy(out.data() + sizeof(hdr), f.data.data(),
              f.data.size() * sizeof(float));
  return out;
}

bool frame_from_bytes(const std::vector<std::uint8_t>& bytes, Frame& f) {
  if (bytes.size() < 3 * sizeof(std::int32_t)) return false;
  std::int32_t hdr[3];
  std::memcpy(hdr, bytes.data(), sizeof(hdr));
  if (hdr[0] <= 0 || hdr[1] <= 0 || hdr[2] != Frame::kChannels) return false;
  size_t n = static_cast<size_t>(hdr[0]) * hdr[1] * Frame::kChannels;
  if (bytes.size() != sizeof(hdr) + n * sizeof(float)) return false;
  f.width = hdr[0];
  f.height = hdr[1];
  f.data.resize(n);
  std::memcpy(f.data.data(), bytes.data() + sizeof(hdr), n * sizeof(float));
  return true;
}

const char* type_name(WireMessage::Type t) {
  switch (t) {
    case WireMessage::Type::hello: return "hello";
    case WireMessage::Type::observation: return "observation";
    case WireMessage::Type::action: return "action";
    case WireMessage::Type::episode_end: return "episode_end";
    case WireMessage::Type::error: return "error";
  }
  return "?";
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (size_t i = 0; i < n; i += 3) {
    std::uint32_t chunk = data[i] << 16;
    if (i + 1 < n) chunk |= data[i + 1] << 8;
    if (i + 2 < n) chunk |= data[i + 2];
    out.push_back(kB64[(chunk >> 18) & 63]);
    out.push_back(kB64[(chunk >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t chunk = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    int v = b64_value(c);
    if (v < 0) throw std::invalid_argument("base64: bad character");
    chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((chunk >> bits) & 0xff));
    }
  }
  return out;
}

std::string encode_message(const WireMessage& msg) {
  json j;
  j["type"] = type_name(msg.type);
  j["seq"] = msg.seq;
  switch (msg.type) {
    case WireMessage::Type::hello:
      j["role"] = msg.text;
      break;
    case WireMessage::Type::observation: {
      std::vector<std::uint8_t> bytes = frame_to_bytes(msg.frame);
      j["frame_b64"] = base64_encode(bytes.data(), bytes.size());
      j["joints"] = msg.joints;
      j["ee"] = std::array<double, 3>{msg.ee.x(), msg.ee.y(), msg.ee.z()};
      break;
    }
    case WireMessage::Type::action:
      j["delta"] = msg.delta;
      break;
    case WireMessage::Type::episode_end:
      j["steps"] = msg.steps;
      j["total_reward"] = msg.total_reward;
      j["success"] = msg.success;
      break;
    case WireMessage::Type::error:
      j["message"] = msg.text;
      break;
  }
  return j.dump() + "\n";
}

DecodeResult decode_message(const std::string& line) {
  DecodeResult res;
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    res.error = e.what();
    res.error_offset = e.byte;
    return res;
  }
  try {
    if (!j.is_object()) {
      res.error = "not a JSON object";
      return res;
    }
    std::string type = j.at("type").get<std::string>();
    res.msg.seq = j.at("seq").get<std::uint64_t>();
    if (type == "hello") {
      res.msg.type = WireMessage::Type::hello;
      res.msg.text = j.value("role", "");
    } else if (type == "observation") {
      res.msg.type = WireMessage::Type::observation;
      std::vector<std::uint8_t> bytes =
          base64_decode(j.at("frame_b64").get<std::string>());
      if (!frame_from_bytes(bytes, res.msg.frame)) {
        res.error = "bad frame blob";
        return res;
      }
      auto joints = j.at("joints");
      for (int i = 0; i < kArmJoints; ++i)
        res.msg.joints[i] = joints.at(i).get<double>();
      auto ee = j.at("ee");
      for (int i = 0; i < 3; ++i) res.msg.ee[i] = ee.at(i).get<double>();
    } else if (type == "action") {
      res.msg.type = WireMessage::Type::action;
      auto delta = j.at("delta");
      for (int i = 0; i < kArmJoints; ++i)
        res.msg.delta[i] = delta.at(i).get<double>();
    } else if (type == "episode_end") {
      res.msg.type = WireMessage::Type::episode_end;
      res.msg.steps = j.at("steps").get<int>();
      res.msg.total_reward = j.at("total_reward").get<double>();
      res.msg.success = j.at("success").get<bool>();
    } else if (type == "error") {
      res.msg.type = WireMessage::Type::error;
      res.msg.text = j.value("message", "");
    } else {
      res.error = "unknown message type '" + type + "'";
      return res;
    }
  } catch (const std::exception& e) {
    res.error = e.what();
    return res;
  }
  res.ok = true;
  return res;
}

void LineReader::feed(const char* data, size_t n) { buf_.append(data, n); }

bool LineReader::next(std::string& line) {
  size_t pos = buf_.find('\n');
  if (pos == std::string::npos) {
    // cap unbounded garbage without ever throwing
    if (buf_.size() > (16u << 20)) buf_.clear();
    return false;
  }
  line = buf_.substr(0, pos);
  buf_.erase(0, pos + 1);
  return true;
}

namespace {

struct Socket {
  int fd = -1;
  ~Socket() { close_now(); }
  void close_now() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

void send_all(int fd, const std::string& data) {
  size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) throw std::runtime_error("bridge: send failed");
    sent += static_cast<size_t>(n);
  }
}

// Reads until a complete line, a deadline, or EOF. Returns:
//  1 = line available, 0 = deadline expired, -1 = connection closed.
int read_line(int fd, LineReader& reader, std::string& line,
              double timeout_seconds) {
  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(
                                     std::chrono::duration<double>(
                                         timeout_seconds < 0 ? 0
                                                             : timeout_seconds));
  for (;;) {
    if (reader.next(line)) return 1;
    int wait_ms = -1;
    if (timeout_seconds >= 0) {
      auto remain = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - clock::now())
                        .count();
      if (remain <= 0) return 0;
      wait_ms = static_cast<int>(remain);
    }
    pollfd p{fd, POLLIN, 0};
    int pr = ::poll(&p, 1, wait_ms);
    if (pr == 0) return 0;
    if (pr < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    char buf[65536];
    ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) return -1;
    reader.feed(buf, static_cast<size_t>(n));
  }
}

int make_listener(const std::string& host, int port, int* bound_port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("bridge: socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw std::runtime_error("bridge: bad listen address " + host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw std::runtime_error("bridge: bind failed on " + host + ":" +
                             std::to_string(port));
  }
  if (::listen(fd, 1) != 0) {
    ::close(fd);
    throw std::runtime_error("bridge: listen failed");
  }
  if (bound_port) {
    sockaddr_in actual{};
    socklen_t len = sizeof(actual);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&actual), &len);
    *bound_port = ntohs(actual.sin_port);
  }
  return fd;
}

}  // namespace

SessionLog serve_env(const std::string& host, int port, Env& env,
                     const ServeOptions& opt, int* bound_port) {
  SessionLog log;
  Socket listener;
  listener.fd = make_listener(host, port, bound_port);

  const double tick_seconds = opt.rate_hz > 0 ? 1.0 / opt.rate_hz : -1.0;
  std::uint64_t episode_counter = 0;
  int sessions = 0;

  while (opt.max_sessions == 0 || sessions < opt.max_sessions) {
    Socket client;
    client.fd = ::accept(listener.fd, nullptr, nullptr);
    if (client.fd < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("bridge: accept failed");
    }
    ++sessions;
    int one = 1;
    ::setsockopt(client.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    log.events.push_back("session open");

    LineReader reader;
    std::uint64_t server_seq = 0;

    WireMessage hello;
    hello.type = WireMessage::Type::hello;
    hello.seq = server_seq++;
    hello.text = "env-server";
    try {
      send_all(client.fd, encode_message(hello));
    } catch (const std::exception&) {
      continue;
    }

    bool session_alive = true;
    while (session_alive &&
           (opt.max_episodes == 0 || log.episodes < opt.max_episodes)) {
      std::uint64_t episode_seed =
          Rng::mix(opt.seed ^ (0x5eedull + episode_counter++));
      auto [obs, setup] = env.reset(episode_seed);
      double episode_reward = 0.0;
      std::array<double, kArmJoints> last_action{};

      while (!env.done()) {
        WireMessage m;
        m.type = WireMessage::Type::observation;
        m.seq = server_seq++;
        m.frame = obs.frame;
        m.joints = obs.joints;
        m.ee = obs.ee_position;
        try {
          send_all(client.fd, encode_message(m));
        } catch (const std::exception&) {
          session_alive = false;
          break;
        }

        std::array<double, kArmJoints> action = last_action;
        bool got_action = false;
        for (;;) {
          std::string line;
          int r = read_line(client.fd, reader, line, tick_seconds);
          if (r < 0) {
            session_alive = false;
            break;
          }
          if (r == 0) {  // deadline: repeat the last action
            ++log.missed_deadlines;
            log.events.push_back("missed deadline at seq " +
                                 std::to_string(m.seq));
            break;
          }
          DecodeResult dec = decode_message(line);
          if (!dec.ok) {
            ++log.decode_errors;
            log.events.push_back("decode error: " + dec.error);
            continue;  // resynchronize at the next line
          }
          if (dec.msg.type == WireMessage::Type::hello) continue;
          if (dec.msg.type != WireMessage::Type::action) {
            log.events.push_back("unexpected message type");
            continue;
          }
          if (dec.msg.seq != m.seq) {
            WireMessage err;
            err.type = WireMessage::Type::error;
            err.seq = server_seq++;
            err.text = "action seq " + std::to_string(dec.msg.seq) +
                       " does not echo observation seq " +
                       std::to_string(m.seq);
            try {
              send_all(client.fd, encode_message(err));
            } catch (const std::exception&) {
            }
            session_alive = false;
            break;
          }
          action = dec.msg.delta;
          got_action = true;
          break;
        }
        if (!session_alive) break;
        (void)got_action;

        last_action = action;
        StepResult r = env.step(action);
        ++log.ticks;
        log.actions_applied.push_back(action);
        log.rewards.push_back(r.reward.total);
        episode_reward += r.reward.total;
        obs = r.obs;

        if (r.done) {
          WireMessage end;
          end.type = WireMessage::Type::episode_end;
          end.seq = server_seq++;
          end.steps = env.steps();
          end.total_reward = episode_reward;
          end.success = r.info.reason == DoneReason::success;
          try {
            send_all(client.fd, encode_message(end));
          } catch (const std::exception&) {
            session_alive = false;
          }
          ++log.episodes;
          log.events.push_back("episode_end after " +
                               std::to_string(env.steps()) + " steps");
        }
      }
      if (!session_alive)
        log.events.push_back("client disconnected, episode aborted");
    }
    if (opt.max_episodes > 0 && log.episodes >= opt.max_episodes) break;
  }
  return log;
}

ClientResult run_policy_client(const std::string& host, int port,
                               const Agent& agent, const ClientOptions& opt) {
  Socket sock;
  sock.fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (sock.fd < 0) throw std::runtime_error("bridge: socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("bridge: bad address " + host);
  if (::connect(sock.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw std::runtime_error("bridge: connect failed to " + host + ":" +
                             std::to_string(port));
  int one = 1;
  ::setsockopt(sock.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  WireMessage hello;
  hello.type = WireMessage::Type::hello;
  hello.seq = 0;
  hello.text = "policy-client";
  send_all(sock.fd, encode_message(hello));

  ClientResult result;
  LineReader reader;
  bool have_seq = false;
  std::uint64_t last_seq = 0;

  while (result.episodes < opt.max_episodes) {
    std::string line;
    int r = read_line(sock.fd, reader, line, -1.0);
    if (r < 0) break;  // server closed
    if (r == 0) continue;
    DecodeResult dec = decode_message(line);
    if (!dec.ok) continue;

    if (have_seq && dec.msg.seq <= last_seq)
      throw std::runtime_error("bridge client: non-monotone seq " +
                               std::to_string(dec.msg.seq) + " after " +
                               std::to_string(last_seq));
    last_seq = dec.msg.seq;
    have_seq = true;

    switch (dec.msg.type) {
      case WireMessage::Type::observation: {
        Observation obs;
        obs.frame = dec.msg.frame;
        obs.joints = dec.msg.joints;
        obs.ee_position = dec.msg.ee;
        std::array<double, kArmJoints> action =
            agent.act_mean(obs, opt.zeroed_mask);
        WireMessage reply;
        reply.type = WireMessage::Type::action;
        reply.seq = dec.msg.seq;  // echo
        reply.delta = action;
        send_all(sock.fd, encode_message(reply));
        result.observation_seqs.push_back(dec.msg.seq);
        result.actions.push_back(action);
        break;
      }
      case WireMessage::Type::episode_end:
        ++result.episodes;
        result.episode_rewards.push_back(dec.msg.total_reward);
        break;
      case WireMessage::Type::error:
        throw std::runtime_error("bridge client: server error: " +
                                 dec.msg.text);
      default:
        break;
    }
  }
  return result;
}

}  // namespace canopy

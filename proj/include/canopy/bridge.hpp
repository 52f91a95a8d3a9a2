#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "canopy/agent.hpp"
#include "canopy/env.hpp"

namespace canopy {

// Newline-delimited JSON over a stream socket: the environment server
// publishes observations at a fixed rate, a policy client answers with
// actions. Message seq numbers increase strictly per direction; an action
// echoes the seq of the observation it answers.
struct WireMessage {
  enum class Type { hello, observation, action, episode_end, error };
  Type type = Type::hello;
  std::uint64_t seq = 0;

  // observation payload
  Frame frame;
  std::array<double, kArmJoints> joints{};
  Vec3 ee = Vec3::Zero();

  // action payload
  std::array<double, kArmJoints> delta{};

  // episode_end payload
  int steps = 0;
  double total_reward = 0.0;
  bool success = false;

  // hello role / error message
  std::string text;
};

std::string encode_message(const WireMessage& msg);  // newline-terminated

struct DecodeResult {
  bool ok = false;
  WireMessage msg;
  std::string error;
  size_t error_offset = 0;  // byte offset within the line
};

DecodeResult decode_message(const std::string& line);

// Splits a byte stream into newline-terminated lines; never throws on
// garbage, the decoder reports per-line errors instead.
class LineReader {
 public:
  void feed(const char* data, size_t n);
  bool next(std::string& line);  // false when no complete line is buffered

 private:
  std::string buf_;
};

std::string base64_encode(const std::uint8_t* data, size_t n);
std::vector<std::uint8_t> base64_decode(const std::string& text);

struct ServeOptions {
  double rate_hz = 1.0;  // 0 disables the tick deadline (lockstep mode)
  int max_episodes = 0;  // stop after this many episodes (0 = unlimited)
  int max_sessions = 1;  // accepted connections before returning (0 = forever)
  std::uint64_t seed = 0;
  bool log_to_stderr = false;
};

struct SessionLog {
  int episodes = 0;
  int ticks = 0;
  int missed_deadlines = 0;
  int decode_errors = 0;
  std::vector<std::array<double, kArmJoints>> actions_applied;
  std::vector<double> rewards;
  std::vector<std::string> events;
};

// Binds host:port (port 0 picks an ephemeral one, reported via bound_port),
// then serves observation/action ticks until the episode/session limits hit.
// A client disconnect aborts the episode and resumes listening.
SessionLog serve_env(const std::string& host, int port, Env& env,
                     const ServeOptions& opt, int* bound_port = nullptr);

struct ClientOptions {
  bool zeroed_mask = false;  // deployment mode: zero the privileged channel
  int max_episodes = 1;
};

struct ClientResult {
  int episodes = 0;
  std::vector<std::uint64_t> observation_seqs;
  std::vector<std::array<double, kArmJoints>> actions;
  std::vector<double> episode_rewards;  // from episode_end messages
};

// Connects, decodes observations, replies with the deterministic (mean)
// action. Throws on protocol violations (non-monotone seq).
ClientResult run_policy_client(const std::string& host, int port,
                               const Agent& agent, const ClientOptions& opt);

}  // namespace canopy

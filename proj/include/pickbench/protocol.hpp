// Episode streaming wire protocol: 4-byte big-endian length prefix, UTF-8
// JSON payload, 1 MiB cap. Transport-independent; the recorder binds it to
// TCP but any reliable byte stream works.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pickbench {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kProtocolVersion = 1;
constexpr size_t kMaxPayloadBytes = 1 << 20;

struct HelloMsg {
  int protocol_version = kProtocolVersion;
  std::string env_config_hash;
};

struct EpisodeBeginMsg {
  long long episode_id = 0;
  std::string task;
  std::string regime;
  uint64_t placement_seed = 0;
};

struct FrameMsg {
  int t = 0;
  std::array<float, 15> state{};
  std::array<float, 7> action{};
};

struct EpisodeEndMsg {
  long long episode_id = 0;
  bool success = false;
};

struct AckMsg {
  long long episode_id = 0;
  bool stored = false;
};

struct ByeMsg {
  std::string reason;  // optional; omitted from the payload when empty
};

using Message =
    std::variant<HelloMsg, EpisodeBeginMsg, FrameMsg, EpisodeEndMsg, AckMsg, ByeMsg>;

std::string message_type(const Message& m);

// Deterministic payload text (sorted keys, floats at 9 significant digits).
std::string encode_payload(const Message& m);
Message decode_payload(const std::string& payload);

// Length-prefixed frame; throws ProtocolError on oversize payloads.
std::vector<uint8_t> frame_encode(const Message& m);

// Incremental frame extraction from a byte stream.
class FrameDecoder {
 public:
  void feed(const uint8_t* data, size_t n);
  // One decoded message, or nullopt when more bytes are needed.
  std::optional<Message> next();
  size_t buffered() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
};

// Episode-stream ordering rules: FRAME only between BEGIN and END of the
// same episode, contiguous frame times, no nested episodes.
class StreamValidator {
 public:
  void on_message(const Message& m);
  bool in_episode() const { return in_episode_; }

 private:
  bool in_episode_ = false;
  long long episode_id_ = 0;
  int next_t_ = 0;
};

}  // namespace pickbench

#include "pickbench/protocol.hpp"

#include <json.hpp>

#include "pickbench/util.hpp"

namespace pickbench {

namespace {

using nlohmann::json;

template <size_t N>
std::string float_array_json(const std::array<float, N>& values) {
  std::string out = "[";
  for (size_t i = 0; i < N; ++i) {
    if (i) out += ",";
    out += fmt_f32(values[i]);
  }
  out += "]";
  return out;
}

template <size_t N>
void parse_float_array(const json& j, const char* key, std::array<float, N>& out) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    throw ProtocolError(std::string("field ") + key + " must be an array of " +
                        std::to_string(N) + " numbers");
  }
  for (size_t i = 0; i < N; ++i) {
    if (!arr[i].is_number()) {
      throw ProtocolError(std::string("field ") + key + " must hold numbers");
    }
    out[i] = arr[i].get<float>();
  }
}

}  // namespace

std::string message_type(const Message& m) {
  switch (m.index()) {
    case 0: return "HELLO";
    case 1: return "EPISODE_BEGIN";
    case 2: return "FRAME";
    case 3: return "EPISODE_END";
    case 4: return "ACK";
    case 5: return "BYE";
  }
  return "?";
}

std::string encode_payload(const Message& m) {
  if (const auto* hello = std::get_if<HelloMsg>(&m)) {
    return json{{"env_config_hash", hello->env_config_hash},
                {"protocol_version", hello->protocol_version},
                {"type", "HELLO"}}
        .dump();
  }
  if (const auto* begin = std::get_if<EpisodeBeginMsg>(&m)) {
    return json{{"episode_id", begin->episode_id},
                {"placement_seed", begin->placement_seed},
                {"regime", begin->regime},
                {"task", begin->task},
                {"type", "EPISODE_BEGIN"}}
        .dump();
  }
  if (const auto* frame = std::get_if<FrameMsg>(&m)) {
    // hand-built so float payloads serialize with fmt_f32
    std::string out = "{\"action\":" + float_array_json(frame->action);
    out += ",\"state\":" + float_array_json(frame->state);
    out += ",\"t\":" + std::to_string(frame->t);
    out += ",\"type\":\"FRAME\"}";
    return out;
  }
  if (const auto* end = std::get_if<EpisodeEndMsg>(&m)) {
    return json{{"episode_id", end->episode_id},
                {"success", end->success},
                {"type", "EPISODE_END"}}
        .dump();
  }
  if (const auto* ack = std::get_if<AckMsg>(&m)) {
    return json{{"episode_id", ack->episode_id},
                {"stored", ack->stored},
                {"type", "ACK"}}
        .dump();
  }
  const auto& bye = std::get<ByeMsg>(m);
  if (bye.reason.empty()) return json{{"type", "BYE"}}.dump();
  return json{{"reason", bye.reason}, {"type", "BYE"}}.dump();
}

Message decode_payload(const std::string& payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("payload is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ProtocolError("payload must be an object with a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  try {
    if (type == "HELLO") {
      HelloMsg m;
      m.protocol_version = j.at("protocol_version").get<int>();
      m.env_config_hash = j.at("env_config_hash").get<std::string>();
      if (m.protocol_version != kProtocolVersion) {
        throw ProtocolError("unsupported protocol version " +
                            std::to_string(m.protocol_version));
      }
      return m;
    }
    if (type == "EPISODE_BEGIN") {
      EpisodeBeginMsg m;
      m.episode_id = j.at("episode_id").get<long long>();
      m.task = j.at("task").get<std::string>();
      m.regime = j.at("regime").get<std::string>();
      m.placement_seed = j.at("placement_seed").get<uint64_t>();
      return m;
    }
    if (type == "FRAME") {
      FrameMsg m;
      m.t = j.at("t").get<int>();
      parse_float_array(j, "state", m.state);
      parse_float_array(j, "action", m.action);
      return m;
    }
    if (type == "EPISODE_END") {
      EpisodeEndMsg m;
      m.episode_id = j.at("episode_id").get<long long>();
      m.success = j.at("success").get<bool>();
      return m;
    }
    if (type == "ACK") {
      AckMsg m;
      m.episode_id = j.at("episode_id").get<long long>();
      m.stored = j.at("stored").get<bool>();
      return m;
    }
    if (type == "BYE") {
      ByeMsg m;
      if (j.contains("reason")) m.reason = j["reason"].get<std::string>();
      return m;
    }
  } catch (const json::exception& e) {
    throw ProtocolError("malformed " + type + " payload: " + e.what());
  }
  throw ProtocolError("unknown message type: " + type);
}

std::vector<uint8_t> frame_encode(const Message& m) {
  const std::string payload = encode_payload(m);
  if (payload.size() > kMaxPayloadBytes) {
    throw ProtocolError("payload of " + std::to_string(payload.size()) +
                        " bytes exceeds the 1 MiB limit");
  }
  std::vector<uint8_t> out(4 + payload.size());
  const uint32_t n = static_cast<uint32_t>(payload.size());
  out[0] = static_cast<uint8_t>((n >> 24) & 0xFF);
  out[1] = static_cast<uint8_t>((n >> 16) & 0xFF);
  out[2] = static_cast<uint8_t>((n >> 8) & 0xFF);
  out[3] = static_cast<uint8_t>(n & 0xFF);
  std::copy(payload.begin(), payload.end(), out.begin() + 4);
  return out;
}

void FrameDecoder::feed(const uint8_t* data, size_t n) {
  buf_.insert(buf_.end(), data, data + n);
}

std::optional<Message> FrameDecoder::next() {
  if (buf_.size() < 4) return std::nullopt;
  const uint32_t n = (static_cast<uint32_t>(buf_[0]) << 24) |
                     (static_cast<uint32_t>(buf_[1]) << 16) |
                     (static_cast<uint32_t>(buf_[2]) << 8) |
                     static_cast<uint32_t>(buf_[3]);
  if (n > kMaxPayloadBytes) {
    throw ProtocolError("incoming frame of " + std::to_string(n) +
                        " bytes exceeds the 1 MiB limit");
  }
  if (buf_.size() < 4 + static_cast<size_t>(n)) return std::nullopt;
  const std::string payload(buf_.begin() + 4, buf_.begin() + 4 + n);
  buf_.erase(buf_.begin(), buf_.begin() + 4 + n);
  return decode_payload(payload);
}

void StreamValidator::on_message(const Message& m) {
  if (const auto* begin = std::get_if<EpisodeBeginMsg>(&m)) {
    if (in_episode_) {
      throw ProtocolError("EPISODE_BEGIN inside an open episode " +
                          std::to_string(episode_id_));
    }
    in_episode_ = true;
    episode_id_ = begin->episode_id;
    next_t_ = 0;
    return;
  }
  if (const auto* frame = std::get_if<FrameMsg>(&m)) {
    if (!in_episode_) throw ProtocolError("FRAME outside an episode");
    if (frame->t != next_t_) {
      throw ProtocolError("FRAME t=" + std::to_string(frame->t) + ", expected " +
                          std::to_string(next_t_));
    }
    next_t_ += 1;
    return;
  }
  if (const auto* end = std::get_if<EpisodeEndMsg>(&m)) {
    if (!in_episode_) throw ProtocolError("EPISODE_END without EPISODE_BEGIN");
    if (end->episode_id != episode_id_) {
      throw ProtocolError("EPISODE_END id mismatch: got " +
                          std::to_string(end->episode_id) + ", expected " +
                          std::to_string(episode_id_));
    }
    in_episode_ = false;
    return;
  }
  // HELLO / ACK / BYE are not valid inside an episode body
  if (in_episode_) {
    throw ProtocolError(message_type(m) + " inside an open episode");
  }
}

}  // namespace pickbench

#include "pickbench/recorder.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <thread>

namespace pickbench {

namespace {

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TcpError("bad IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpStream::~TcpStream() { close(); }

TcpStream TcpStream::connect(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TcpError("socket() failed");
  sockaddr_in addr = make_addr(host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int err = errno;
    ::close(fd);
    throw TcpError("connect to " + host + ":" + std::to_string(port) +
                   " failed: " + std::strerror(err));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpStream(fd);
}

void TcpStream::set_recv_timeout(double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<long>(seconds);
  tv.tv_usec = static_cast<long>((seconds - tv.tv_sec) * 1e6);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void TcpStream::send_all(const void* data, size_t n) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  size_t sent = 0;
  while (sent < n) {
    const ssize_t k = ::send(fd_, p + sent, n - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TcpError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<size_t>(k);
  }
}

size_t TcpStream::recv_some(void* data, size_t n) {
  while (true) {
    const ssize_t k = ::recv(fd_, data, n, 0);
    if (k >= 0) return static_cast<size_t>(k);
    if (errno == EINTR) continue;
    throw TcpError(std::string("recv failed: ") + std::strerror(errno));
  }
}

void TcpStream::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TcpError("socket() failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TcpError("bind to " + host + ":" + std::to_string(port) +
                   " failed: " + std::strerror(errno));
  }
  if (::listen(fd_, 16) != 0) throw TcpError("listen failed");
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { shutdown(); }

std::optional<TcpStream> TcpListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return TcpStream(fd);
    }
    if (errno == EINTR) continue;
    if (stopped_) return std::nullopt;
    if (errno == EBADF || errno == EINVAL) return std::nullopt;
    throw TcpError(std::string("accept failed: ") + std::strerror(errno));
  }
}

void TcpListener::shutdown() {
  if (fd_ >= 0) {
    stopped_ = true;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void send_message(TcpStream& stream, const Message& m) {
  const auto bytes = frame_encode(m);
  stream.send_all(bytes.data(), bytes.size());
}

std::optional<Message> recv_message(TcpStream& stream, FrameDecoder& decoder) {
  while (true) {
    if (auto m = decoder.next()) return m;
    uint8_t chunk[4096];
    const size_t n = stream.recv_some(chunk, sizeof(chunk));
    if (n == 0) {
      if (decoder.buffered() > 0) {
        throw ProtocolError("connection closed mid-frame");
      }
      return std::nullopt;
    }
    decoder.feed(chunk, n);
  }
}

EpisodeServer::EpisodeServer(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                             std::unique_ptr<Policy> policy, uint64_t base_seed,
                             const ServeOptions& options)
    : cfg_(std::move(cfg)),
      scenario_(scenario),
      policy_(std::move(policy)),
      base_seed_(base_seed),
      options_(options),
      config_hash_(config_hash(*cfg_)),
      listener_(options.host, options.port) {}

void EpisodeServer::request_stop() { listener_.shutdown(); }

long long EpisodeServer::serve() {
  long long acknowledged = 0;
  while (acknowledged < options_.episode_budget) {
    auto maybe_stream = listener_.accept();
    if (!maybe_stream) break;  // stopped
    TcpStream stream = std::move(*maybe_stream);
    stream.set_recv_timeout(options_.session_recv_timeout_s);
    FrameDecoder decoder;

    try {
      const auto first = recv_message(stream, decoder);
      if (!first) continue;
      const auto* hello = std::get_if<HelloMsg>(&*first);
      if (!hello) {
        send_message(stream, ByeMsg{"expected HELLO"});
        continue;
      }
      if (hello->env_config_hash != config_hash_) {
        if (options_.verbose) {
          std::fprintf(stderr, "[serve] refusing client with config hash %s\n",
                       hello->env_config_hash.c_str());
        }
        send_message(stream, ByeMsg{"env config hash mismatch: server has " +
                                    config_hash_});
        continue;
      }
      send_message(stream, HelloMsg{kProtocolVersion, config_hash_});

      bool session_open = true;
      while (session_open && acknowledged < options_.episode_budget) {
        const uint64_t seed = derive_seed(base_seed_, episode_counter_);
        const long long episode_id = static_cast<long long>(episode_counter_);
        episode_counter_ += 1;
        const EpisodeResult result =
            run_episode(cfg_, scenario_, *policy_, seed, true, true);

        send_message(stream, EpisodeBeginMsg{episode_id, result.outcome.task,
                                             scenario_.name(), seed});
        for (size_t t = 0; t < result.states.size(); ++t) {
          FrameMsg f;
          f.t = static_cast<int>(t);
          f.state = result.states[t];
          f.action = result.actions[t];
          send_message(stream, f);
        }
        send_message(stream, EpisodeEndMsg{episode_id, result.outcome.success});

        const auto reply = recv_message(stream, decoder);
        if (!reply) {
          if (options_.verbose) {
            std::fprintf(stderr, "[serve] client gone, episode %lld unacknowledged\n",
                         episode_id);
          }
          session_open = false;
          break;
        }
        if (std::holds_alternative<ByeMsg>(*reply)) {
          session_open = false;
          break;
        }
        const auto* ack = std::get_if<AckMsg>(&*reply);
        if (!ack || ack->episode_id != episode_id) {
          send_message(stream, ByeMsg{"protocol error: expected ACK"});
          session_open = false;
          break;
        }
        acknowledged += 1;
      }
      if (acknowledged >= options_.episode_budget) {
        send_message(stream, ByeMsg{"episode budget exhausted"});
      }
    } catch (const TcpError& e) {
      if (options_.verbose) {
        std::fprintf(stderr, "[serve] session error, partial episode discarded: %s\n",
                     e.what());
      }
    } catch (const ProtocolError& e) {
      if (options_.verbose) {
        std::fprintf(stderr, "[serve] protocol error: %s\n", e.what());
      }
    }
  }
  return acknowledged;
}

long long client_record(const std::string& dataset_dir, const DatasetMeta& meta_template,
                        long long target_successes, const RecordOptions& options) {
  DatasetWriter writer(dataset_dir, meta_template);
  ScenarioConfig scenario;
  from_json(writer.meta().scenario, scenario);
  const std::string scenario_name = scenario.name();

  long long stored = writer.meta().total_episodes;
  int failed_attempts = 0;
  double backoff = options.backoff_initial_s;

  while (stored < target_successes) {
    TcpStream stream;
    try {
      stream = TcpStream::connect(options.host, options.port);
    } catch (const TcpError& e) {
      failed_attempts += 1;
      if (failed_attempts >= options.max_connect_attempts) {
        if (options.verbose) {
          std::fprintf(stderr, "[record] giving up after %d attempts: %s\n",
                       failed_attempts, e.what());
        }
        return stored;
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff = std::min(backoff * 2.0, options.backoff_cap_s);
      continue;
    }
    failed_attempts = 0;
    backoff = options.backoff_initial_s;
    stream.set_recv_timeout(options.recv_timeout_s);
    FrameDecoder decoder;

    try {
      send_message(stream, HelloMsg{kProtocolVersion, writer.meta().env_config_hash});
      const auto reply = recv_message(stream, decoder);
      if (!reply) continue;
      if (const auto* bye = std::get_if<ByeMsg>(&*reply)) {
        throw ProtocolError("server refused the session: " + bye->reason);
      }
      const auto* hello = std::get_if<HelloMsg>(&*reply);
      if (!hello) throw ProtocolError("expected HELLO from the server");
      if (hello->env_config_hash != writer.meta().env_config_hash) {
        throw ProtocolError("server env config hash " + hello->env_config_hash +
                            " does not match the dataset");
      }

      StreamValidator validator;
      std::optional<EpisodeBeginMsg> open_episode;
      std::vector<FrameMsg> frames;

      while (stored < target_successes) {
        const auto msg = recv_message(stream, decoder);
        if (!msg) break;  // disconnect; partial episode dropped below
        validator.on_message(*msg);
        if (const auto* begin = std::get_if<EpisodeBeginMsg>(&*msg)) {
          if (begin->regime != scenario_name) {
            throw ProtocolError("server streams scenario '" + begin->regime +
                                "' but the dataset records '" + scenario_name + "'");
          }
          open_episode = *begin;
          frames.clear();
        } else if (const auto* frame = std::get_if<FrameMsg>(&*msg)) {
          frames.push_back(*frame);
        } else if (const auto* end = std::get_if<EpisodeEndMsg>(&*msg)) {
          bool stored_this = false;
          if (end->success && stored < target_successes) {
            std::vector<std::array<float, 15>> states;
            std::vector<std::array<float, 7>> actions;
            for (const auto& f : frames) {
              states.push_back(f.state);
              actions.push_back(f.action);
            }
            const TrajectoryRecord rec = make_trajectory(
                stored, open_episode->task, open_episode->regime,
                open_episode->placement_seed, true, states, actions,
                writer.meta().fps);
            writer.write_episode(rec.episode, rec.frames);
            stored += 1;
            stored_this = true;
          }
          send_message(stream, AckMsg{end->episode_id, stored_this});
          open_episode.reset();
          frames.clear();
        } else if (std::get_if<ByeMsg>(&*msg)) {
          // server is done; no point reconnecting
          return stored;
        }
      }
      if (open_episode && options.verbose) {
        std::fprintf(stderr, "[record] dropping partial episode %lld\n",
                     open_episode->episode_id);
      }
      if (stored >= target_successes) {
        send_message(stream, ByeMsg{"target reached"});
        return stored;
      }
    } catch (const TcpError& e) {
      if (options.verbose) {
        std::fprintf(stderr, "[record] connection lost, will retry: %s\n", e.what());
      }
    }
  }
  return stored;
}

}  // namespace pickbench

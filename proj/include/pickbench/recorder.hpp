// Client-server episode recording over TCP: the server runs a policy in the
// environment and streams episodes; the client persists the successful ones
// to a dataset, with resume and reconnect.
#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "pickbench/dataset.hpp"
#include "pickbench/policy.hpp"
#include "pickbench/protocol.hpp"
#include "pickbench/rollout.hpp"

namespace pickbench {

struct TcpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept;
  TcpStream& operator=(TcpStream&& other) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream();

  static TcpStream connect(const std::string& host, int port);
  void set_recv_timeout(double seconds);
  void send_all(const void* data, size_t n);
  // bytes read, 0 on orderly shutdown; throws TcpError on timeouts/errors
  size_t recv_some(void* data, size_t n);
  void close();
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener(const std::string& host, int port);  // port 0 grabs an ephemeral port
  ~TcpListener();
  int port() const { return port_; }
  // nullopt once shutdown() was called
  std::optional<TcpStream> accept();
  void shutdown();

 private:
  int fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopped_{false};
};

void send_message(TcpStream& stream, const Message& m);
// nullopt on orderly EOF
std::optional<Message> recv_message(TcpStream& stream, FrameDecoder& decoder);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  long long episode_budget = 0;
  double session_recv_timeout_s = 30.0;
  bool verbose = false;
};

// Streams policy-in-environment episodes to one client at a time; further
// connects queue on the listen backlog. The budget counts acknowledged
// episodes; partial episodes lost to a disconnect are discarded.
class EpisodeServer {
 public:
  EpisodeServer(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                std::unique_ptr<Policy> policy, uint64_t base_seed,
                const ServeOptions& options);
  int port() const { return listener_.port(); }
  long long serve();   // blocks until the budget is exhausted or stopped
  void request_stop();

 private:
  EnvConfigPtr cfg_;
  ScenarioConfig scenario_;
  std::unique_ptr<Policy> policy_;
  uint64_t base_seed_;
  ServeOptions options_;
  std::string config_hash_;
  TcpListener listener_;
  uint64_t episode_counter_ = 0;
};

struct RecordOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  double backoff_initial_s = 0.5;
  double backoff_cap_s = 30.0;
  int max_connect_attempts = 8;
  double recv_timeout_s = 30.0;
  bool verbose = false;
};

// Connects, stores success=true episodes into the dataset at `dataset_dir`
// (created from the meta template, or resumed), ACKs every episode end, and
// returns the dataset's stored total. Reconnects with exponential backoff.
long long client_record(const std::string& dataset_dir, const DatasetMeta& meta_template,
                        long long target_successes, const RecordOptions& options);

}  // namespace pickbench

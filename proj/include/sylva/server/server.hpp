#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "sylva/metrics/metrics.hpp"
#include "sylva/service/config.hpp"
#include "sylva/service/runner.hpp"

namespace sylva::server {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  double speed = 1.0;       // simulated seconds per wall second; <= 0 runs flat out
  bool autostart = false;   // queue the config survey, start and script on launch
  service::RunnerOptions runner;
};

/// Hosts one mission over WebSocket. The mission loop owns the runner and
/// drains the command queue once per tick; every outgoing message is
/// broadcast to all clients. The first client to send a command holds
/// control until it sends {"type":"release"} or disconnects.
class MissionServer {
 public:
  MissionServer(service::MissionConfig config, ServerOptions options);
  ~MissionServer();
  MissionServer(const MissionServer&) = delete;
  MissionServer& operator=(const MissionServer&) = delete;

  /// Binds, then starts the network and mission threads.
  void start();
  /// Stops both threads and closes all connections.
  void stop();
  unsigned short port() const { return port_; }

  /// Blocks until the mission has ended and its report is written.
  metrics::MissionReport wait_report();
  std::optional<metrics::MissionReport> report() const;
  std::size_t clients() const;

  struct Impl;

 private:
  void mission_loop();

  service::MissionConfig config_;
  ServerOptions options_;
  std::unique_ptr<Impl> impl_;
  unsigned short port_ = 0;
  std::thread mission_thread_;
  mutable std::mutex report_mutex_;
  std::condition_variable report_cv_;
  std::optional<metrics::MissionReport> report_;
};

}  // namespace sylva::server

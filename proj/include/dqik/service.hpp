#pragma once

#include "dqik/session.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace dqik {

struct ServiceOptions {
  std::string host{"127.0.0.1"};
  int port{8765};  // 0 picks a free port
  double rate{120.0};  // steps per second
  std::filesystem::path save_path{"scene_final.json"};
  std::size_t max_frame_bytes{64 * 1024};
  std::size_t max_outbound_bytes{8 * 1024 * 1024};
  int max_clients{64};
  /// A client that has sent nothing for this long is treated as raw TCP.
  std::chrono::milliseconds detect_timeout{250};
};

// Wire frames (one JSON document each).
std::string rig_frame(const Rig& rig);
std::string state_frame(const Scene& scene, const StepRecord& record);
std::string error_frame(std::string_view code, std::string_view detail);

/// Streams scene state to clients over newline-delimited JSON on raw TCP or
/// WebSocket (chosen per connection from its first bytes). One thread runs
/// the stepping loop and all socket I/O; client commands are queued and
/// applied between steps.
class Service {
 public:
  /// Binds and listens; throws std::system_error when the address is taken.
  Service(Scene scene, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  int port() const;

  /// Runs until a stop request arrives, then saves the scene to
  /// options.save_path (when non-empty) and returns.
  void run();

  /// Safe from other threads and signal handlers.
  void request_stop();

  /// The scene as left by run().
  const Scene& scene() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dqik

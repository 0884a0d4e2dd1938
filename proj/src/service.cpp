#include "dqik/service.hpp"

#include "dqik/websocket.hpp"
#include "json_doc.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <deque>
#include <iostream>
#include <list>
#include <system_error>
#include <variant>

namespace dqik {

using detail::Cursor;
using detail::json;

std::string rig_frame(const Rig& rig) {
  json out = detail::rig_to_json(rig);
  out["type"] = "rig";
  out["dof"] = rig.dof();
  return out.dump();
}

std::string state_frame(const Scene& scene, const StepRecord& record) {
  const std::vector<EndEffectorPose> current = end_effector_poses(scene.rig, record.pose);
  json effectors = json::array();
  for (int e = 0; e < scene.rig.effector_count(); ++e) {
    json item{{"effector", e},
              {"current",
               {{"position", detail::to_json(current[e].position)},
                {"orientation", detail::to_json(current[e].orientation)}}},
              {"target", nullptr},
              {"error", nullptr}};
    for (int g = 0; g < scene.goals.size(); ++g) {
      const Goal& goal = scene.goals.goals[g];
      if (goal.effector != e) continue;
      item["target"] = {{"position", detail::to_json(goal.target.position)},
                        {"orientation", detail::to_json(goal.target.orientation)},
                        {"pos_weight", goal.pos_weight},
                        {"rot_weight", goal.rot_weight}};
      if (g < static_cast<int>(record.errors.size())) item["error"] = record.errors[g];
    }
    effectors.push_back(std::move(item));
  }
  return json{{"type", "state"},
              {"tick", record.tick},
              {"pose", detail::pose_to_json(record.pose)},
              {"effectors", std::move(effectors)},
              {"iters", record.iterations},
              {"reason", to_string(record.status)},
              {"pgs_reason", to_string(scene.state.diagnostics.reason)}}
      .dump();
}

std::string error_frame(std::string_view code, std::string_view detail) {
  // Details can quote client bytes that are not valid UTF-8.
  return json{{"type", "error"}, {"code", code}, {"detail", detail}}.dump(-1, ' ', false,
                                                                          json::error_handler_t::replace);
}

namespace {

struct SetTarget {
  int effector;
  EndEffectorPose target;
  double pos_weight;
  double rot_weight;
};
struct SetConfig {
  SolverConfig config;
};
struct Stop {};
using Command = std::variant<SetTarget, SetConfig, Stop>;

enum class Mode { Detect, Handshake, Raw, WebSocket };

struct Client {
  int fd{-1};
  Mode mode{Mode::Detect};
  std::string in;
  std::string out;
  std::string fragments;  // partial WebSocket message
  bool discarding{false};  // raw mode: skipping an oversized line
  bool close_after_flush{false};
  std::chrono::steady_clock::time_point connected;
};

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

struct Service::Impl {
  Scene scene;
  ServiceOptions opt;
  int listen_fd{-1};
  int wake_read{-1};
  int wake_write{-1};
  int bound_port{0};
  std::list<Client> clients;
  std::deque<Command> queue;
  bool stopping{false};
  bool stop_pending{false};

  ~Impl() {
    for (Client& c : clients) ::close(c.fd);
    for (int fd : {listen_fd, wake_read, wake_write})
      if (fd >= 0) ::close(fd);
  }

  void open_socket() {
    int fds[2];
    if (::pipe(fds) != 0) throw std::system_error(errno, std::generic_category(), "pipe");
    wake_read = fds[0];
    wake_write = fds[1];
    set_nonblocking(wake_read);
    set_nonblocking(wake_write);

    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) throw std::system_error(errno, std::generic_category(), "socket");
    const int yes = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(opt.port));
    if (::inet_pton(AF_INET, opt.host.c_str(), &addr.sin_addr) != 1)
      throw std::system_error(EINVAL, std::generic_category(), "bad host address " + opt.host);
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw std::system_error(errno, std::generic_category(), "bind " + opt.host + ":" + std::to_string(opt.port));
    if (::listen(listen_fd, 16) != 0) throw std::system_error(errno, std::generic_category(), "listen");
    set_nonblocking(listen_fd);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port = ntohs(addr.sin_port);
  }

  // ---- outbound -------------------------------------------------------

  void send_text(Client& c, std::string_view text) {
    if (c.close_after_flush) return;
    if (c.mode == Mode::WebSocket) {
      c.out += ws::encode_frame(text);
    } else {
      c.out.append(text);
      c.out.push_back('\n');
    }
    if (c.out.size() > opt.max_outbound_bytes) {
      // Slow consumer; drop it rather than grow without bound.
      c.out.clear();
      c.close_after_flush = true;
    }
  }

  void send_error(Client& c, std::string_view code, std::string_view detail) { send_text(c, error_frame(code, detail)); }

  void broadcast(const std::string& text) {
    for (Client& c : clients)
      if (c.mode == Mode::Raw || c.mode == Mode::WebSocket) send_text(c, text);
  }

  // ---- inbound --------------------------------------------------------

  void handle_message(Client& c, std::string_view text) {
    json frame;
    try {
      frame = json::parse(text);
    } catch (const json::exception& e) {
      send_error(c, "bad_request", std::string("malformed JSON: ") + e.what());
      return;
    }
    if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string()) {
      send_error(c, "bad_request", "frame must be an object with a string \"type\"");
      return;
    }
    const std::string type = frame["type"].get<std::string>();
    const auto doc = detail::wrap_document(frame, type);
    const Cursor root(doc);
    try {
      if (type == "get_rig") {
        send_text(c, rig_frame(scene.rig));
      } else if (type == "stop") {
        queue.push_back(Stop{});
        stop_pending = true;
      } else if (type == "set_target") {
        root.only_keys({"type", "effector", "position", "orientation", "pos_weight", "rot_weight"});
        const long effector = root.at("effector").integer();
        if (effector < 0 || effector >= scene.rig.effector_count()) {
          send_error(c, "bad_effector",
                     "effector " + std::to_string(effector) + " does not exist (rig has " +
                         std::to_string(scene.rig.effector_count()) + ")");
          return;
        }
        const Goal* existing = find_goal(scene, static_cast<int>(effector));
        SetTarget cmd{static_cast<int>(effector), {}, existing ? existing->pos_weight : 1.0,
                      existing ? existing->rot_weight : 0.0};
        cmd.target.position = root.at("position").vec3();
        cmd.target.orientation = root.has("orientation") ? root.at("orientation").quat()
                                 : existing                 ? existing->target.orientation
                                                            : Quaterniond::identity();
        if (root.has("pos_weight")) cmd.pos_weight = root.at("pos_weight").number();
        if (root.has("rot_weight")) cmd.rot_weight = root.at("rot_weight").number();
        validate_goals(scene.rig, GoalSet{{Goal{cmd.effector, cmd.target, cmd.pos_weight, cmd.rot_weight}}});
        queue.push_back(cmd);
      } else if (type == "set_config") {
        SolverConfig cfg;
        try {
          cfg = detail::read_config(root, scene.config, {"type"});
        } catch (const FormatError& e) {
          send_error(c, "bad_config", e.what());
          return;
        }
        queue.push_back(SetConfig{cfg});
      } else {
        send_error(c, "bad_request", "unknown message type \"" + type + "\"");
      }
    } catch (const std::exception& e) {
      send_error(c, "bad_request", e.what());
    }
  }

  void handle_lines(Client& c, std::string_view data) {
    std::size_t start = 0;
    while (start <= data.size()) {
      std::size_t nl = data.find('\n', start);
      if (nl == std::string_view::npos) nl = data.size();
      const std::string line = trim(data.substr(start, nl - start));
      if (!line.empty()) handle_message(c, line);
      start = nl + 1;
    }
  }

  void process_raw(Client& c) {
    while (true) {
      const std::size_t nl = c.in.find('\n');
      if (nl == std::string::npos) {
        if (c.in.size() > opt.max_frame_bytes) {
          if (!c.discarding)
            send_error(c, "bad_request", "frame exceeds " + std::to_string(opt.max_frame_bytes) + " bytes");
          c.discarding = true;
          c.in.clear();
        }
        return;
      }
      const std::string line = c.in.substr(0, nl);
      c.in.erase(0, nl + 1);
      if (c.discarding) {
        c.discarding = false;
        continue;
      }
      if (line.size() > opt.max_frame_bytes) {
        send_error(c, "bad_request", "frame exceeds " + std::to_string(opt.max_frame_bytes) + " bytes");
        continue;
      }
      const std::string text = trim(line);
      if (!text.empty()) handle_message(c, text);
    }
  }

  void process_handshake(Client& c) {
    const std::size_t end = c.in.find("\r\n\r\n");
    if (end == std::string::npos) {
      if (c.in.size() > 8192) c.close_after_flush = true;
      return;
    }
    const std::string head = c.in.substr(0, end);
    c.in.erase(0, end + 4);
    std::string key;
    bool upgrade = false;
    std::size_t pos = head.find("\r\n");
    while (pos != std::string::npos && pos < head.size()) {
      const std::size_t next = head.find("\r\n", pos + 2);
      const std::string line = head.substr(pos + 2, next == std::string::npos ? std::string::npos : next - pos - 2);
      const std::size_t colon = line.find(':');
      if (colon != std::string::npos) {
        const std::string name = lowercase(trim(line.substr(0, colon)));
        const std::string value = trim(line.substr(colon + 1));
        if (name == "upgrade" && lowercase(value) == "websocket") upgrade = true;
        if (name == "sec-websocket-key") key = value;
      }
      pos = next;
    }
    if (!upgrade || key.empty()) {
      c.out += "HTTP/1.1 400 Bad Request\r\nContent-Type: text/plain\r\nConnection: close\r\n\r\n"
               "expected a WebSocket upgrade or newline-delimited JSON\n";
      c.close_after_flush = true;
      return;
    }
    c.out += "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
             ws::accept_key(key) + "\r\n\r\n";
    c.mode = Mode::WebSocket;
  }

  void process_websocket(Client& c) {
    while (!c.close_after_flush) {
      ws::DecodeResult r = ws::decode_frame(c.in, opt.max_frame_bytes, true);
      if (r.status == ws::DecodeStatus::Incomplete) return;
      if (r.status == ws::DecodeStatus::Error) {
        c.out += ws::encode_close(r.close_code);
        c.close_after_flush = true;
        return;
      }
      ws::Frame& f = r.frame;
      switch (f.op) {
        case ws::Opcode::Ping: c.out += ws::encode_frame(f.payload, ws::Opcode::Pong); break;
        case ws::Opcode::Pong: break;
        case ws::Opcode::Close:
          c.out += ws::encode_close(1000);
          c.close_after_flush = true;
          return;
        case ws::Opcode::Text:
        case ws::Opcode::Binary:
        case ws::Opcode::Continuation:
          c.fragments += f.payload;
          if (c.fragments.size() > opt.max_frame_bytes) {
            c.out += ws::encode_close(1009);
            c.close_after_flush = true;
            return;
          }
          if (f.fin) {
            const std::string message = std::move(c.fragments);
            c.fragments.clear();
            handle_lines(c, message);
          }
          break;
      }
    }
  }

  void process_input(Client& c) {
    if (c.mode == Mode::Detect) {
      static constexpr std::string_view get = "GET ";
      const std::size_t n = std::min(c.in.size(), get.size());
      if (c.in.compare(0, n, get.substr(0, n)) != 0) {
        c.mode = Mode::Raw;
      } else if (n == get.size()) {
        c.mode = Mode::Handshake;
      } else {
        return;
      }
    }
    if (c.mode == Mode::Handshake) process_handshake(c);
    if (c.mode == Mode::WebSocket) process_websocket(c);
    if (c.mode == Mode::Raw) process_raw(c);
  }

  // ---- socket loop ----------------------------------------------------

  void accept_clients() {
    while (true) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) return;
      if (static_cast<int>(clients.size()) >= opt.max_clients) {
        ::close(fd);
        continue;
      }
      set_nonblocking(fd);
      Client c;
      c.fd = fd;
      c.connected = std::chrono::steady_clock::now();
      clients.push_back(std::move(c));
    }
  }

  // Returns false when the peer is gone.
  bool read_client(Client& c) {
    char buf[8192];
    while (true) {
      const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
      if (n > 0) {
        if (!c.close_after_flush) c.in.append(buf, static_cast<std::size_t>(n));
        process_input(c);
        continue;
      }
      if (n == 0) return false;
      if (errno == EINTR) continue;
      return errno == EAGAIN || errno == EWOULDBLOCK;
    }
  }

  bool flush_client(Client& c) {
    while (!c.out.empty()) {
      const ssize_t n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
      if (n > 0) {
        c.out.erase(0, static_cast<std::size_t>(n));
        continue;
      }
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return true;
      return false;
    }
    return !c.close_after_flush;
  }

  void poll_once(std::chrono::steady_clock::time_point deadline) {
    std::vector<pollfd> fds;
    fds.push_back({listen_fd, POLLIN, 0});
    fds.push_back({wake_read, POLLIN, 0});
    for (const Client& c : clients)
      fds.push_back({c.fd, static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
    const auto now = std::chrono::steady_clock::now();
    const auto wait = std::chrono::ceil<std::chrono::milliseconds>(std::max(deadline - now, now - now));
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(wait.count()));
    if (ready < 0) return;

    if (fds[1].revents & POLLIN) {
      char drain[64];
      while (::read(wake_read, drain, sizeof drain) > 0) {
      }
      queue.push_back(Stop{});
      stop_pending = true;
    }
    std::size_t i = 2;
    for (auto it = clients.begin(); it != clients.end(); ++i) {
      Client& c = *it;
      bool alive = true;
      if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) {
        alive = read_client(c);
      }
      if (alive && c.mode == Mode::Detect && std::chrono::steady_clock::now() - c.connected > opt.detect_timeout)
        c.mode = Mode::Raw;
      if (alive) alive = flush_client(c);
      if (!alive) {
        ::close(c.fd);
        it = clients.erase(it);
      } else {
        ++it;
      }
    }
    if (fds[0].revents & POLLIN) accept_clients();
  }

  void flush_all() {
    for (auto it = clients.begin(); it != clients.end();) {
      if (!flush_client(*it)) {
        ::close(it->fd);
        it = clients.erase(it);
      } else {
        ++it;
      }
    }
  }

  void apply_commands() {
    while (!queue.empty()) {
      Command cmd = std::move(queue.front());
      queue.pop_front();
      if (auto* t = std::get_if<SetTarget>(&cmd)) {
        set_target(scene, t->effector, t->target, t->pos_weight, t->rot_weight);
      } else if (auto* s = std::get_if<SetConfig>(&cmd)) {
        scene.config = s->config;
        scene.monitor.reset();
      } else {
        stopping = true;
      }
    }
  }

  void run() {
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / opt.rate));
    auto next = std::chrono::steady_clock::now();
    while (true) {
      apply_commands();
      if (stopping) break;
      try {
        const StepRecord rec = step(scene);
        broadcast(state_frame(scene, rec));
      } catch (const std::exception& e) {
        broadcast(error_frame("step_failed", e.what()));
      }
      next += period;
      const auto now = std::chrono::steady_clock::now();
      if (next < now - period) next = now;  // fell behind; do not try to catch up
      do {
        poll_once(next);
      } while (std::chrono::steady_clock::now() < next && !stop_pending);
    }
    for (Client& c : clients)
      if (c.mode == Mode::WebSocket && !c.close_after_flush) c.out += ws::encode_close(1001);
    flush_all();
    for (Client& c : clients) ::close(c.fd);
    clients.clear();
    if (!opt.save_path.empty()) {
      try {
        write_text_file(opt.save_path, format_scene(scene));
      } catch (const std::exception& e) {
        std::cerr << "ik serve: could not save scene: " << e.what() << "\n";
      }
    }
  }
};

Service::Service(Scene scene, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  if (!(options.rate > 0) || !std::isfinite(options.rate)) throw std::invalid_argument("rate must be positive");
  impl_->scene = std::move(scene);
  impl_->scene.record_trace = false;
  impl_->opt = std::move(options);
  impl_->open_socket();
}

Service::~Service() = default;

int Service::port() const { return impl_->bound_port; }

void Service::run() { impl_->run(); }

void Service::request_stop() {
  const char byte = 1;
  [[maybe_unused]] const ssize_t n = ::write(impl_->wake_write, &byte, 1);
}

const Scene& Service::scene() const { return impl_->scene; }

}  // namespace dqik

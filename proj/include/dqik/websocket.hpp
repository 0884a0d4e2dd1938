#pragma once

// Minimal RFC 6455 framing: enough for a server that exchanges text
// messages, plus client-side encoding for tests and tools.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dqik::ws {

enum class Opcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

/// Sec-WebSocket-Accept value for a client's Sec-WebSocket-Key.
std::string accept_key(std::string_view client_key);

/// One frame. Client-to-server frames must be masked.
std::string encode_frame(std::string_view payload, Opcode op = Opcode::Text, bool fin = true,
                         std::optional<std::uint32_t> mask = std::nullopt);

/// Close frame carrying a status code.
std::string encode_close(std::uint16_t code);

struct Frame {
  Opcode op{Opcode::Text};
  bool fin{true};
  std::string payload;  // unmasked
};

enum class DecodeStatus { Incomplete, Ok, Error };

struct DecodeResult {
  DecodeStatus status{DecodeStatus::Incomplete};
  Frame frame;
  std::uint16_t close_code{0};  // on Error: 1002 protocol error, 1009 too big
  std::string error;
};

/// Takes one frame off the front of `buffer` when a whole frame is present.
DecodeResult decode_frame(std::string& buffer, std::size_t max_payload, bool require_mask);

}  // namespace dqik::ws

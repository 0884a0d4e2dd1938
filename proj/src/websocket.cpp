#include "dqik/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace dqik::ws {

std::string accept_key(std::string_view client_key) {
  static constexpr std::string_view guid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  std::string input(client_key);
  input += guid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest);
  unsigned char encoded[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(encoded, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(encoded), static_cast<std::size_t>(n));
}

std::string encode_frame(std::string_view payload, Opcode op, bool fin, std::optional<std::uint32_t> mask) {
  std::string out;
  out.push_back(static_cast<char>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t len = payload.size();
  if (len < 126) {
    out.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>(len >> 8));
    out.push_back(static_cast<char>(len & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((len >> shift) & 0xFF));
  }
  if (!mask) return out.append(payload);
  unsigned char key[4];
  for (int i = 0; i < 4; ++i) key[i] = static_cast<unsigned char>((*mask >> (24 - 8 * i)) & 0xFF);
  out.append(reinterpret_cast<const char*>(key), 4);
  for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return out;
}

std::string encode_close(std::uint16_t code) {
  const char body[2] = {static_cast<char>(code >> 8), static_cast<char>(code & 0xFF)};
  return encode_frame(std::string_view(body, 2), Opcode::Close);
}

DecodeResult decode_frame(std::string& buffer, std::size_t max_payload, bool require_mask) {
  DecodeResult r;
  auto error = [&](std::uint16_t code, std::string why) {
    r.status = DecodeStatus::Error;
    r.close_code = code;
    r.error = std::move(why);
    return r;
  };
  if (buffer.size() < 2) return r;
  const auto* b = reinterpret_cast<const unsigned char*>(buffer.data());
  const bool fin = b[0] & 0x80;
  if (b[0] & 0x70) return error(1002, "reserved bits set");
  const std::uint8_t op = b[0] & 0x0F;
  if (op != 0x0 && op != 0x1 && op != 0x2 && op != 0x8 && op != 0x9 && op != 0xA) return error(1002, "unknown opcode");
  const bool masked = b[1] & 0x80;
  if (require_mask && !masked) return error(1002, "client frames must be masked");
  std::uint64_t len = b[1] & 0x7F;
  std::size_t pos = 2;
  if (len == 126) {
    if (buffer.size() < 4) return r;
    len = (std::uint64_t{b[2]} << 8) | b[3];
    pos = 4;
  } else if (len == 127) {
    if (buffer.size() < 10) return r;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | b[2 + i];
    pos = 10;
  }
  if (op >= 0x8 && (!fin || len > 125)) return error(1002, "invalid control frame");
  if (len > max_payload) return error(1009, "frame payload too large");
  unsigned char key[4] = {0, 0, 0, 0};
  if (masked) {
    if (buffer.size() < pos + 4) return r;
    for (int i = 0; i < 4; ++i) key[i] = b[pos + i];
    pos += 4;
  }
  if (buffer.size() < pos + len) return r;
  r.frame.op = static_cast<Opcode>(op);
  r.frame.fin = fin;
  r.frame.payload.resize(len);
  for (std::size_t i = 0; i < len; ++i) r.frame.payload[i] = static_cast<char>(b[pos + i] ^ key[i % 4]);
  buffer.erase(0, pos + len);
  r.status = DecodeStatus::Ok;
  return r;
}

}  // namespace dqik::ws

#pragma once

// Tunnel frame: the unit that is duplicated over every selected link.
//
// Wire header (24 bytes, big-endian, no padding):
//   0  magic        u16  0x4D43
//   2  version      u8   0x01
//   3  kind         u8   0 probe-request, 1 probe-reply, 2 load
//   4  flow_id      u32
//   8  seq          u64
//   16 send_ts_ns   u48  sender clock, session relative
//   22 payload_len  u16
//   24 payload

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdup {

inline constexpr std::uint16_t kFrameMagic = 0x4D43;
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::size_t kMaxDatagram = 65507;
inline constexpr std::size_t kMaxPayload = kMaxDatagram - kHeaderSize;  // 65,483
inline constexpr std::uint64_t kMaxTimestampNs = (std::uint64_t{1} << 48) - 1;

enum class FrameKind : std::uint8_t {
  ProbeRequest = 0,
  ProbeReply = 1,
  Load = 2,
};

const char* to_string(FrameKind kind);

struct TunnelFrame {
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_ts_ns = 0;
  FrameKind kind = FrameKind::ProbeRequest;
  std::vector<std::uint8_t> payload;

  std::size_t encoded_size() const { return kHeaderSize + payload.size(); }
  bool operator==(const TunnelFrame&) const = default;
};

enum class FrameErrorCode {
  OversizePayload,
  TimestampOutOfRange,
  ShortBuffer,
  BadMagic,
  UnknownVersion,
  UnknownKind,
  LengthMismatch,
};

const char* to_string(FrameErrorCode code);

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  FrameErrorCode code() const noexcept { return code_; }

 private:
  FrameErrorCode code_;
};

std::vector<std::uint8_t> encode_frame(const TunnelFrame& frame);

// Appends to `out` after clearing it; lets hot paths reuse one buffer.
void encode_frame_into(const TunnelFrame& frame, std::vector<std::uint8_t>& out);

TunnelFrame decode_frame(std::span<const std::uint8_t> bytes);

// Header-only view, used where payload bytes are not needed.
struct FrameHeader {
  std::uint8_t version = 0;
  FrameKind kind = FrameKind::ProbeRequest;
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_ts_ns = 0;
  std::uint16_t payload_len = 0;
};

FrameHeader decode_header(std::span<const std::uint8_t> bytes);

}  // namespace mcdup

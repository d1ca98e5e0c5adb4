#include "mcdup/frame.hpp"

#include <algorithm>

namespace mcdup {

namespace {

void put_be(std::uint8_t* dst, std::uint64_t value, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) {
    dst[i] = static_cast<std::uint8_t>(value & 0xFF);
    value >>= 8;
  }
}

std::uint64_t get_be(const std::uint8_t* src, int bytes) {
  std::uint64_t value = 0;
  for (int i = 0; i < bytes; ++i) value = (value << 8) | src[i];
  return value;
}

}  // namespace

const char* to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::ProbeRequest: return "probe-request";
    case FrameKind::ProbeReply: return "probe-reply";
    case FrameKind::Load: return "load";
  }
  return "unknown";
}

const char* to_string(FrameErrorCode code) {
  switch (code) {
    case FrameErrorCode::OversizePayload: return "oversize-payload";
    case FrameErrorCode::TimestampOutOfRange: return "timestamp-out-of-range";
    case FrameErrorCode::ShortBuffer: return "short-buffer";
    case FrameErrorCode::BadMagic: return "bad-magic";
    case FrameErrorCode::UnknownVersion: return "unknown-version";
    case FrameErrorCode::UnknownKind: return "unknown-kind";
    case FrameErrorCode::LengthMismatch: return "length-mismatch";
  }
  return "unknown";
}

void encode_frame_into(const TunnelFrame& frame, std::vector<std::uint8_t>& out) {
  if (frame.payload.size() > kMaxPayload) {
    throw FrameError(FrameErrorCode::OversizePayload,
                     "payload of " + std::to_string(frame.payload.size()) +
                         " bytes exceeds " + std::to_string(kMaxPayload));
  }
  if (frame.send_ts_ns > kMaxTimestampNs) {
    throw FrameError(FrameErrorCode::TimestampOutOfRange,
                     "send_ts_ns does not fit the 48-bit wire field");
  }
  out.resize(kHeaderSize + frame.payload.size());
  std::uint8_t* p = out.data();
  put_be(p + 0, kFrameMagic, 2);
  p[2] = kFrameVersion;
  p[3] = static_cast<std::uint8_t>(frame.kind);
  put_be(p + 4, frame.flow_id, 4);
  put_be(p + 8, frame.seq, 8);
  put_be(p + 16, frame.send_ts_ns, 6);
  put_be(p + 22, frame.payload.size(), 2);
  std::copy(frame.payload.begin(), frame.payload.end(), p + kHeaderSize);
}

std::vector<std::uint8_t> encode_frame(const TunnelFrame& frame) {
  std::vector<std::uint8_t> out;
  encode_frame_into(frame, out);
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw FrameError(FrameErrorCode::ShortBuffer,
                     "datagram of " + std::to_string(bytes.size()) +
                         " bytes is shorter than the header");
  }
  const std::uint8_t* p = bytes.data();
  if (get_be(p, 2) != kFrameMagic) throw FrameError(FrameErrorCode::BadMagic, "bad magic");
  FrameHeader h;
  h.version = p[2];
  if (h.version != kFrameVersion) {
    throw FrameError(FrameErrorCode::UnknownVersion,
                     "peer speaks frame version " + std::to_string(h.version));
  }
  if (p[3] > static_cast<std::uint8_t>(FrameKind::Load)) {
    throw FrameError(FrameErrorCode::UnknownKind, "unknown frame kind " + std::to_string(p[3]));
  }
  h.kind = static_cast<FrameKind>(p[3]);
  h.flow_id = static_cast<std::uint32_t>(get_be(p + 4, 4));
  h.seq = get_be(p + 8, 8);
  h.send_ts_ns = get_be(p + 16, 6);
  h.payload_len = static_cast<std::uint16_t>(get_be(p + 22, 2));
  return h;
}

TunnelFrame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes);
  if (bytes.size() - kHeaderSize != h.payload_len) {
    throw FrameError(FrameErrorCode::LengthMismatch,
                     "header claims " + std::to_string(h.payload_len) + " payload bytes, datagram carries " +
                         std::to_string(bytes.size() - kHeaderSize));
  }
  TunnelFrame f;
  f.flow_id = h.flow_id;
  f.seq = h.seq;
  f.send_ts_ns = h.send_ts_ns;
  f.kind = h.kind;
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return f;
}

}  // namespace mcdup

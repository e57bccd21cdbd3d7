#pragma once

// Offload wire protocol. All integers and floats are big-endian.
//
// Request (msg_type 1):
//   magic "SAGE" | version u8 = 1 | msg_type u8 | timestep u64 | model_id u16
//   | command u8 | speed f32 | quant_bits u8 | tensor_count u8
//   then per tensor:
//   channels u16 | height u16 | width u16 | scale f32 | zero_point f32
//   | payload_len u32 | payload bytes
//
// Response (msg_type 2), fixed 26 bytes:
//   magic | version | msg_type | timestep u64 | steer f32 | accelerator f32 | brake f32
//
// Ping / pong (msg_type 3 / 4), fixed 14 bytes:
//   magic | version | msg_type | timestep u64

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgesplit/control.hpp"
#include "edgesplit/error.hpp"
#include "edgesplit/quant.hpp"

namespace edgesplit {

namespace wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {0x53, 0x41, 0x47, 0x45};
inline constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t { Request = 1, Response = 2, Ping = 3, Pong = 4 };

inline constexpr std::size_t kPreambleSize = 6;             // magic + version + type
inline constexpr std::size_t kRequestHeaderSize = 23;       // through tensor_count
inline constexpr std::size_t kTensorHeaderSize = 18;        // dims + scale + zero + len
inline constexpr std::size_t kResponseSize = 26;
inline constexpr std::size_t kPingSize = 14;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

struct RequestFrame {
  std::uint64_t timestep = 0;
  std::uint16_t model_id = 0;
  std::uint8_t command = 0;
  float speed = 0.0f;
  std::uint8_t quant_bits = 32;
  std::vector<QuantizedTensor> tensors;

  friend bool operator==(const RequestFrame&, const RequestFrame&) = default;
};

struct ResponseFrame {
  std::uint64_t timestep = 0;
  ControlOutput control;

  friend bool operator==(const ResponseFrame&, const ResponseFrame&) = default;
};

// Bytes the link model charges for a request: tensor payloads plus the
// scale/zero-point header when quantized below 32 bits.
inline std::uint64_t offload_payload_bytes(const RequestFrame& r) {
  std::uint64_t n = 0;
  for (const auto& t : r.tensors) n += t.codes.size() + (r.quant_bits < 32 ? kQuantHeaderBytes : 0);
  return n;
}

namespace detail {

class Writer {
 public:
  explicit Writer(std::size_t reserve = 0) { buf_.reserve(reserve); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void preamble(MsgType t) {
    bytes(kMagic);
    u8(kVersion);
    u8(static_cast<std::uint8_t>(t));
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FrameError("truncated frame");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>((std::uint16_t{b_[pos_]} << 8) | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b_[pos_++];
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Validates magic and version; returns the message type.
inline MsgType check_preamble(std::span<const std::uint8_t> b) {
  if (b.size() < kPreambleSize) throw FrameError("truncated frame");
  for (std::size_t i = 0; i < kMagic.size(); ++i)
    if (b[i] != kMagic[i]) throw FrameError("bad magic");
  if (b[4] != kVersion) throw FrameError("unsupported version " + std::to_string(b[4]));
  const std::uint8_t t = b[5];
  if (t < 1 || t > 4) throw FrameError("unknown message type " + std::to_string(t));
  return static_cast<MsgType>(t);
}

inline std::vector<std::uint8_t> encode_request(const RequestFrame& r) {
  if (!valid_quant_bits(r.quant_bits)) throw FrameError("quant_bits must be 8, 16 or 32");
  if (r.tensors.size() > 255) throw FrameError("at most 255 tensors per request");
  std::size_t total = kRequestHeaderSize;
  for (const auto& t : r.tensors) {
    if (t.bits != r.quant_bits) throw FrameError("tensor bit width differs from frame quant_bits");
    if (t.codes.size() != quantized_payload_bytes(t.element_count(), t.bits))
      throw FrameError("tensor payload length does not match its dims");
    if (t.codes.size() > 0xFFFFFFFFu) throw FrameError("tensor payload too large");
    total += kTensorHeaderSize + t.codes.size();
  }
  detail::Writer w(total);
  w.preamble(MsgType::Request);
  w.u64(r.timestep);
  w.u16(r.model_id);
  w.u8(r.command);
  w.f32(r.speed);
  w.u8(r.quant_bits);
  w.u8(static_cast<std::uint8_t>(r.tensors.size()));
  for (const auto& t : r.tensors) {
    w.u16(t.dims.channels);
    w.u16(t.dims.height);
    w.u16(t.dims.width);
    w.f32(t.scale);
    w.f32(t.zero_point);
    w.u32(static_cast<std::uint32_t>(t.codes.size()));
    w.bytes(t.codes);
  }
  return w.take();
}

// Total request length given at least the fixed header and every tensor
// header preceding the one still missing. Returns 0 when more bytes are needed
// to know the length.
// Payload lengths are checked against the tensor dims as soon as each tensor
// header arrives, so a bogus length is rejected before buffering it.
inline std::size_t request_length(std::span<const std::uint8_t> b) {
  if (b.size() < kRequestHeaderSize) return 0;
  const int bits = b[kRequestHeaderSize - 2];
  if (!valid_quant_bits(bits)) throw FrameError("unsupported quant_bits " + std::to_string(bits));
  const std::size_t count = b[kRequestHeaderSize - 1];
  std::size_t pos = kRequestHeaderSize;
  for (std::size_t i = 0; i < count; ++i) {
    if (b.size() < pos + kTensorHeaderSize) return 0;
    const std::uint8_t* h = b.data() + pos;
    const TensorShape dims{edgesplit::detail::get_be16(h), edgesplit::detail::get_be16(h + 2),
                           edgesplit::detail::get_be16(h + 4)};
    const std::size_t len = edgesplit::detail::get_be32(h + 14);
    if (len != quantized_payload_bytes(dims.elements(), bits))
      throw FrameError("payload_len " + std::to_string(len) + " does not match tensor dims");
    pos += kTensorHeaderSize + len;
    if (pos > kMaxFrameBytes) throw FrameError("request frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes");
  }
  return pos;
}

inline RequestFrame decode_request(std::span<const std::uint8_t> b) {
  if (check_preamble(b) != MsgType::Request) throw FrameError("not a request frame");
  detail::Reader r(b.subspan(kPreambleSize));
  RequestFrame f;
  f.timestep = r.u64();
  f.model_id = r.u16();
  f.command = r.u8();
  f.speed = r.f32();
  f.quant_bits = r.u8();
  if (!valid_quant_bits(f.quant_bits)) throw FrameError("unsupported quant_bits " + std::to_string(f.quant_bits));
  const std::size_t count = r.u8();
  f.tensors.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    QuantizedTensor t;
    t.bits = f.quant_bits;
    t.dims.channels = r.u16();
    t.dims.height = r.u16();
    t.dims.width = r.u16();
    t.scale = r.f32();
    t.zero_point = r.f32();
    const std::uint32_t len = r.u32();
    if (len != quantized_payload_bytes(t.element_count(), t.bits))
      throw FrameError("payload_len " + std::to_string(len) + " does not match tensor dims");
    auto payload = r.bytes(len);
    t.codes.assign(payload.begin(), payload.end());
    f.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FrameError("trailing bytes after request frame");
  return f;
}

inline std::vector<std::uint8_t> encode_response(const ResponseFrame& r) {
  detail::Writer w(kResponseSize);
  w.preamble(MsgType::Response);
  w.u64(r.timestep);
  w.f32(r.control.steer);
  w.f32(r.control.accelerator);
  w.f32(r.control.brake);
  return w.take();
}

inline ResponseFrame decode_response(std::span<const std::uint8_t> b) {
  if (check_preamble(b) != MsgType::Response) throw FrameError("not a response frame");
  if (b.size() != kResponseSize)
    throw FrameError(b.size() < kResponseSize ? "truncated frame" : "response frame length mismatch");
  detail::Reader r(b.subspan(kPreambleSize));
  ResponseFrame f;
  f.timestep = r.u64();
  f.control.steer = r.f32();
  f.control.accelerator = r.f32();
  f.control.brake = r.f32();
  return f;
}

inline std::vector<std::uint8_t> encode_ping(MsgType type, std::uint64_t timestep) {
  if (type != MsgType::Ping && type != MsgType::Pong) throw FrameError("ping frames are type 3 or 4");
  detail::Writer w(kPingSize);
  w.preamble(type);
  w.u64(timestep);
  return w.take();
}

inline std::uint64_t decode_ping(std::span<const std::uint8_t> b) {
  const MsgType t = check_preamble(b);
  if (t != MsgType::Ping && t != MsgType::Pong) throw FrameError("not a ping/pong frame");
  if (b.size() != kPingSize) throw FrameError("ping frame length mismatch");
  detail::Reader r(b.subspan(kPreambleSize));
  return r.u64();
}

// Length of the frame starting at b, or 0 if more bytes are needed.
inline std::size_t frame_length(std::span<const std::uint8_t> b) {
  if (b.size() < kPreambleSize) return 0;
  switch (check_preamble(b)) {
    case MsgType::Request: return request_length(b);
    case MsgType::Response: return kResponseSize;
    case MsgType::Ping:
    case MsgType::Pong: return kPingSize;
  }
  return 0;
}

}  // namespace wire
}  // namespace edgesplit

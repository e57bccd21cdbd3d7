#include <gtest/gtest.h>

#include <bit>
#include <vector>

#include "edgesplit/prng.hpp"
#include "edgesplit/wire.hpp"

using namespace edgesplit;
using namespace edgesplit::wire;

namespace {

RequestFrame random_request(SplitMix64& g) {
  RequestFrame r;
  r.timestep = g.next();
  r.model_id = static_cast<std::uint16_t>(g.next());
  r.command = static_cast<std::uint8_t>(g.next() % 4);
  r.speed = static_cast<float>(g.uniform(0, 40));
  const int bits_choice[] = {8, 16, 32};
  r.quant_bits = static_cast<std::uint8_t>(bits_choice[g.next() % 3]);
  const std::size_t n = g.next() % 4;
  for (std::size_t i = 0; i < n; ++i) {
    BottleneckTensor t;
    t.dims = {static_cast<std::uint16_t>(1 + g.next() % 3), static_cast<std::uint16_t>(1 + g.next() % 5),
              static_cast<std::uint16_t>(1 + g.next() % 7)};
    t.values.resize(t.element_count());
    for (auto& v : t.values) v = static_cast<float>(g.uniform(-5, 5));
    r.tensors.push_back(quantize(t, r.quant_bits));
  }
  return r;
}

std::vector<std::uint8_t> hex(std::initializer_list<int> bytes) {
  std::vector<std::uint8_t> v;
  for (int b : bytes) v.push_back(static_cast<std::uint8_t>(b));
  return v;
}

}  // namespace

TEST(Wire, RequestRoundTrip) {
  SplitMix64 g(123);
  for (int i = 0; i < 500; ++i) {
    const auto r = random_request(g);
    const auto bytes = encode_request(r);
    EXPECT_EQ(frame_length(bytes), bytes.size());
    EXPECT_EQ(decode_request(bytes), r);
  }
}

TEST(Wire, MinimalRequestLayout) {
  RequestFrame r;
  r.timestep = 0x0102030405060708ULL;
  r.model_id = 0xA1B2;
  r.command = 3;
  r.speed = 1.0f;
  r.quant_bits = 16;
  // magic(4) version(1) type(1) timestep(8) model(2) command(1) speed(4) bits(1) count(1)
  const auto expected = hex({0x53, 0x41, 0x47, 0x45, 0x01, 0x01, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06,
                             0x07, 0x08, 0xA1, 0xB2, 0x03, 0x3F, 0x80, 0x00, 0x00, 0x10, 0x00});
  EXPECT_EQ(expected.size(), 23u);
  EXPECT_EQ(encode_request(r), expected);
  EXPECT_EQ(kRequestHeaderSize, 23u);
}

TEST(Wire, TensorHeaderLayout) {
  RequestFrame r;
  r.quant_bits = 8;
  QuantizedTensor t;
  t.dims = {1, 1, 2};
  t.bits = 8;
  t.scale = 2.0f;
  t.zero_point = -1.0f;
  t.codes = {0xAB, 0xCD};
  r.tensors.push_back(t);
  const auto bytes = encode_request(r);
  ASSERT_EQ(bytes.size(), 23u + 18u + 2u);
  const std::vector<std::uint8_t> tensor_part(bytes.begin() + 23, bytes.end());
  EXPECT_EQ(tensor_part, hex({0x00, 0x01, 0x00, 0x01, 0x00, 0x02, 0x40, 0x00, 0x00, 0x00, 0xBF, 0x80, 0x00,
                              0x00, 0x00, 0x00, 0x00, 0x02, 0xAB, 0xCD}));
}

TEST(Wire, ResponseIsTwentySixBytes) {
  SplitMix64 g(9);
  for (int i = 0; i < 100; ++i) {
    ResponseFrame r{g.next(), {static_cast<float>(g.uniform(-1, 1)), static_cast<float>(g.uniform()),
                               std::bit_cast<float>(static_cast<std::uint32_t>(g.next()) & 0x7F7FFFFFu)}};
    const auto bytes = encode_response(r);
    ASSERT_EQ(bytes.size(), 26u);
    EXPECT_EQ(decode_response(bytes), r);
    EXPECT_EQ(frame_length(bytes), 26u);
  }
}

TEST(Wire, ResponseLayout) {
  const auto bytes = encode_response({5, {1.0f, 0.5f, -2.0f}});
  EXPECT_EQ(bytes, hex({0x53, 0x41, 0x47, 0x45, 0x01, 0x02, 0, 0, 0, 0, 0, 0, 0, 5, 0x3F, 0x80, 0, 0, 0x3F, 0x00,
                        0, 0, 0xC0, 0x00, 0, 0}));
}

TEST(Wire, PingPong) {
  const auto p = encode_ping(MsgType::Ping, 77);
  EXPECT_EQ(p.size(), 14u);
  EXPECT_EQ(decode_ping(p), 77u);
  EXPECT_EQ(check_preamble(encode_ping(MsgType::Pong, 1)), MsgType::Pong);
  EXPECT_THROW(encode_ping(MsgType::Request, 1), FrameError);
}

TEST(Wire, RejectsCorruption) {
  SplitMix64 g(1);
  RequestFrame r = random_request(g);
  while (r.tensors.empty()) r = random_request(g);
  const auto good = encode_request(r);

  auto bad = good;
  bad[0] = 0x00;
  EXPECT_THROW(decode_request(bad), FrameError);
  EXPECT_THROW(frame_length(bad), FrameError);

  bad = good;
  bad[4] = 2;  // version
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad[5] = 9;  // type
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad[5] = 2;  // a response header on a request body
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad.push_back(0);
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad[21] = 12;  // quant_bits
  EXPECT_THROW(decode_request(bad), FrameError);

  bad = good;
  bad[23 + 17] ^= 0x01;  // payload_len of the first tensor
  EXPECT_THROW(decode_request(bad), FrameError);
  EXPECT_THROW(frame_length(bad), FrameError);

  EXPECT_THROW(decode_request(hex({0x53, 0x41})), FrameError);

  auto resp = encode_response({1, {}});
  resp.pop_back();
  EXPECT_THROW(decode_response(resp), FrameError);
  resp = encode_response({1, {}});
  resp.push_back(0);
  EXPECT_THROW(decode_response(resp), FrameError);
}

TEST(Wire, EncodeValidatesFields) {
  RequestFrame r;
  r.quant_bits = 7;
  EXPECT_THROW(encode_request(r), FrameError);
  r.quant_bits = 16;
  QuantizedTensor t;
  t.dims = {1, 1, 4};
  t.bits = 8;
  t.codes.resize(4);
  r.tensors.push_back(t);
  EXPECT_THROW(encode_request(r), FrameError);  // width mismatch
  r.tensors[0].bits = 16;
  EXPECT_THROW(encode_request(r), FrameError);  // 4 bytes for 4 half values
  r.tensors[0].codes.resize(8);
  EXPECT_NO_THROW(encode_request(r));
}

TEST(Wire, FrameLengthNeedsHeaders) {
  SplitMix64 g(2);
  RequestFrame r = random_request(g);
  while (r.tensors.size() < 2) r = random_request(g);
  const auto bytes = encode_request(r);
  for (std::size_t n = 0; n < kRequestHeaderSize + kTensorHeaderSize; ++n)
    EXPECT_EQ(frame_length(std::span(bytes).first(n)), 0u) << n;
  // once every tensor header is visible the full length is known
  EXPECT_EQ(frame_length(bytes), bytes.size());
}

TEST(Wire, OversizedFrameRejectedEarly) {
  RequestFrame r;
  r.quant_bits = 32;
  std::vector<std::uint8_t> bytes = encode_request(r);
  bytes[22] = 255;  // claims 255 tensors of 65535^3 floats
  for (int i = 0; i < 1; ++i) {
    for (int k = 0; k < 6; ++k) bytes.push_back(0xFF);
    for (int k = 0; k < 8; ++k) bytes.push_back(0);
    const std::uint64_t len = 65535ull * 65535 * 65535 * 4;
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<std::uint8_t>(len >> s));
  }
  EXPECT_THROW(frame_length(bytes), FrameError);
}

TEST(Wire, DownlinkIsNegligibleNextToThreeCameraUpload) {
  RequestFrame r;
  r.quant_bits = 16;
  for (std::uint32_t c = 0; c < 3; ++c) {
    BottleneckTensor t;
    t.dims = {8, 50, 110};
    t.values.assign(t.element_count(), 0.25f);
    r.tensors.push_back(quantize(t, 16));
  }
  EXPECT_EQ(offload_payload_bytes(r), 264000u + 24u);
  EXPECT_EQ(encode_request(r).size(), 23u + 3u * 18u + 264000u);
  EXPECT_LT(static_cast<double>(kResponseSize) / static_cast<double>(offload_payload_bytes(r)), 1e-4);
}

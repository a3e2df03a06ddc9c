#pragma once

// Wire format for out-of-process predictors. All integers are little-endian
// uint32, all samples little-endian float32, x fastest.
//
//   request  := u32 body_len | u32 nx | u32 ny | u32 nz | f32[nx*ny*nz]
//   response := frame(binary, channels = 1) frame(classes, channels = 12)
//   frame    := u32 body_len | u32 nx | u32 ny | u32 nz | u32 channels |
//               f32[channels*nx*ny*nz]   (channel-major)
//
// body_len counts the bytes after the length field.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ribkit/error.hpp"
#include "ribkit/infer.hpp"
#include "ribkit/volume.hpp"

namespace ribkit::protocol {

using Bytes = std::vector<std::uint8_t>;

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f32(Bytes& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw InvalidArgument(std::string(what) + " too large for the wire format");
  return static_cast<std::uint32_t>(v);
}

inline Bytes encode_request(const Volume& patch) {
  const Dims d = patch.dims();
  Bytes out;
  out.reserve(16 + 4 * patch.size());
  put_u32(out, checked_u32(12 + 4 * patch.size(), "patch"));
  put_u32(out, checked_u32(d.nx, "nx"));
  put_u32(out, checked_u32(d.ny, "ny"));
  put_u32(out, checked_u32(d.nz, "nz"));
  for (float v : patch.data()) put_f32(out, v);
  return out;
}

inline Bytes encode_frame(const std::vector<const Volume*>& channels) {
  const Dims d = channels.front()->dims();
  Bytes out;
  const std::size_t n = d.size() * channels.size();
  out.reserve(20 + 4 * n);
  put_u32(out, checked_u32(16 + 4 * n, "frame"));
  put_u32(out, checked_u32(d.nx, "nx"));
  put_u32(out, checked_u32(d.ny, "ny"));
  put_u32(out, checked_u32(d.nz, "nz"));
  put_u32(out, checked_u32(channels.size(), "channels"));
  for (const Volume* c : channels)
    for (float v : c->data()) put_f32(out, v);
  return out;
}

inline Bytes encode_response(const HeadOutput& out) {
  Bytes bytes = encode_frame({&out.binary});
  std::vector<const Volume*> cls;
  for (const auto& c : out.classes) cls.push_back(&c);
  const Bytes second = encode_frame(cls);
  bytes.insert(bytes.end(), second.begin(), second.end());
  return bytes;
}

// Parses the body of a request (after the length prefix).
inline Volume decode_request_body(const Bytes& body, const Spacing& spacing = {}) {
  if (body.size() < 12) throw ProtocolError("request body shorter than its header");
  const Dims d{get_u32(body.data()), get_u32(body.data() + 4), get_u32(body.data() + 8)};
  if (d.nx == 0 || d.ny == 0 || d.nz == 0) throw ProtocolError("request has empty dims");
  if (body.size() != 12 + 4 * d.size())
    throw ProtocolError("request payload has " + std::to_string(body.size() - 12) +
                        " bytes, expected " + std::to_string(4 * d.size()));
  std::vector<float> data(d.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_f32(body.data() + 12 + 4 * i);
  return Volume(d, spacing, std::move(data));
}

// Parses the body of a response frame into `channels` volumes.
inline std::vector<Volume> decode_frame_body(const Bytes& body, std::uint32_t channels,
                                             const Spacing& spacing = {}) {
  if (body.size() < 16) throw ProtocolError("frame body shorter than its header");
  const Dims d{get_u32(body.data()), get_u32(body.data() + 4), get_u32(body.data() + 8)};
  const std::uint32_t c = get_u32(body.data() + 12);
  if (c != channels)
    throw ProtocolError("frame has " + std::to_string(c) + " channels, expected " +
                        std::to_string(channels));
  if (d.nx == 0 || d.ny == 0 || d.nz == 0) throw ProtocolError("frame has empty dims");
  if (body.size() != 16 + 4 * d.size() * c)
    throw ProtocolError("frame payload has " + std::to_string(body.size() - 16) +
                        " bytes, expected " + std::to_string(4 * d.size() * c));
  std::vector<Volume> out;
  const std::uint8_t* p = body.data() + 16;
  for (std::uint32_t k = 0; k < c; ++k) {
    std::vector<float> data(d.size());
    for (std::size_t i = 0; i < data.size(); ++i, p += 4) data[i] = get_f32(p);
    out.emplace_back(d, spacing, std::move(data));
  }
  return out;
}

}  // namespace ribkit::protocol

#pragma once

// NIfTI-1 single-file (.nii / .nii.gz) reader and writer. Supports 3D,
// little-endian volumes with datatypes uint8 (2), int16 (4) and float32 (16).
// Orientation is not applied: spacing comes from pixdim, axes are stored as-is.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "ribkit/error.hpp"
#include "ribkit/volume.hpp"

namespace ribkit::nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int kDataOffset = 352;

enum Datatype : std::int16_t { uint8 = 2, int16 = 4, float32 = 16 };

struct Header {
  Dims dims;
  std::int16_t datatype = float32;
  std::int16_t bitpix = 32;
  Spacing spacing;
  float vox_offset = kDataOffset;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float srow_x[4] = {0, 0, 0, 0};
  float srow_y[4] = {0, 0, 0, 0};
  float srow_z[4] = {0, 0, 0, 0};

  bool scaled() const {
    return scl_slope != 0.0f && std::isfinite(scl_slope) &&
           !(scl_slope == 1.0f && scl_inter == 0.0f);
  }
};

namespace detail {

template <typename T>
T load(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return std::bit_cast<T>(u);
}

template <typename T>
void store(std::uint8_t* p, T v) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<std::uint8_t>(u >> (8 * i));
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      int code = 0;
      const std::string msg = gzerror(f, &code);
      gzclose(f);
      throw IoError("error reading '" + path + "': " + msg);
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  gzclose(f);
  return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes,
                       bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw IoError("cannot write '" + path + "'");
    std::size_t off = 0;
    while (off < bytes.size()) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
      if (gzwrite(f, bytes.data() + off, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw IoError("error writing '" + path + "'");
      }
      off += chunk;
    }
    if (gzclose(f) != Z_OK) throw IoError("error closing '" + path + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace detail

inline Header parse_header(const std::vector<std::uint8_t>& bytes, const std::string& path = "") {
  using detail::load;
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError((path.empty() ? std::string("nifti") : "'" + path + "'") + ": " + why);
  };
  if (bytes.size() < kHeaderSize)
    throw fail("file has " + std::to_string(bytes.size()) + " bytes, shorter than the " +
               std::to_string(kHeaderSize) + "-byte header");
  const std::uint8_t* h = bytes.data();
  const auto sizeof_hdr = load<std::int32_t>(h);
  if (sizeof_hdr != kHeaderSize) {
    const auto u = static_cast<std::uint32_t>(sizeof_hdr);
    if (((u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24)) == kHeaderSize)
      throw fail("big-endian NIfTI is not supported");
    throw fail("not a NIfTI-1 file (sizeof_hdr = " + std::to_string(sizeof_hdr) + ")");
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) throw fail("magic is not \"n+1\" (single-file NIfTI-1)");

  Header hdr;
  const auto ndim = load<std::int16_t>(h + 40);
  if (ndim < 3 || ndim > 7) throw fail("dim[0] = " + std::to_string(ndim) + ", expected a 3D volume");
  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + 40 + 2 * i);
  for (int i = 1; i <= 3; ++i)
    if (dim[i] < 1) throw fail("dim[" + std::to_string(i) + "] = " + std::to_string(dim[i]));
  for (int i = 4; i <= ndim; ++i)
    if (dim[i] != 1) throw fail("only 3D volumes are supported (dim[" + std::to_string(i) + "] = " + std::to_string(dim[i]) + ")");
  hdr.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
              static_cast<std::size_t>(dim[3])};

  hdr.datatype = load<std::int16_t>(h + 70);
  hdr.bitpix = load<std::int16_t>(h + 72);
  int expected_bits = 0;
  switch (hdr.datatype) {
    case uint8: expected_bits = 8; break;
    case int16: expected_bits = 16; break;
    case float32: expected_bits = 32; break;
    default: throw fail("unsupported datatype " + std::to_string(hdr.datatype) + " (supported: 2, 4, 16)");
  }
  if (hdr.bitpix != expected_bits)
    throw fail("bitpix " + std::to_string(hdr.bitpix) + " inconsistent with datatype " +
               std::to_string(hdr.datatype));

  const float px = load<float>(h + 80), py = load<float>(h + 84), pz = load<float>(h + 88);
  for (float v : {px, py, pz})
    if (!(std::abs(v) > 0.0f) || !std::isfinite(v)) throw fail("pixdim must be non-zero and finite");
  hdr.spacing = Spacing(std::abs(px), std::abs(py), std::abs(pz));

  hdr.vox_offset = load<float>(h + 108);
  if (!(hdr.vox_offset >= kDataOffset) || hdr.vox_offset != std::floor(hdr.vox_offset))
    throw fail("vox_offset " + std::to_string(hdr.vox_offset) + " is invalid for a single file");
  hdr.scl_slope = load<float>(h + 112);
  hdr.scl_inter = load<float>(h + 116);
  hdr.qform_code = load<std::int16_t>(h + 252);
  hdr.sform_code = load<std::int16_t>(h + 254);
  for (int i = 0; i < 4; ++i) {
    hdr.srow_x[i] = load<float>(h + 280 + 4 * i);
    hdr.srow_y[i] = load<float>(h + 296 + 4 * i);
    hdr.srow_z[i] = load<float>(h + 312 + 4 * i);
  }
  return hdr;
}

inline std::vector<std::uint8_t> encode_header(const Dims& dims, const Spacing& spacing,
                                               std::int16_t datatype) {
  using detail::store;
  if (dims.nx > 32767 || dims.ny > 32767 || dims.nz > 32767)
    throw InvalidArgument("volume too large for NIfTI-1 dims");
  std::vector<std::uint8_t> h(kDataOffset, 0);
  store<std::int32_t>(h.data(), kHeaderSize);
  h[39] = 0;  // dim_info
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(dims.nx),
                               static_cast<std::int16_t>(dims.ny),
                               static_cast<std::int16_t>(dims.nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(h.data() + 40 + 2 * i, dim[i]);
  store<std::int16_t>(h.data() + 70, datatype);
  store<std::int16_t>(h.data() + 72, datatype == uint8 ? 8 : datatype == int16 ? 16 : 32);
  const float pixdim[8] = {1.0f, static_cast<float>(spacing.dx), static_cast<float>(spacing.dy),
                           static_cast<float>(spacing.dz), 0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) store<float>(h.data() + 76 + 4 * i, pixdim[i]);
  store<float>(h.data() + 108, static_cast<float>(kDataOffset));
  store<float>(h.data() + 112, 1.0f);  // scl_slope
  store<float>(h.data() + 116, 0.0f);  // scl_inter
  h[123] = 2;                          // xyzt_units: millimeters
  store<std::int16_t>(h.data() + 252, 1);  // qform_code: scanner
  store<std::int16_t>(h.data() + 254, 1);  // sform_code: scanner
  // Identity quaternion (b = c = d = 0) and zero offsets already in place.
  store<float>(h.data() + 280, pixdim[1]);
  store<float>(h.data() + 296 + 4, pixdim[2]);
  store<float>(h.data() + 312 + 8, pixdim[3]);
  std::memcpy(h.data() + 344, "n+1\0", 4);
  return h;
}

namespace detail {

inline std::vector<double> decode_samples(const std::vector<std::uint8_t>& bytes,
                                          const Header& hdr, const std::string& path) {
  const std::size_t n = hdr.dims.size();
  const std::size_t width = static_cast<std::size_t>(hdr.bitpix / 8);
  const auto offset = static_cast<std::size_t>(hdr.vox_offset);
  const std::size_t need = offset + n * width;
  if (bytes.size() < need)
    throw IoError("'" + path + "': truncated payload, have " + std::to_string(bytes.size()) +
                  " bytes, need " + std::to_string(need));
  std::vector<double> out(n);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < n; ++i, p += width) {
    switch (hdr.datatype) {
      case uint8: out[i] = *p; break;
      case int16: out[i] = detail::load<std::int16_t>(p); break;
      default: out[i] = detail::load<float>(p); break;
    }
  }
  if (hdr.scaled())
    for (auto& v : out) v = v * hdr.scl_slope + hdr.scl_inter;
  return out;
}

}  // namespace detail

inline Volume read_volume(const std::string& path) {
  const auto bytes = detail::read_file(path);
  const Header hdr = parse_header(bytes, path);
  if (hdr.datatype == float32 && !hdr.scaled()) {
    // Keep float payloads bit-exact.
    const std::size_t n = hdr.dims.size();
    const auto offset = static_cast<std::size_t>(hdr.vox_offset);
    if (bytes.size() < offset + 4 * n)
      throw IoError("'" + path + "': truncated payload, have " + std::to_string(bytes.size()) +
                    " bytes, need " + std::to_string(offset + 4 * n));
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = detail::load<float>(bytes.data() + offset + 4 * i);
    return Volume(hdr.dims, hdr.spacing, std::move(data));
  }
  const auto samples = detail::decode_samples(bytes, hdr, path);
  std::vector<float> data(samples.begin(), samples.end());
  return Volume(hdr.dims, hdr.spacing, std::move(data));
}

// Reads a label map; every (scaled) value must be an integer in 0..24.
inline LabelVolume read_labels(const std::string& path) {
  const auto bytes = detail::read_file(path);
  const Header hdr = parse_header(bytes, path);
  const auto samples = detail::decode_samples(bytes, hdr, path);
  std::vector<std::uint8_t> data(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = samples[i];
    if (!(v >= 0.0 && v <= kMaxLabel) || v != std::floor(v))
      throw FormatError("'" + path + "': value " + std::to_string(v) + " at voxel " +
                        std::to_string(i) + " is not a label in {0..24}");
    data[i] = static_cast<std::uint8_t>(v);
  }
  return LabelVolume(hdr.dims, hdr.spacing, std::move(data));
}

inline std::vector<std::uint8_t> encode(const Volume& vol) {
  auto bytes = encode_header(vol.dims(), vol.spacing(), float32);
  bytes.resize(kDataOffset + 4 * vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i)
    detail::store<float>(bytes.data() + kDataOffset + 4 * i, vol[i]);
  return bytes;
}

inline std::vector<std::uint8_t> encode(const LabelVolume& labels) {
  auto bytes = encode_header(labels.dims(), labels.spacing(), uint8);
  bytes.insert(bytes.end(), labels.data().begin(), labels.data().end());
  return bytes;
}

inline bool wants_gzip(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

inline void write(const Volume& vol, const std::string& path, bool gzip) {
  detail::write_file(path, encode(vol), gzip);
}
inline void write(const LabelVolume& labels, const std::string& path, bool gzip) {
  detail::write_file(path, encode(labels), gzip);
}
// Compression chosen from the file extension.
template <typename T>
void write(const Grid<T>& g, const std::string& path) {
  write(g, path, wants_gzip(path));
}

}  // namespace ribkit::nifti

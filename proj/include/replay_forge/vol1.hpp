#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "replay_forge/error.hpp"
#include "replay_forge/tensor.hpp"
#include "replay_forge/volume.hpp"

namespace rforge {

// VOL1 byte layout, all integers little-endian, no padding:
//   magic   4 bytes "VOL1"
//   dtype   1 byte   (0 = f32le, 1 = u8)
//   ndim    1 byte   (1..5)
//   dims    ndim x u32le
//   payload elem_size * product(dims) bytes, C-order

enum class Vol1Dtype : std::uint8_t { f32 = 0, u8 = 1 };

struct Vol1Header {
  Vol1Dtype dtype = Vol1Dtype::f32;
  std::vector<std::uint32_t> dims;
};

using Bytes = std::vector<std::uint8_t>;
using Vol1Any = std::variant<TensorF, TensorU8>;

namespace detail {

inline void put_u32le(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32le(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

inline void write_header(Bytes& out, Vol1Dtype dtype, const std::vector<std::uint32_t>& dims) {
  if (dims.empty() || dims.size() > 5)
    raise(Errc::NdimOutOfRange, "vol1: ndim must be 1..5, got " + std::to_string(dims.size()));
  out.push_back('V');
  out.push_back('O');
  out.push_back('L');
  out.push_back('1');
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32le(out, d);
}

}  // namespace detail

inline Bytes write_vol1(const TensorF& t) {
  if (!t.shape_matches()) raise(Errc::ShapeMismatch, "vol1: data length does not match dims");
  Bytes out;
  out.reserve(6 + 4 * t.shape.size() + 4 * t.size());
  detail::write_header(out, Vol1Dtype::f32, t.shape);
  for (Eigen::Index i = 0; i < t.data.size(); ++i)
    detail::put_u32le(out, std::bit_cast<std::uint32_t>(t.data[i]));
  return out;
}

inline Bytes write_vol1(const TensorU8& t) {
  if (!t.shape_matches()) raise(Errc::ShapeMismatch, "vol1: data length does not match dims");
  Bytes out;
  out.reserve(6 + 4 * t.shape.size() + t.size());
  detail::write_header(out, Vol1Dtype::u8, t.shape);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) out.push_back(t.data[i]);
  return out;
}

/// Parses the header only; validates magic/dtype/ndim and that the payload
/// length matches the dims product.
inline Vol1Header read_vol1_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6) raise(Errc::TruncatedPayload, "vol1: shorter than the fixed header");
  if (!(bytes[0] == 'V' && bytes[1] == 'O' && bytes[2] == 'L' && bytes[3] == '1'))
    raise(Errc::BadMagic, "vol1: bad magic");
  if (bytes[4] > 1) raise(Errc::BadDtype, "vol1: unknown dtype code " + std::to_string(bytes[4]));
  const auto ndim = bytes[5];
  if (ndim < 1 || ndim > 5)
    raise(Errc::NdimOutOfRange, "vol1: ndim must be 1..5, got " + std::to_string(ndim));
  if (bytes.size() < 6 + 4u * ndim) raise(Errc::TruncatedPayload, "vol1: truncated dims");
  Vol1Header h;
  h.dtype = static_cast<Vol1Dtype>(bytes[4]);
  for (std::uint8_t i = 0; i < ndim; ++i) h.dims.push_back(detail::get_u32le(bytes, 6 + 4u * i));
  const std::size_t elems = shape_elems(h.dims);
  const std::size_t elem_size = h.dtype == Vol1Dtype::f32 ? 4 : 1;
  if (bytes.size() != 6 + 4u * ndim + elems * elem_size)
    raise(Errc::TruncatedPayload, "vol1: payload length does not match dims");
  return h;
}

inline Vol1Any read_vol1(std::span<const std::uint8_t> bytes) {
  const auto h = read_vol1_header(bytes);
  const std::size_t offset = 6 + 4 * h.dims.size();
  const auto elems = static_cast<Eigen::Index>(shape_elems(h.dims));
  if (h.dtype == Vol1Dtype::f32) {
    TensorF t;
    t.shape = h.dims;
    t.data.resize(elems);
    for (Eigen::Index i = 0; i < elems; ++i)
      t.data[i] = std::bit_cast<float>(detail::get_u32le(bytes, offset + 4 * static_cast<std::size_t>(i)));
    return t;
  }
  TensorU8 t;
  t.shape = h.dims;
  t.data.resize(elems);
  for (Eigen::Index i = 0; i < elems; ++i) t.data[i] = bytes[offset + static_cast<std::size_t>(i)];
  return t;
}

// ---- file helpers ----------------------------------------------------------

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoFailure, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoFailure, "short write to " + path.string());
}

inline Vol1Any read_vol1_file(const std::filesystem::path& path) {
  return read_vol1(read_file_bytes(path));
}

template <typename Scalar>
void write_vol1_file(const std::filesystem::path& path, const Tensor<Scalar>& t) {
  const auto bytes = write_vol1(t);
  write_file_bytes(path, bytes);
}

/// Loads a 3-D f32 tensor as a probability volume, checking the [0,1] contract.
inline ProbabilityVolume read_probability_volume(const std::filesystem::path& path) {
  auto any = read_vol1_file(path);
  auto* t = std::get_if<TensorF>(&any);
  if (!t || t->shape.size() != 3)
    raise(Errc::ShapeMismatch, path.string() + ": expected a 3-D f32 volume");
  ProbabilityVolume vol({static_cast<int>(t->shape[0]), static_cast<int>(t->shape[1]),
                         static_cast<int>(t->shape[2])},
                        std::move(t->data));
  const auto violation = check_probability_volume(vol);
  if (!violation.empty()) raise(Errc::CorruptState, path.string() + ": " + violation);
  return vol;
}

/// Loads a 3-D u8 tensor as a {0,1} label mask.
inline LabelMask read_label_mask(const std::filesystem::path& path) {
  auto any = read_vol1_file(path);
  auto* t = std::get_if<TensorU8>(&any);
  if (!t || t->shape.size() != 3)
    raise(Errc::ShapeMismatch, path.string() + ": expected a 3-D u8 mask");
  LabelMask mask({static_cast<int>(t->shape[0]), static_cast<int>(t->shape[1]),
                  static_cast<int>(t->shape[2])},
                 std::move(t->data));
  const auto violation = check_label_mask(mask);
  if (!violation.empty()) raise(Errc::CorruptState, path.string() + ": " + violation);
  return mask;
}

inline TensorF volume_to_tensor(const ProbabilityVolume& v) {
  return TensorF({static_cast<std::uint32_t>(v.dims.x()), static_cast<std::uint32_t>(v.dims.y()),
                  static_cast<std::uint32_t>(v.dims.z())},
                 v.data);
}

inline TensorU8 mask_to_tensor(const LabelMask& m) {
  return TensorU8({static_cast<std::uint32_t>(m.dims.x()), static_cast<std::uint32_t>(m.dims.y()),
                   static_cast<std::uint32_t>(m.dims.z())},
                  m.data);
}

}  // namespace rforge

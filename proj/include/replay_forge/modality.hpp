#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "replay_forge/error.hpp"
#include "replay_forge/prng.hpp"
#include "replay_forge/tensor.hpp"
#include "replay_forge/volume.hpp"

namespace rforge {

/// Append-only modality -> channel registry. Indices are assigned in first-seen
/// order and never change; k_max only grows.
class ChannelLayout {
 public:
  static std::string normalize_name(std::string_view raw) {
    std::size_t b = 0, e = raw.size();
    while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string name(raw.substr(b, e - b));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return name;
  }

  int k_max() const { return static_cast<int>(names_.size()); }

  std::optional<int> index_of(std::string_view raw) const {
    const auto name = normalize_name(raw);
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return std::nullopt;
  }

  const std::vector<std::string>& names() const { return names_; }

  void append(std::string name) { names_.push_back(std::move(name)); }

 private:
  std::vector<std::string> names_;  // index == channel
};

/// Appends unknown modalities in the given order; known names keep their
/// original index. Idempotent.
inline ChannelLayout register_modalities(ChannelLayout layout,
                                         std::span<const std::string> episode_modalities) {
  for (const auto& raw : episode_modalities) {
    const auto name = ChannelLayout::normalize_name(raw);
    if (name.empty()) raise(Errc::EmptyInput, "register_modalities: empty modality name");
    if (!layout.index_of(name)) layout.append(name);
  }
  return layout;
}

inline constexpr int kLayoutVersion = 1;

inline nlohmann::json layout_to_json(const ChannelLayout& layout) {
  nlohmann::json doc;
  doc["version"] = kLayoutVersion;
  doc["modalities"] = nlohmann::json::array();
  for (int i = 0; i < layout.k_max(); ++i)
    doc["modalities"].push_back({{"name", layout.names()[i]}, {"index", i}});
  return doc;
}

inline ChannelLayout layout_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version"))
    raise(Errc::CorruptState, "layout: missing version");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kLayoutVersion)
    raise(Errc::SchemaMismatch, "layout: unsupported version");
  ChannelLayout layout;
  try {
    for (const auto& m : doc.at("modalities")) {
      const auto name = ChannelLayout::normalize_name(m.at("name").get<std::string>());
      const int index = m.at("index").get<int>();
      if (index != layout.k_max())
        raise(Errc::CorruptState, "layout: non-contiguous channel index");
      if (layout.index_of(name)) raise(Errc::CorruptState, "layout: duplicate modality " + name);
      layout.append(name);
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("layout: ") + e.what());
  }
  return layout;
}

/// Input-convolution weights [c_out, c_in, kx, ky, kz], C-order.
using WeightTensor = Tensor<float>;

inline void check_weight_shape(const WeightTensor& w) {
  if (w.shape.size() != 5 || !w.shape_matches())
    raise(Errc::ShapeMismatch, "weight tensor must be 5-D [c_out, c_in, kx, ky, kz]");
}

/// Grows c_in from K to k_max: the first K channels are a bit-exact copy, the
/// new trailing channels are zero.
inline WeightTensor inflate_weights(const WeightTensor& w, int k_max) {
  check_weight_shape(w);
  const auto c_out = w.shape[0];
  const auto c_in = w.shape[1];
  if (k_max < static_cast<int>(c_in))
    raise(Errc::ShrinkNotAllowed, "inflate_weights: k_max " + std::to_string(k_max) +
                                      " below current channels " + std::to_string(c_in));
  const std::size_t kernel = static_cast<std::size_t>(w.shape[2]) * w.shape[3] * w.shape[4];
  auto out = WeightTensor::zeros(
      {c_out, static_cast<std::uint32_t>(k_max), w.shape[2], w.shape[3], w.shape[4]});
  for (std::uint32_t o = 0; o < c_out; ++o) {
    const auto src = static_cast<Eigen::Index>(o * c_in * kernel);
    const auto dst = static_cast<Eigen::Index>(o * static_cast<std::size_t>(k_max) * kernel);
    out.data.segment(dst, static_cast<Eigen::Index>(c_in * kernel)) =
        w.data.segment(src, static_cast<Eigen::Index>(c_in * kernel));
  }
  return out;
}

/// Builds the [k_max, X, Y, Z] network input: registered modalities land on
/// their channel, absent ones stay zero.
inline TensorF assemble_input(const std::map<std::string, const Volume<float>*>& sample,
                              const ChannelLayout& layout) {
  if (sample.empty()) raise(Errc::EmptyInput, "assemble_input: sample has no modalities");
  Eigen::Vector3i dims{0, 0, 0};
  bool first = true;
  for (const auto& [name, vol] : sample) {
    const auto idx = layout.index_of(name);
    if (!idx) raise(Errc::UnregisteredModality, "assemble_input: unregistered modality " + name);
    if (first) {
      dims = vol->dims;
      first = false;
    } else if (vol->dims != dims) {
      raise(Errc::DimMismatch, "assemble_input: modality " + name + " dims differ");
    }
  }
  const auto voxels = static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  auto out = TensorF::zeros({static_cast<std::uint32_t>(layout.k_max()),
                             static_cast<std::uint32_t>(dims.x()),
                             static_cast<std::uint32_t>(dims.y()),
                             static_cast<std::uint32_t>(dims.z())});
  for (const auto& [name, vol] : sample) {
    const int idx = *layout.index_of(name);
    out.data.segment(static_cast<Eigen::Index>(idx * voxels),
                     static_cast<Eigen::Index>(voxels)) = vol->data;
  }
  return out;
}

/// Random Modality Drop: keeps a non-empty subset of the available modalities.
/// The subset size is uniform on {1..|available|}, then that many names are
/// drawn uniformly without replacement. The stream is derived from
/// (seed, sample_id, epoch), so draws are order-independent.
inline std::vector<std::string> rmd_mask(std::span<const std::string> available,
                                         std::uint64_t seed, std::string_view sample_id,
                                         std::uint64_t epoch) {
  std::vector<std::string> names;
  for (const auto& raw : available) {
    const auto name = ChannelLayout::normalize_name(raw);
    if (name.empty()) continue;
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  if (names.empty()) raise(Errc::EmptyAvailable, "rmd_mask: no modalities available");
  std::sort(names.begin(), names.end());

  SplitMix64 rng(derive_stream(seed, sample_id, epoch));
  const auto n = names.size();
  const auto keep = 1 + rng.bounded(n);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + rng.bounded(n - i);
    std::swap(names[i], names[j]);
  }
  names.resize(keep);
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace rforge

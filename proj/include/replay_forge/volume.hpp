#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "replay_forge/error.hpp"
#include "replay_forge/tensor.hpp"

namespace rforge {

/// 3D voxel grid. data is C-order with dims[2] the fastest axis.
template <typename Scalar>
struct Volume {
  Eigen::Vector3i dims{0, 0, 0};
  ArrayX<Scalar> data;

  Volume() = default;
  Volume(Eigen::Vector3i d, ArrayX<Scalar> values) : dims(d), data(std::move(values)) {}

  static Volume zeros(Eigen::Vector3i d) {
    return Volume(d, ArrayX<Scalar>::Zero(static_cast<Eigen::Index>(d.x()) * d.y() * d.z()));
  }

  Eigen::Index size() const { return data.size(); }

  Eigen::Index index(int i, int j, int k) const {
    return (static_cast<Eigen::Index>(i) * dims.y() + j) * dims.z() + k;
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < dims.x() && j >= 0 && j < dims.y() && k >= 0 && k < dims.z();
  }

  Scalar& at(int i, int j, int k) { return data[index(i, j, k)]; }
  Scalar at(int i, int j, int k) const { return data[index(i, j, k)]; }

  bool same_dims(const Volume& other) const { return dims == other.dims; }
};

using ProbabilityVolume = Volume<float>;
using LabelMask = Volume<std::uint8_t>;
using LabelGrid = Volume<std::int32_t>;

enum class Connectivity : int { faces6 = 6, full26 = 26 };

inline Connectivity connectivity_from_int(int c) {
  if (c == 6) return Connectivity::faces6;
  if (c == 26) return Connectivity::full26;
  raise(Errc::SchemaMismatch, "connectivity must be 6 or 26");
}

/// Band geometry around the lesion surface: dilate by `outward`, erode by
/// `inward`, band = dilation \ erosion. Defaults give a total width of 9.
struct BandSpec {
  int inward = 4;
  int outward = 4;
};

namespace detail {

inline const std::array<std::array<int, 3>, 6>& face_offsets() {
  static const std::array<std::array<int, 3>, 6> offs = {{{-1, 0, 0},
                                                          {1, 0, 0},
                                                          {0, -1, 0},
                                                          {0, 1, 0},
                                                          {0, 0, -1},
                                                          {0, 0, 1}}};
  return offs;
}

inline std::vector<std::array<int, 3>> neighbor_offsets(Connectivity conn) {
  std::vector<std::array<int, 3>> offs;
  if (conn == Connectivity::faces6) {
    offs.assign(face_offsets().begin(), face_offsets().end());
    return offs;
  }
  offs.reserve(26);
  for (int di = -1; di <= 1; ++di)
    for (int dj = -1; dj <= 1; ++dj)
      for (int dk = -1; dk <= 1; ++dk) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        offs.push_back({di, dj, dk});
      }
  return offs;
}

}  // namespace detail

/// Dice similarity 2|P∩G| / (|P|+|G|). Two empty masks agree perfectly (1.0).
inline double dice(const LabelMask& pred, const LabelMask& gt) {
  if (!pred.same_dims(gt)) raise(Errc::DimMismatch, "dice: mask dims differ");
  const auto p = pred.data != 0;
  const auto g = gt.data != 0;
  const auto np = p.count();
  const auto ng = g.count();
  if (np + ng == 0) return 1.0;
  const auto ni = (p && g).count();
  return 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
}

/// Labels connected foreground regions 1..C in scan order; background stays 0.
inline std::pair<LabelGrid, int> connected_components(const LabelMask& mask, Connectivity conn) {
  auto labels = LabelGrid::zeros(mask.dims);
  const auto offs = detail::neighbor_offsets(conn);
  int count = 0;
  std::vector<std::array<int, 3>> stack;
  for (int i = 0; i < mask.dims.x(); ++i)
    for (int j = 0; j < mask.dims.y(); ++j)
      for (int k = 0; k < mask.dims.z(); ++k) {
        if (mask.at(i, j, k) == 0 || labels.at(i, j, k) != 0) continue;
        ++count;
        labels.at(i, j, k) = count;
        stack.push_back({i, j, k});
        while (!stack.empty()) {
          auto [ci, cj, ck] = stack.back();
          stack.pop_back();
          for (const auto& o : offs) {
            const int ni = ci + o[0], nj = cj + o[1], nk = ck + o[2];
            if (!mask.in_bounds(ni, nj, nk)) continue;
            if (mask.at(ni, nj, nk) == 0 || labels.at(ni, nj, nk) != 0) continue;
            labels.at(ni, nj, nk) = count;
            stack.push_back({ni, nj, nk});
          }
        }
      }
  return {std::move(labels), count};
}

/// Iterated face-neighbor dilation, clipped at the volume boundary.
inline LabelMask morph_dilate(const LabelMask& mask, int steps) {
  LabelMask out = mask;
  LabelMask prev = LabelMask::zeros(mask.dims);
  for (int s = 0; s < steps; ++s) {
    prev.data = out.data;
    for (int i = 0; i < mask.dims.x(); ++i)
      for (int j = 0; j < mask.dims.y(); ++j)
        for (int k = 0; k < mask.dims.z(); ++k) {
          if (prev.at(i, j, k) != 0) continue;
          for (const auto& o : detail::face_offsets()) {
            const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (prev.in_bounds(ni, nj, nk) && prev.at(ni, nj, nk) != 0) {
              out.at(i, j, k) = 1;
              break;
            }
          }
        }
  }
  return out;
}

/// Iterated face-neighbor erosion; voxels outside the volume count as background.
inline LabelMask morph_erode(const LabelMask& mask, int steps) {
  LabelMask out = mask;
  LabelMask prev = LabelMask::zeros(mask.dims);
  for (int s = 0; s < steps; ++s) {
    prev.data = out.data;
    for (int i = 0; i < mask.dims.x(); ++i)
      for (int j = 0; j < mask.dims.y(); ++j)
        for (int k = 0; k < mask.dims.z(); ++k) {
          if (prev.at(i, j, k) == 0) continue;
          for (const auto& o : detail::face_offsets()) {
            const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (!prev.in_bounds(ni, nj, nk) || prev.at(ni, nj, nk) == 0) {
              out.at(i, j, k) = 0;
              break;
            }
          }
        }
  }
  return out;
}

/// Symmetric boundary band: dilate(gt, outward) \ erode(gt, inward).
inline LabelMask boundary_band(const LabelMask& gt, const BandSpec& spec = {}) {
  const LabelMask dilated = morph_dilate(gt, spec.outward);
  const LabelMask eroded = morph_erode(gt, spec.inward);
  LabelMask band(gt.dims, (dilated.data != 0 && eroded.data == 0).cast<std::uint8_t>());
  return band;
}

inline std::int64_t foreground_count(const LabelMask& mask) {
  return static_cast<std::int64_t>((mask.data != 0).count());
}

/// Checks the [0,1]/finite contract; returns a violation message or empty.
inline std::string check_probability_volume(const ProbabilityVolume& vol) {
  if (vol.size() != static_cast<Eigen::Index>(vol.dims.x()) * vol.dims.y() * vol.dims.z())
    return "data length does not match dims product";
  if (!vol.data.isFinite().all()) return "non-finite probability value";
  if ((vol.data < 0.0f).any() || (vol.data > 1.0f).any()) return "probability outside [0,1]";
  return {};
}

inline std::string check_label_mask(const LabelMask& mask) {
  if (mask.size() != static_cast<Eigen::Index>(mask.dims.x()) * mask.dims.y() * mask.dims.z())
    return "data length does not match dims product";
  if ((mask.data > 1).any()) return "mask value outside {0,1}";
  return {};
}

}  // namespace rforge

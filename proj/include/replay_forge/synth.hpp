#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/error.hpp"
#include "replay_forge/manifest.hpp"
#include "replay_forge/prng.hpp"
#include "replay_forge/vol1.hpp"
#include "replay_forge/volume.hpp"

namespace rforge {

struct SynthConfig {
  int episodes = 3;
  int samples_per_episode = 20;
  int dims = 32;  // cubic edge length, >= 8
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};

namespace synth_detail {

// Episode modality sets rotate over a three-name pool so that consecutive
// episodes overlap without being equal; with three episodes exactly one new
// modality appears after the first.
inline std::vector<std::string> episode_modalities(int episode) {
  static const std::vector<std::string> pool{"T1", "T2", "FLAIR"};
  return {pool[episode % 3], pool[(episode + 1) % 3]};
}

inline std::string episode_lesion_type(int episode) {
  static const std::vector<std::string> kinds{"tumor", "stroke", "sclerosis"};
  return kinds[episode % kinds.size()];
}

inline LabelMask random_lesion(SplitMix64& rng, int dims) {
  auto gt = LabelMask::zeros({dims, dims, dims});
  const int blobs = 1 + static_cast<int>(rng.bounded(3));
  const int max_axis = std::max(1, dims / 6);
  for (int b = 0; b < blobs; ++b) {
    const int ci = 2 + static_cast<int>(rng.bounded(dims - 4));
    const int cj = 2 + static_cast<int>(rng.bounded(dims - 4));
    const int ck = 2 + static_cast<int>(rng.bounded(dims - 4));
    const double ai = 1 + static_cast<double>(rng.bounded(max_axis));
    const double aj = 1 + static_cast<double>(rng.bounded(max_axis));
    const double ak = 1 + static_cast<double>(rng.bounded(max_axis));
    const int ri = static_cast<int>(ai), rj = static_cast<int>(aj), rk = static_cast<int>(ak);
    for (int i = std::max(0, ci - ri); i <= std::min(dims - 1, ci + ri); ++i)
      for (int j = std::max(0, cj - rj); j <= std::min(dims - 1, cj + rj); ++j)
        for (int k = std::max(0, ck - rk); k <= std::min(dims - 1, ck + rk); ++k) {
          const double di = (i - ci) / ai, dj = (j - cj) / aj, dk = (k - ck) / ak;
          if (di * di + dj * dj + dk * dk <= 1.0) gt.at(i, j, k) = 1;
        }
  }
  return gt;
}

// Two passes of 7-point box averaging (out-of-bounds contributes zero),
// then seeded uniform noise, clamped to [0,1].
inline ProbabilityVolume prob_from_gt(SplitMix64& rng, const LabelMask& gt) {
  const auto dims = gt.dims;
  ArrayX<float> cur = gt.data.cast<float>();
  ArrayX<float> next(cur.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < dims.x(); ++i)
      for (int j = 0; j < dims.y(); ++j)
        for (int k = 0; k < dims.z(); ++k) {
          const auto at = [&](int a, int b, int c) -> float {
            if (a < 0 || a >= dims.x() || b < 0 || b >= dims.y() || c < 0 || c >= dims.z())
              return 0.0f;
            return cur[(static_cast<Eigen::Index>(a) * dims.y() + b) * dims.z() + c];
          };
          const float sum = at(i, j, k) + at(i - 1, j, k) + at(i + 1, j, k) + at(i, j - 1, k) +
                            at(i, j + 1, k) + at(i, j, k - 1) + at(i, j, k + 1);
          next[(static_cast<Eigen::Index>(i) * dims.y() + j) * dims.z() + k] = sum / 7.0f;
        }
    std::swap(cur, next);
  }
  ProbabilityVolume prob(dims, std::move(cur));
  for (Eigen::Index v = 0; v < prob.size(); ++v) {
    const double noisy = prob.data[v] + (rng.unit() * 2 - 1) * 0.15;
    prob.data[v] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
  }
  return prob;
}

inline ProbabilityVolume modality_image(SplitMix64& rng, const LabelMask& gt) {
  ProbabilityVolume img(gt.dims, ArrayX<float>(gt.size()));
  for (Eigen::Index v = 0; v < img.size(); ++v) {
    const double value = 0.3 + 0.4 * gt.data[v] + (rng.unit() * 2 - 1) * 0.2;
    img.data[v] = static_cast<float>(std::clamp(value, 0.0, 1.0));
  }
  return img;
}

}  // namespace synth_detail

/// Generates a deterministic synthetic corpus: per episode a manifest plus
/// gt/prob/modality volumes for every sample. Identical seeds give
/// byte-identical files.
inline std::vector<std::filesystem::path> generate_corpus(const SynthConfig& config) {
  namespace fs = std::filesystem;
  if (config.dims < 8) raise(Errc::EmptyInput, "synth: dims must be >= 8");
  if (config.episodes < 1 || config.samples_per_episode < 1)
    raise(Errc::EmptyInput, "synth: need at least one episode and one sample");

  std::vector<fs::path> manifests;
  for (int e = 0; e < config.episodes; ++e) {
    const auto episode_dir = config.out_dir / ("ep" + std::to_string(e));
    fs::create_directories(episode_dir);
    EpisodeManifest manifest;
    manifest.name = "ep" + std::to_string(e);
    manifest.lesion_type = synth_detail::episode_lesion_type(e);
    manifest.modalities = synth_detail::episode_modalities(e);
    manifest.base_dir = episode_dir;

    for (int s = 0; s < config.samples_per_episode; ++s) {
      SplitMix64 rng(derive_stream(config.seed, "synth", static_cast<std::uint64_t>(e),
                                   static_cast<std::uint64_t>(s)));
      char sid[32];
      std::snprintf(sid, sizeof(sid), "ep%d_s%03d", e, s);

      const auto gt = synth_detail::random_lesion(rng, config.dims);
      const auto prob = synth_detail::prob_from_gt(rng, gt);

      ManifestSample sample;
      sample.sample_id = sid;
      sample.gt_path = std::string(sid) + "_gt.vol1";
      sample.prob_path = std::string(sid) + "_prob.vol1";
      write_vol1_file(episode_dir / sample.gt_path, mask_to_tensor(gt));
      write_vol1_file(episode_dir / sample.prob_path, volume_to_tensor(prob));
      for (const auto& modality : manifest.modalities) {
        const auto img = synth_detail::modality_image(rng, gt);
        const auto rel = std::string(sid) + "_" + modality + ".vol1";
        write_vol1_file(episode_dir / rel, volume_to_tensor(img));
        sample.volumes[modality] = rel;
      }
      manifest.samples.push_back(std::move(sample));
    }

    const auto manifest_path = episode_dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) raise(Errc::IoFailure, "cannot write " + manifest_path.string());
    out << manifest_to_json(manifest).dump(2) << '\n';
    manifests.push_back(manifest_path);
  }
  return manifests;
}

}  // namespace rforge

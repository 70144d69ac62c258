#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "replay_forge/error.hpp"
#include "replay_forge/volume.hpp"

namespace rforge {

struct ScoringConfig {
  double tau = 0.5;
  double alpha = 0.9;
  double gamma = 0.9;
  BandSpec band{};
  Connectivity connectivity = Connectivity::full26;
};

/// Mean predicted probability over lesion voxels, counting only voxels with
/// p > tau (strictly). Undefined for an empty lesion.
inline double confidence_score(const ProbabilityVolume& prob, const LabelMask& gt, double tau) {
  if (prob.dims != gt.dims) raise(Errc::DimMismatch, "confidence_score: prob/gt dims differ");
  double acc = 0;
  std::int64_t lesion = 0;
  for (Eigen::Index v = 0; v < gt.size(); ++v) {
    if (gt.data[v] == 0) continue;
    ++lesion;
    const double p = prob.data[v];
    if (p > tau) acc += p;
  }
  if (lesion == 0) raise(Errc::EmptyLesion, "confidence_score: no lesion voxels");
  return acc / static_cast<double>(lesion);
}

inline std::int64_t size_score(const LabelMask& gt) { return foreground_count(gt); }

/// Mean |p - 0.5| over the boundary band; lower means less stable predictions.
inline double uncertainty_score(const ProbabilityVolume& prob, const LabelMask& gt,
                                const BandSpec& band) {
  if (prob.dims != gt.dims) raise(Errc::DimMismatch, "uncertainty_score: prob/gt dims differ");
  const LabelMask b = boundary_band(gt, band);
  double acc = 0;
  std::int64_t n = 0;
  for (Eigen::Index v = 0; v < b.size(); ++v) {
    if (b.data[v] == 0) continue;
    acc += std::abs(static_cast<double>(prob.data[v]) - 0.5);
    ++n;
  }
  if (n == 0) raise(Errc::EmptyBand, "uncertainty_score: boundary band is empty");
  return acc / static_cast<double>(n);
}

/// C^2 / N over the lesion; higher means more fragmented.
inline double complexity_score(const LabelMask& gt, Connectivity conn) {
  const std::int64_t n = foreground_count(gt);
  if (n == 0) raise(Errc::EmptyLesion, "complexity_score: no lesion voxels");
  const int c = connected_components(gt, conn).second;
  return static_cast<double>(c) * static_cast<double>(c) / static_cast<double>(n);
}

/// Min-max normalization to [0,1]; an all-equal list maps to 0.5.
inline std::vector<double> normalize_scores(std::span<const double> values) {
  if (values.empty()) raise(Errc::EmptyInput, "normalize_scores: empty input");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (hi == lo) ? 0.5 : (values[i] - lo) / (hi - lo);
  return out;
}

inline double rep_score(double conf_norm, double size_norm, double alpha) {
  return (1.0 - alpha) * conf_norm + alpha * size_norm;
}

/// Difficulty combines inverted uncertainty (small |p-0.5| = hard) with
/// fragmentation. gamma weights the uncertainty term.
inline double diff_score(double unc_norm, double comp_norm, double gamma) {
  return gamma * (1.0 - unc_norm) + (1.0 - gamma) * comp_norm;
}

struct RawScores {
  double conf = 0;
  std::int64_t size = 0;
  double unc = 0;
  double comp = 0;
};

struct NormScores {
  double conf = 0;
  double size = 0;
  double unc = 0;
  double comp = 0;
};

struct SampleScores {
  std::string sample_id;
  bool excluded = false;
  std::string exclusion_reason;  // empty when included
  std::optional<RawScores> raw;
  std::optional<NormScores> norm;
  std::optional<double> r_rep;
  std::optional<double> r_diff;
};

struct DatasetSample {
  std::string sample_id;
  const ProbabilityVolume* prob = nullptr;
  const LabelMask* gt = nullptr;
};

/// Scores a dataset: raw per-sample scores (parallel over `threads`),
/// dataset-level min-max normalization over the valid samples, then the
/// combined R_rep / R_diff. Samples with empty lesions (or an empty band) are
/// excluded, not scored. Output order follows input order regardless of
/// thread count.
inline std::vector<SampleScores> score_dataset(std::span<const DatasetSample> samples,
                                               const ScoringConfig& config, int threads = 1) {
  if (samples.empty()) raise(Errc::EmptyInput, "score_dataset: no samples");
  std::vector<SampleScores> out(samples.size());

  auto score_one = [&](std::size_t i) {
    const auto& s = samples[i];
    auto& r = out[i];
    r.sample_id = s.sample_id;
    const std::int64_t lesion = size_score(*s.gt);
    if (lesion == 0) {
      r.excluded = true;
      r.exclusion_reason = errc_name(Errc::EmptyLesion);
      return;
    }
    RawScores raw;
    raw.size = lesion;
    raw.conf = confidence_score(*s.prob, *s.gt, config.tau);
    raw.comp = complexity_score(*s.gt, config.connectivity);
    try {
      raw.unc = uncertainty_score(*s.prob, *s.gt, config.band);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyBand) throw;
      r.excluded = true;
      r.exclusion_reason = errc_name(Errc::EmptyBand);
      return;
    }
    r.raw = raw;
  };

  const int nworkers = std::max(1, threads);
  if (nworkers == 1 || samples.size() < 2) {
    for (std::size_t i = 0; i < samples.size(); ++i) score_one(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t per = (samples.size() + nworkers - 1) / nworkers;
    for (int w = 0; w < nworkers; ++w) {
      const std::size_t lo = w * per;
      const std::size_t hi = std::min(samples.size(), lo + per);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) score_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<std::size_t> valid;
  std::vector<double> conf, size, unc, comp;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].raw) continue;
    valid.push_back(i);
    conf.push_back(out[i].raw->conf);
    size.push_back(static_cast<double>(out[i].raw->size));
    unc.push_back(out[i].raw->unc);
    comp.push_back(out[i].raw->comp);
  }
  if (valid.empty()) raise(Errc::AllSamplesEmpty, "score_dataset: every sample was excluded");

  const auto conf_n = normalize_scores(conf);
  const auto size_n = normalize_scores(size);
  const auto unc_n = normalize_scores(unc);
  const auto comp_n = normalize_scores(comp);
  for (std::size_t j = 0; j < valid.size(); ++j) {
    auto& r = out[valid[j]];
    r.norm = NormScores{conf_n[j], size_n[j], unc_n[j], comp_n[j]};
    r.r_rep = rep_score(conf_n[j], size_n[j], config.alpha);
    r.r_diff = diff_score(unc_n[j], comp_n[j], config.gamma);
  }
  return out;
}

}  // namespace rforge

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/buffer.hpp"
#include "replay_forge/dctg.hpp"
#include "replay_forge/documents.hpp"
#include "replay_forge/manifest.hpp"
#include "replay_forge/metrics.hpp"
#include "replay_forge/modality.hpp"
#include "replay_forge/scoring.hpp"
#include "replay_forge/synth.hpp"

namespace rforge {

struct StreamConfig {
  std::vector<std::filesystem::path> episodes;  // manifest paths, stream order
  std::int64_t beta = 10;
  std::optional<std::int64_t> partition_n;  // candidates per episode, default beta
  std::uint64_t seed = 0;
  ScoringConfig scoring;
  bool evaluate_episodes = false;
  double eval_threshold = 0.5;
  int threads = 1;
  std::filesystem::path out_dir = "stream_out";
};

inline StreamConfig load_stream_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoFailure, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("version", -1) != 1)
    raise(Errc::SchemaMismatch, path.string() + ": unsupported config version");
  StreamConfig cfg;
  const auto base = path.parent_path();
  try {
    for (const auto& ep : doc.at("episodes")) {
      std::filesystem::path p(ep.get<std::string>());
      cfg.episodes.push_back(p.is_absolute() ? p : base / p);
    }
    cfg.beta = doc.at("beta").get<std::int64_t>();
    if (doc.contains("n")) cfg.partition_n = doc["n"].get<std::int64_t>();
    cfg.seed = doc.value("seed", 0ULL);
    if (doc.contains("scoring")) cfg.scoring = scoring_config_from_json(doc["scoring"]);
    cfg.evaluate_episodes = doc.value("evaluate_episodes", false);
    cfg.eval_threshold = doc.value("eval_threshold", 0.5);
    cfg.threads = doc.value("threads", 1);
    std::filesystem::path out(doc.value("out_dir", std::string("stream_out")));
    cfg.out_dir = out.is_absolute() ? out : base / out;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, path.string() + ": " + e.what());
  }
  if (cfg.beta < 1) raise(Errc::CorruptState, "stream config: beta must be >= 1");
  if (cfg.episodes.empty()) raise(Errc::CorruptState, "stream config: no episodes");
  return cfg;
}

/// Canonical JSON used for the embedded config hash (defaults applied,
/// paths as given).
inline nlohmann::json stream_config_canonical(const StreamConfig& cfg) {
  nlohmann::json doc;
  doc["episodes"] = nlohmann::json::array();
  for (const auto& p : cfg.episodes) doc["episodes"].push_back(p.generic_string());
  doc["beta"] = cfg.beta;
  doc["n"] = cfg.partition_n ? nlohmann::json(*cfg.partition_n) : nlohmann::json();
  doc["seed"] = cfg.seed;
  doc["scoring"] = scoring_config_to_json(cfg.scoring);
  doc["evaluate_episodes"] = cfg.evaluate_episodes;
  doc["eval_threshold"] = cfg.eval_threshold;
  return doc;
}

struct StreamResult {
  nlohmann::json report;
  std::string summary;
  GlobalBuffer buffer;
};

namespace stream_detail {

struct LoadedEpisode {
  EpisodeManifest manifest;
  std::vector<ProbabilityVolume> probs;
  std::vector<LabelMask> gts;
};

inline LoadedEpisode load_episode(const std::filesystem::path& manifest_path) {
  LoadedEpisode ep;
  ep.manifest = load_manifest(manifest_path);
  const auto violations = validate_manifest(ep.manifest);
  if (!violations.empty()) {
    std::string joined = violations.front();
    if (violations.size() > 1)
      joined += " (+" + std::to_string(violations.size() - 1) + " more)";
    raise(Errc::CorruptState, manifest_path.string() + ": " + joined);
  }
  for (const auto& s : ep.manifest.samples) {
    ep.probs.push_back(read_probability_volume(ep.manifest.resolve(s.prob_path)));
    ep.gts.push_back(read_label_mask(ep.manifest.resolve(s.gt_path)));
  }
  return ep;
}

inline double evaluate_episode(const LoadedEpisode& ep, double threshold) {
  std::vector<LabelMask> preds;
  preds.reserve(ep.probs.size());
  for (const auto& prob : ep.probs) {
    LabelMask pred(prob.dims, (prob.data > static_cast<float>(threshold)).cast<std::uint8_t>());
    preds.push_back(std::move(pred));
  }
  return episode_dsc(preds, ep.gts);
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace stream_detail

/// Runs the full continual-learning episode loop: validate, score, select the
/// episode partition, update the global buffer, plan modality drops for every
/// buffered entry, and (optionally) append an evaluation row. Aborts with
/// InvariantViolation if any buffer invariant breaks.
inline StreamResult run_stream(const StreamConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const auto canonical = stream_config_canonical(cfg);
  const auto config_hash = stream_detail::hex64(fnv1a64(canonical.dump()));

  ChannelLayout layout;
  GlobalBuffer buffer;
  buffer.beta = cfg.beta;
  ResultMatrix results;
  std::vector<stream_detail::LoadedEpisode> episodes;  // kept for evaluation rows
  bool any_exhausted = false;
  std::set<std::int64_t> exhausted_episodes;
  int inflation_events = 0;

  nlohmann::json report;
  report["version"] = kStreamReportVersion;
  report["config_hash"] = config_hash;
  report["config"] = canonical;
  report["beta"] = cfg.beta;
  report["seed"] = cfg.seed;
  report["episodes"] = nlohmann::json::array();

  std::ostringstream summary;
  summary << "stream: " << cfg.episodes.size() << " episodes, beta=" << cfg.beta
          << ", seed=" << cfg.seed << ", config=" << config_hash << '\n';

  for (std::size_t e = 0; e < cfg.episodes.size(); ++e) {
    episodes.push_back(stream_detail::load_episode(cfg.episodes[e]));
    auto& ep = episodes.back();
    const auto episode_index = static_cast<std::int64_t>(e);

    // layout growth
    const int old_k = layout.k_max();
    layout = register_modalities(layout, ep.manifest.modalities);
    const int new_k = layout.k_max();
    nlohmann::json layout_event;
    if (new_k == old_k) {
      layout_event = {{"type", "none"}, {"old_k", old_k}, {"new_k", new_k}};
    } else if (old_k == 0) {
      layout_event = {{"type", "init"}, {"old_k", old_k}, {"new_k", new_k}};
    } else {
      layout_event = {{"type", "inflate"}, {"old_k", old_k}, {"new_k", new_k}};
      ++inflation_events;
    }

    // scoring
    std::vector<DatasetSample> samples;
    for (std::size_t i = 0; i < ep.manifest.samples.size(); ++i)
      samples.push_back({ep.manifest.samples[i].sample_id, &ep.probs[i], &ep.gts[i]});
    auto scores = score_dataset(samples, cfg.scoring, cfg.threads);

    std::vector<ScoredCandidate> candidates;
    std::int64_t excluded = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      ScoredCandidate c;
      c.scores = scores[i];
      c.prob_path =
          ep.manifest.resolve(ep.manifest.samples[i].prob_path).lexically_normal().generic_string();
      c.gt_path =
          ep.manifest.resolve(ep.manifest.samples[i].gt_path).lexically_normal().generic_string();
      c.modalities = ep.manifest.modalities;
      if (c.scores.excluded) ++excluded;
      candidates.push_back(std::move(c));
    }

    auto scores_json =
        scores_doc(ep.manifest.name, ep.manifest.lesion_type, cfg.scoring, candidates);
    require_valid(schema::validate_scores_doc(scores_json), "scores document");
    stream_detail::write_json_file(
        cfg.out_dir / ("scores_ep" + std::to_string(e) + ".json"), scores_json);

    // partition + buffer update
    const std::int64_t n = cfg.partition_n.value_or(cfg.beta);
    const auto valid_count = static_cast<std::int64_t>(candidates.size()) - excluded;
    const bool exhausted = valid_count < n;
    if (exhausted) {
      any_exhausted = true;
      exhausted_episodes.insert(episode_index);
    }
    auto partition = select_partition(candidates, episode_index, n);
    const auto rep_count = partition.count(Category::representative);
    const auto diff_count = partition.count(Category::difficult);
    buffer = update_global(std::move(buffer), std::move(partition));

    // invariant checks (3 = internal violation downstream)
    nlohmann::json invariants;
    const bool capacity_ok = buffer.total_entries() <= cfg.beta;
    invariants["capacity_ok"] = capacity_ok;
    if (!capacity_ok)
      raise(Errc::InvariantViolation, "buffer capacity exceeded after episode " +
                                          std::to_string(e));
    if (!any_exhausted) {
      std::int64_t lo = cfg.beta, hi = 0;
      for (const auto& p : buffer.partitions) {
        lo = std::min(lo, p.size());
        hi = std::max(hi, p.size());
      }
      const bool parity_ok = hi - lo <= 1;
      invariants["parity_ok"] = parity_ok;
      if (!parity_ok)
        raise(Errc::InvariantViolation, "partition parity broken after episode " +
                                            std::to_string(e));
    } else {
      invariants["parity_ok"] = nullptr;  // skipped: some episode ran short of candidates
    }
    bool any_split_checked = false;
    bool split_ok = true;
    for (const auto& p : buffer.partitions) {
      if (exhausted_episodes.count(p.episode)) continue;
      any_split_checked = true;
      split_ok = split_ok &&
                 std::abs(p.count(Category::representative) - p.count(Category::difficult)) <= 1;
    }
    invariants["split_ok"] = any_split_checked ? nlohmann::json(split_ok) : nlohmann::json();
    if (any_split_checked && !split_ok)
      raise(Errc::InvariantViolation, "rep/diff split broken after episode " + std::to_string(e));

    // modality-drop plan for everything now in the buffer
    nlohmann::json rmd_plan = nlohmann::json::array();
    for (const auto& p : buffer.partitions)
      for (const auto& entry : p.entries) {
        auto kept = rmd_mask(entry.modalities, cfg.seed, entry.sample_id,
                             static_cast<std::uint64_t>(e));
        rmd_plan.push_back({{"sample_id", entry.sample_id},
                            {"episode", entry.episode},
                            {"kept", kept}});
      }

    // optional evaluation row over all episodes seen so far
    nlohmann::json metrics_row;
    if (cfg.evaluate_episodes) {
      std::vector<double> row;
      for (std::size_t i = 0; i <= e; ++i)
        row.push_back(stream_detail::evaluate_episode(episodes[i], cfg.eval_threshold));
      results.tasks.push_back(episodes[e].manifest.name);
      results.rows.push_back(row);
      metrics_row = row;
    }

    nlohmann::json partition_sizes = nlohmann::json::array();
    for (const auto& p : buffer.partitions) partition_sizes.push_back(p.size());

    report["episodes"].push_back(
        {{"index", episode_index},
         {"name", ep.manifest.name},
         {"lesion_type", ep.manifest.lesion_type},
         {"modalities", ep.manifest.modalities},
         {"prompt", build_prompt(ep.manifest.lesion_type, ep.manifest.modalities)},
         {"scored", scores.size()},
         {"excluded", excluded},
         {"selected", {{"representative", rep_count}, {"difficult", diff_count}}},
         {"exhausted", exhausted},
         {"layout_event", layout_event},
         {"buffer", {{"total", buffer.total_entries()}, {"partition_sizes", partition_sizes}}},
         {"invariants", invariants},
         {"rmd_plan", rmd_plan},
         {"metrics_row", metrics_row}});

    summary << "episode " << e << " (" << ep.manifest.name << "): scored " << scores.size()
            << ", excluded " << excluded << ", selected " << rep_count << "+" << diff_count
            << " (rep+diff), layout " << layout_event["type"].get<std::string>() << " K "
            << old_k << "->" << new_k << ", buffer " << buffer.total_entries() << "/" << cfg.beta
            << " sizes [";
    for (std::size_t i = 0; i < buffer.partitions.size(); ++i)
      summary << (i ? " " : "") << buffer.partitions[i].size();
    summary << "]\n";

    // free the volume payloads; evaluation keeps what it needs
    if (!cfg.evaluate_episodes) {
      ep.probs.clear();
      ep.gts.clear();
    }
  }

  report["layout"] = layout_to_json(layout);
  require_valid(schema::validate_layout_doc(report["layout"]), "layout document");
  report["inflation_events"] = inflation_events;

  auto state = save_state(buffer);
  require_valid(schema::validate_buffer_state_doc(state), "buffer state");
  stream_detail::write_json_file(cfg.out_dir / "buffer_state.json", state);
  report["final_buffer"] = state;

  if (cfg.evaluate_episodes) {
    auto results_json = results_to_json(results);
    require_valid(schema::validate_results_doc(results_json), "results document");
    stream_detail::write_json_file(cfg.out_dir / "results.json", results_json);
    auto metrics_json = metrics_report(results);
    require_valid(schema::validate_metrics_doc(metrics_json), "metrics document");
    stream_detail::write_json_file(cfg.out_dir / "metrics.json", metrics_json);
    report["metrics"] = metrics_json;
    summary << "metrics: avg=" << metrics_json["avg"].get<double>()
            << " ilm=" << metrics_json["ilm"].get<double>() << " bwt=";
    if (metrics_json["bwt"].is_null())
      summary << "n/a";
    else
      summary << metrics_json["bwt"].get<double>();
    summary << '\n';
  } else {
    report["metrics"] = nullptr;
  }

  require_valid(schema::validate_stream_report_doc(report), "stream report");
  stream_detail::write_json_file(cfg.out_dir / "report.json", report);
  {
    std::ofstream out(cfg.out_dir / "summary.txt");
    if (!out) raise(Errc::IoFailure, "cannot write summary");
    out << summary.str();
  }

  StreamResult result;
  result.report = std::move(report);
  result.summary = summary.str();
  result.buffer = std::move(buffer);
  return result;
}

}  // namespace rforge

#pragma once

// Emitted JSON documents: builders, parsers, and the structural validators run
// on every document before it is written.

#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/buffer.hpp"
#include "replay_forge/error.hpp"
#include "replay_forge/scoring.hpp"

namespace rforge {

inline constexpr int kScoresDocVersion = 1;
inline constexpr int kStreamReportVersion = 1;

inline nlohmann::json scoring_config_to_json(const ScoringConfig& c) {
  return nlohmann::json{{"tau", c.tau},
                        {"alpha", c.alpha},
                        {"gamma", c.gamma},
                        {"band", {{"inward", c.band.inward}, {"outward", c.band.outward}}},
                        {"connectivity", static_cast<int>(c.connectivity)}};
}

inline ScoringConfig scoring_config_from_json(const nlohmann::json& doc) {
  ScoringConfig c;
  try {
    if (doc.contains("tau")) c.tau = doc["tau"].get<double>();
    if (doc.contains("alpha")) c.alpha = doc["alpha"].get<double>();
    if (doc.contains("gamma")) c.gamma = doc["gamma"].get<double>();
    if (doc.contains("band")) {
      c.band.inward = doc["band"].value("inward", c.band.inward);
      c.band.outward = doc["band"].value("outward", c.band.outward);
    }
    if (doc.contains("connectivity"))
      c.connectivity = connectivity_from_int(doc["connectivity"].get<int>());
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("scoring config: ") + e.what());
  }
  for (double v : {c.tau, c.alpha, c.gamma})
    if (!(v >= 0.0 && v <= 1.0))
      raise(Errc::CorruptState, "scoring config: tau/alpha/gamma must lie in [0,1]");
  if (c.band.inward < 0 || c.band.outward < 0)
    raise(Errc::CorruptState, "scoring config: band steps must be non-negative");
  return c;
}

/// Scored sample list as persisted by the score command and consumed by
/// buffer updates. Excluded samples keep null score fields.
inline nlohmann::json scores_doc(const std::string& episode, const std::string& lesion_type,
                                 const ScoringConfig& config,
                                 const std::vector<ScoredCandidate>& candidates) {
  nlohmann::json doc;
  doc["version"] = kScoresDocVersion;
  doc["episode"] = episode;
  doc["lesion_type"] = lesion_type;
  doc["config"] = scoring_config_to_json(config);
  doc["samples"] = nlohmann::json::array();
  for (const auto& c : candidates) {
    const auto& s = c.scores;
    nlohmann::json sj;
    sj["sample_id"] = s.sample_id;
    sj["excluded"] = s.excluded;
    sj["exclusion_reason"] = s.excluded ? nlohmann::json(s.exclusion_reason) : nlohmann::json();
    if (s.raw) {
      sj["raw"] = {{"conf", s.raw->conf},
                   {"size", s.raw->size},
                   {"unc", s.raw->unc},
                   {"comp", s.raw->comp}};
    } else {
      sj["raw"] = nullptr;
    }
    if (s.norm) {
      sj["norm"] = {{"conf", s.norm->conf},
                    {"size", s.norm->size},
                    {"unc", s.norm->unc},
                    {"comp", s.norm->comp}};
    } else {
      sj["norm"] = nullptr;
    }
    sj["r_rep"] = s.r_rep ? nlohmann::json(*s.r_rep) : nlohmann::json();
    sj["r_diff"] = s.r_diff ? nlohmann::json(*s.r_diff) : nlohmann::json();
    sj["prob_path"] = c.prob_path;
    sj["gt_path"] = c.gt_path;
    sj["modalities"] = c.modalities;
    doc["samples"].push_back(std::move(sj));
  }
  return doc;
}

struct ParsedScoresDoc {
  std::string episode;
  std::string lesion_type;
  ScoringConfig config;
  std::vector<ScoredCandidate> candidates;
};

inline ParsedScoresDoc parse_scores_doc(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version"))
    raise(Errc::CorruptState, "scores doc: missing version");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kScoresDocVersion)
    raise(Errc::SchemaMismatch, "scores doc: unsupported version");
  ParsedScoresDoc out;
  try {
    out.episode = doc.at("episode").get<std::string>();
    out.lesion_type = doc.value("lesion_type", std::string{});
    out.config = scoring_config_from_json(doc.at("config"));
    for (const auto& sj : doc.at("samples")) {
      ScoredCandidate c;
      c.scores.sample_id = sj.at("sample_id").get<std::string>();
      c.scores.excluded = sj.at("excluded").get<bool>();
      if (c.scores.excluded)
        c.scores.exclusion_reason = sj.at("exclusion_reason").get<std::string>();
      if (!sj.at("raw").is_null()) {
        RawScores raw;
        raw.conf = sj["raw"].at("conf").get<double>();
        raw.size = sj["raw"].at("size").get<std::int64_t>();
        raw.unc = sj["raw"].at("unc").get<double>();
        raw.comp = sj["raw"].at("comp").get<double>();
        c.scores.raw = raw;
      }
      if (!sj.at("norm").is_null()) {
        NormScores norm;
        norm.conf = sj["norm"].at("conf").get<double>();
        norm.size = sj["norm"].at("size").get<double>();
        norm.unc = sj["norm"].at("unc").get<double>();
        norm.comp = sj["norm"].at("comp").get<double>();
        c.scores.norm = norm;
      }
      if (!sj.at("r_rep").is_null()) c.scores.r_rep = sj["r_rep"].get<double>();
      if (!sj.at("r_diff").is_null()) c.scores.r_diff = sj["r_diff"].get<double>();
      c.prob_path = sj.at("prob_path").get<std::string>();
      c.gt_path = sj.at("gt_path").get<std::string>();
      c.modalities = sj.at("modalities").get<std::vector<std::string>>();
      out.candidates.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("scores doc: ") + e.what());
  }
  return out;
}

// ---- schema validators -------------------------------------------------------

namespace schema {

inline void need(std::vector<std::string>& out, bool ok, const std::string& msg) {
  if (!ok) out.push_back(msg);
}

inline std::vector<std::string> validate_scores_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object(), "scores doc must be an object");
  if (!doc.is_object()) return v;
  need(v, doc.value("version", -1) == kScoresDocVersion, "bad version");
  need(v, doc.contains("episode") && doc["episode"].is_string(), "episode must be a string");
  need(v, doc.contains("config") && doc["config"].is_object(), "config must be an object");
  need(v, doc.contains("samples") && doc["samples"].is_array(), "samples must be an array");
  if (!doc.contains("samples") || !doc["samples"].is_array()) return v;
  for (const auto& s : doc["samples"]) {
    need(v, s.contains("sample_id") && s["sample_id"].is_string(), "sample_id must be a string");
    need(v, s.contains("excluded") && s["excluded"].is_boolean(), "excluded must be a bool");
    for (const char* key : {"raw", "norm", "r_rep", "r_diff", "exclusion_reason"})
      need(v, s.contains(key), std::string("sample missing ") + key);
    need(v, s.contains("modalities") && s["modalities"].is_array(),
         "modalities must be an array");
    if (s.value("excluded", false)) {
      need(v, s["raw"].is_null() || s["norm"].is_null(), "excluded sample with full scores");
    } else if (s.contains("r_rep") && s.contains("r_diff")) {
      const bool scored = s["r_rep"].is_number() && s["r_diff"].is_number();
      need(v, scored, "included sample without combined scores");
      if (scored) {
        const double rep = s["r_rep"].get<double>(), diff = s["r_diff"].get<double>();
        need(v, rep >= 0.0 && rep <= 1.0 && diff >= 0.0 && diff <= 1.0,
             "combined scores must lie in [0,1]");
      }
    }
  }
  return v;
}

inline std::vector<std::string> validate_buffer_state_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object(), "buffer state must be an object");
  if (!doc.is_object()) return v;
  need(v, doc.value("version", -1) == kBufferStateVersion, "bad version");
  need(v, doc.contains("beta") && doc["beta"].is_number_integer(), "beta must be an integer");
  need(v, doc.contains("partitions") && doc["partitions"].is_array(),
       "partitions must be an array");
  if (!doc.contains("partitions") || !doc["partitions"].is_array()) return v;
  std::int64_t total = 0;
  for (const auto& p : doc["partitions"]) {
    need(v, p.contains("episode") && p["episode"].is_number_integer(),
         "partition episode must be an integer");
    need(v, p.contains("entries") && p["entries"].is_array(), "entries must be an array");
    if (!p.contains("entries") || !p["entries"].is_array()) continue;
    total += static_cast<std::int64_t>(p["entries"].size());
    for (const auto& e : p["entries"]) {
      for (const char* key : {"sample_id", "category", "stored_score", "prob_path", "gt_path"})
        need(v, e.contains(key), std::string("entry missing ") + key);
      if (e.contains("category"))
        need(v, e["category"] == "representative" || e["category"] == "difficult",
             "unknown category");
      if (e.contains("stored_score") && e["stored_score"].is_number()) {
        const double s = e["stored_score"].get<double>();
        need(v, s >= 0.0 && s <= 1.0, "stored_score outside [0,1]");
      }
    }
  }
  if (doc.contains("beta") && doc["beta"].is_number_integer())
    need(v, total <= doc["beta"].get<std::int64_t>(), "entries exceed capacity");
  return v;
}

inline std::vector<std::string> validate_layout_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object() && doc.value("version", -1) == 1, "bad layout document");
  if (!doc.is_object() || !doc.contains("modalities") || !doc["modalities"].is_array()) {
    need(v, false, "modalities must be an array");
    return v;
  }
  int expect = 0;
  for (const auto& m : doc["modalities"]) {
    need(v, m.contains("name") && m["name"].is_string(), "modality name must be a string");
    need(v, m.value("index", -1) == expect, "channel indices must be 0..k-1 in order");
    ++expect;
  }
  return v;
}

inline std::vector<std::string> validate_results_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object() && doc.value("version", -1) == 1, "bad results document");
  if (!doc.is_object() || !doc.contains("rows") || !doc["rows"].is_array()) {
    need(v, false, "rows must be an array");
    return v;
  }
  std::size_t t = 0;
  for (const auto& row : doc["rows"]) {
    need(v, row.is_array() && row.size() == t + 1,
         "row " + std::to_string(t) + " must hold " + std::to_string(t + 1) + " entries");
    for (const auto& x : row) {
      need(v, x.is_number(), "DSC entries must be numbers");
      if (x.is_number()) {
        const double d = x.get<double>();
        need(v, d >= 0.0 && d <= 1.0, "DSC outside [0,1]");
      }
    }
    ++t;
  }
  return v;
}

inline std::vector<std::string> validate_metrics_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object() && doc.value("version", -1) == 1, "bad metrics document");
  for (const char* key : {"avg", "ilm", "bwt", "per_task_final"})
    need(v, doc.is_object() && doc.contains(key), std::string("metrics missing ") + key);
  return v;
}

inline std::vector<std::string> validate_stream_report_doc(const nlohmann::json& doc) {
  std::vector<std::string> v;
  need(v, doc.is_object() && doc.value("version", -1) == kStreamReportVersion,
       "bad report version");
  if (!doc.is_object()) return v;
  for (const char* key : {"config_hash", "beta", "seed", "episodes", "layout", "final_buffer"})
    need(v, doc.contains(key), std::string("report missing ") + key);
  if (!doc.contains("episodes") || !doc["episodes"].is_array()) return v;
  for (const auto& e : doc["episodes"]) {
    for (const char* key :
         {"index", "name", "prompt", "scored", "excluded", "selected", "layout_event", "buffer",
          "invariants", "rmd_plan"})
      need(v, e.contains(key), std::string("episode entry missing ") + key);
    if (e.contains("invariants") && e["invariants"].is_object())
      for (const auto& [name, ok] : e["invariants"].items())
        need(v, ok.is_boolean() || ok.is_null(), "invariant " + name + " must be bool or null");
  }
  return v;
}

}  // namespace schema

/// Writers call this before persisting; a failing document is a bug, not bad
/// user input.
inline void require_valid(const std::vector<std::string>& violations, const std::string& what) {
  if (!violations.empty())
    raise(Errc::InvariantViolation, what + ": " + violations.front() + " (+" +
                                        std::to_string(violations.size() - 1) + " more)");
}

}  // namespace rforge

#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/error.hpp"
#include "replay_forge/volume.hpp"

namespace rforge {

/// Lower-triangular result matrix: rows[t][i] is the mean DSC on task i after
/// training session t (0 <= i <= t).
struct ResultMatrix {
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> rows;

  int num_sessions() const { return static_cast<int>(rows.size()); }
};

namespace detail {

inline void require_row_complete(const ResultMatrix& r, std::size_t t) {
  if (r.rows[t].size() != t + 1)
    raise(Errc::IncompleteRow, "result matrix: row " + std::to_string(t) + " holds " +
                                   std::to_string(r.rows[t].size()) + " entries, expected " +
                                   std::to_string(t + 1));
}

}  // namespace detail

/// Mean DSC over all tasks after the final session.
inline double avg(const ResultMatrix& r) {
  if (r.rows.empty()) raise(Errc::Empty, "avg: no sessions");
  const std::size_t last = r.rows.size() - 1;
  detail::require_row_complete(r, last);
  double acc = 0;
  for (double v : r.rows[last]) acc += v;
  return acc / static_cast<double>(r.rows[last].size());
}

/// Backward transfer: mean over earlier tasks of final minus just-learned
/// performance. Negative values mean forgetting.
inline double bwt(const ResultMatrix& r) {
  const auto t = r.rows.size();
  if (t < 2) raise(Errc::SingleTask, "bwt: needs at least two sessions");
  detail::require_row_complete(r, t - 1);
  for (std::size_t i = 0; i + 1 < t; ++i) detail::require_row_complete(r, i);
  double acc = 0;
  for (std::size_t i = 0; i + 1 < t; ++i) acc += r.rows[t - 1][i] - r.rows[i][i];
  return acc / static_cast<double>(t - 1);
}

/// Mean over sessions of the mean DSC across all tasks seen so far.
inline double ilm(const ResultMatrix& r) {
  if (r.rows.empty()) raise(Errc::Empty, "ilm: no sessions");
  double acc = 0;
  for (std::size_t t = 0; t < r.rows.size(); ++t) {
    detail::require_row_complete(r, t);
    double row = 0;
    for (double v : r.rows[t]) row += v;
    acc += row / static_cast<double>(r.rows[t].size());
  }
  return acc / static_cast<double>(r.rows.size());
}

/// Unweighted mean DSC over paired prediction/label masks.
inline double episode_dsc(std::span<const LabelMask> preds, std::span<const LabelMask> gts) {
  if (preds.size() != gts.size())
    raise(Errc::LengthMismatch, "episode_dsc: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(gts.size()) + " labels");
  if (preds.empty()) raise(Errc::Empty, "episode_dsc: no samples");
  double acc = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) acc += dice(preds[i], gts[i]);
  return acc / static_cast<double>(preds.size());
}

inline constexpr int kResultsVersion = 1;

inline nlohmann::json results_to_json(const ResultMatrix& r) {
  return nlohmann::json{{"version", kResultsVersion}, {"tasks", r.tasks}, {"rows", r.rows}};
}

inline ResultMatrix results_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version"))
    raise(Errc::CorruptState, "results: missing version");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kResultsVersion)
    raise(Errc::SchemaMismatch, "results: unsupported version");
  ResultMatrix r;
  try {
    r.tasks = doc.at("tasks").get<std::vector<std::string>>();
    r.rows = doc.at("rows").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("results: ") + e.what());
  }
  for (const auto& row : r.rows)
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0)) raise(Errc::CorruptState, "results: DSC outside [0,1]");
  return r;
}

/// Metrics report for a completed stream.
inline nlohmann::json metrics_report(const ResultMatrix& r) {
  nlohmann::json doc;
  doc["version"] = kResultsVersion;
  doc["avg"] = avg(r);
  doc["ilm"] = ilm(r);
  if (r.num_sessions() >= 2)
    doc["bwt"] = bwt(r);
  else
    doc["bwt"] = nullptr;
  doc["per_task_final"] = r.rows.back();
  return doc;
}

}  // namespace rforge

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/error.hpp"
#include "replay_forge/modality.hpp"
#include "replay_forge/vol1.hpp"

namespace rforge {

inline constexpr int kManifestVersion = 1;

struct ManifestSample {
  std::string sample_id;
  std::map<std::string, std::string> volumes;  // modality -> path
  std::string gt_path;
  std::string prob_path;
};

struct EpisodeManifest {
  std::string name;
  std::string lesion_type;
  std::vector<std::string> modalities;
  std::vector<ManifestSample> samples;
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  std::filesystem::path resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }
};

inline nlohmann::json manifest_to_json(const EpisodeManifest& m) {
  nlohmann::json doc;
  doc["version"] = kManifestVersion;
  doc["episode"] = m.name;
  doc["lesion_type"] = m.lesion_type;
  doc["modalities"] = m.modalities;
  doc["samples"] = nlohmann::json::array();
  for (const auto& s : m.samples) {
    doc["samples"].push_back({{"sample_id", s.sample_id},
                              {"volumes", s.volumes},
                              {"gt", s.gt_path},
                              {"prob", s.prob_path}});
  }
  return doc;
}

inline EpisodeManifest manifest_from_json(const nlohmann::json& doc,
                                          const std::filesystem::path& base_dir) {
  if (!doc.is_object()) raise(Errc::CorruptState, "manifest: not a JSON object");
  for (const char* field : {"version", "episode", "lesion_type", "modalities", "samples"})
    if (!doc.contains(field))
      raise(Errc::MissingField, std::string("manifest: missing field ") + field);
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kManifestVersion)
    raise(Errc::SchemaMismatch, "manifest: unsupported version");
  EpisodeManifest m;
  m.base_dir = base_dir;
  try {
    m.name = doc["episode"].get<std::string>();
    m.lesion_type = doc["lesion_type"].get<std::string>();
    m.modalities = doc["modalities"].get<std::vector<std::string>>();
    for (const auto& sj : doc["samples"]) {
      for (const char* field : {"sample_id", "volumes", "gt", "prob"})
        if (!sj.contains(field))
          raise(Errc::MissingField, std::string("manifest sample: missing field ") + field);
      ManifestSample s;
      s.sample_id = sj["sample_id"].get<std::string>();
      s.volumes = sj["volumes"].get<std::map<std::string, std::string>>();
      s.gt_path = sj["gt"].get<std::string>();
      s.prob_path = sj["prob"].get<std::string>();
      m.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("manifest: ") + e.what());
  }
  return m;
}

inline EpisodeManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoFailure, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, path.string() + ": " + e.what());
  }
  return manifest_from_json(doc, path.parent_path());
}

/// Structural validation: unique sample ids, modality keys covered by the
/// episode list, every referenced file present with consistent dims per
/// sample. Returns human-readable violations; empty means valid.
inline std::vector<std::string> validate_manifest(const EpisodeManifest& m) {
  std::vector<std::string> violations;
  if (m.name.empty()) violations.push_back("MissingField: empty episode name");
  if (m.samples.empty()) violations.push_back("MissingField: no samples");

  std::set<std::string> episode_modalities;
  for (const auto& raw : m.modalities) {
    const auto name = ChannelLayout::normalize_name(raw);
    if (name.empty())
      violations.push_back("MissingField: empty modality name in episode list");
    else
      episode_modalities.insert(name);
  }

  std::set<std::string> ids;
  for (const auto& s : m.samples) {
    if (!ids.insert(s.sample_id).second)
      violations.push_back("DuplicateSampleId: " + s.sample_id);
    for (const auto& [modality, rel] : s.volumes) {
      (void)rel;
      if (!episode_modalities.count(ChannelLayout::normalize_name(modality)))
        violations.push_back("UnknownModalityKey: sample " + s.sample_id + " uses " + modality);
    }
    std::vector<std::uint32_t> dims;
    auto check_file = [&](const std::string& rel, Vol1Dtype want) {
      const auto path = m.resolve(rel);
      if (!std::filesystem::exists(path)) {
        violations.push_back("IoFailure: missing file " + rel + " for sample " + s.sample_id);
        return;
      }
      try {
        const auto header = read_vol1_header(read_file_bytes(path));
        if (header.dtype != want)
          violations.push_back("BadDtype: " + rel + " has the wrong dtype");
        if (header.dims.size() != 3) {
          violations.push_back("ShapeMismatch: " + rel + " is not 3-D");
          return;
        }
        if (dims.empty())
          dims = header.dims;
        else if (dims != header.dims)
          violations.push_back("DimMismatch: " + rel + " dims differ within sample " +
                               s.sample_id);
      } catch (const Error& e) {
        violations.push_back(std::string(errc_name(e.code())) + ": " + rel);
      }
    };
    check_file(s.gt_path, Vol1Dtype::u8);
    check_file(s.prob_path, Vol1Dtype::f32);
    for (const auto& [modality, rel] : s.volumes) check_file(rel, Vol1Dtype::f32);
  }
  return violations;
}

}  // namespace rforge

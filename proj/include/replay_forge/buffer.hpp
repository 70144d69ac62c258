#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_forge/error.hpp"
#include "replay_forge/prng.hpp"
#include "replay_forge/scoring.hpp"

namespace rforge {

enum class Category { representative, difficult };

inline const char* category_name(Category c) {
  return c == Category::representative ? "representative" : "difficult";
}

struct BufferEntry {
  std::string sample_id;
  std::int64_t episode = 0;
  Category category = Category::representative;
  double stored_score = 0;  // the normalized combined score at selection time
  std::string prob_path;
  std::string gt_path;
  std::vector<std::string> modalities;
};

struct Partition {
  std::int64_t episode = 0;
  std::vector<BufferEntry> entries;

  std::int64_t count(Category c) const {
    return static_cast<std::int64_t>(
        std::count_if(entries.begin(), entries.end(),
                      [c](const BufferEntry& e) { return e.category == c; }));
  }
  std::int64_t size() const { return static_cast<std::int64_t>(entries.size()); }
};

struct GlobalBuffer {
  std::int64_t beta = 0;
  std::vector<Partition> partitions;

  std::int64_t total_entries() const {
    std::int64_t n = 0;
    for (const auto& p : partitions) n += p.size();
    return n;
  }
};

/// Scored sample plus the file references carried into the buffer.
struct ScoredCandidate {
  SampleScores scores;
  std::string prob_path;
  std::string gt_path;
  std::vector<std::string> modalities;
};

/// Picks ceil(n/2) top samples by R_rep and floor(n/2) by R_diff. A sample
/// ranked into both lists goes to the representative side and the difficult
/// list advances past it. Ties break by ascending sample id. With fewer than
/// n valid candidates, everything valid is taken.
inline Partition select_partition(std::span<const ScoredCandidate> candidates,
                                  std::int64_t episode, std::int64_t n) {
  if (n < 1) raise(Errc::EmptyInput, "select_partition: n must be >= 1");
  std::vector<const ScoredCandidate*> valid;
  for (const auto& c : candidates)
    if (!c.scores.excluded && c.scores.r_rep && c.scores.r_diff) valid.push_back(&c);
  if (valid.empty()) raise(Errc::NoValidSamples, "select_partition: no valid scored samples");

  std::vector<const ScoredCandidate*> by_rep = valid;
  std::sort(by_rep.begin(), by_rep.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
    if (*a->scores.r_rep != *b->scores.r_rep) return *a->scores.r_rep > *b->scores.r_rep;
    return a->scores.sample_id < b->scores.sample_id;
  });
  std::vector<const ScoredCandidate*> by_diff = valid;
  std::sort(by_diff.begin(), by_diff.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
    if (*a->scores.r_diff != *b->scores.r_diff) return *a->scores.r_diff > *b->scores.r_diff;
    return a->scores.sample_id < b->scores.sample_id;
  });

  const std::int64_t n_rep = (n + 1) / 2;
  const std::int64_t n_diff = n / 2;

  Partition part;
  part.episode = episode;
  std::vector<std::string> taken;
  auto make_entry = [&](const ScoredCandidate* c, Category cat, double score) {
    BufferEntry e;
    e.sample_id = c->scores.sample_id;
    e.episode = episode;
    e.category = cat;
    e.stored_score = score;
    e.prob_path = c->prob_path;
    e.gt_path = c->gt_path;
    e.modalities = c->modalities;
    part.entries.push_back(std::move(e));
    taken.push_back(c->scores.sample_id);
  };

  for (const auto* c : by_rep) {
    if (part.size() >= n_rep) break;
    make_entry(c, Category::representative, *c->scores.r_rep);
  }
  for (const auto* c : by_diff) {
    if (part.count(Category::difficult) >= n_diff) break;
    if (std::find(taken.begin(), taken.end(), c->scores.sample_id) != taken.end()) continue;
    make_entry(c, Category::difficult, *c->scores.r_diff);
  }
  return part;
}

namespace detail {

// Final per-partition allocations: base quota floor(beta/t) with the beta mod t
// remainder on the most recent partitions, then slots undersized partitions
// cannot fill are re-granted one at a time to the most recent partition that
// still has entries beyond its allocation.
inline std::vector<std::int64_t> partition_allocations(const GlobalBuffer& buffer) {
  const auto t = static_cast<std::int64_t>(buffer.partitions.size());
  const std::int64_t q = buffer.beta / t;
  const std::int64_t r = buffer.beta % t;
  std::vector<std::int64_t> alloc(t);
  for (std::int64_t i = 0; i < t; ++i) {
    const std::int64_t quota = q + (i >= t - r ? 1 : 0);
    alloc[i] = std::min(buffer.partitions[i].size(), quota);
  }
  std::int64_t leftover = buffer.beta;
  for (auto a : alloc) leftover -= a;
  while (leftover > 0) {
    std::int64_t j = -1;
    for (std::int64_t i = t - 1; i >= 0; --i)
      if (buffer.partitions[i].size() > alloc[i]) {
        j = i;
        break;
      }
    if (j < 0) break;
    ++alloc[j];
    --leftover;
  }
  return alloc;
}

// Removes entries until the partition holds `target`. Each step evicts the
// lowest stored_score entry (ties by ascending sample id) from the category
// furthest over its half-share; exact ties alternate starting with the
// representative side.
inline void evict_to(Partition& p, std::int64_t target) {
  const std::int64_t rep_target = (target + 1) / 2;
  const std::int64_t diff_target = target / 2;
  bool evict_rep_on_tie = true;
  while (p.size() > target) {
    const std::int64_t over_rep = p.count(Category::representative) - rep_target;
    const std::int64_t over_diff = p.count(Category::difficult) - diff_target;
    Category victim_cat;
    if (over_rep > over_diff) {
      victim_cat = Category::representative;
    } else if (over_diff > over_rep) {
      victim_cat = Category::difficult;
    } else {
      victim_cat = evict_rep_on_tie ? Category::representative : Category::difficult;
      evict_rep_on_tie = !evict_rep_on_tie;
    }
    if (p.count(victim_cat) == 0)
      victim_cat = victim_cat == Category::representative ? Category::difficult
                                                          : Category::representative;
    auto victim = p.entries.end();
    for (auto it = p.entries.begin(); it != p.entries.end(); ++it) {
      if (it->category != victim_cat) continue;
      if (victim == p.entries.end() || it->stored_score < victim->stored_score ||
          (it->stored_score == victim->stored_score && it->sample_id < victim->sample_id))
        victim = it;
    }
    p.entries.erase(victim);
  }
}

}  // namespace detail

/// Inserts a new episode partition and rebalances: every partition gets
/// roughly beta/t slots (remainder to the most recent), over-quota partitions
/// evict their lowest-ranked entries, and slots undersized partitions cannot
/// use flow to the most recent partitions that can.
inline GlobalBuffer update_global(GlobalBuffer buffer, Partition incoming) {
  for (const auto& p : buffer.partitions)
    if (p.episode >= incoming.episode)
      raise(Errc::NonMonotonicEpisode, "update_global: episode " +
                                           std::to_string(incoming.episode) +
                                           " does not exceed existing episodes");
  buffer.partitions.push_back(std::move(incoming));
  const auto alloc = detail::partition_allocations(buffer);
  for (std::size_t i = 0; i < buffer.partitions.size(); ++i)
    detail::evict_to(buffer.partitions[i], alloc[i]);
  return buffer;
}

/// Draws k entries uniformly without replacement; the draw order is the
/// output order. Identical seeds give identical batches.
inline std::vector<BufferEntry> sample_replay_batch(const GlobalBuffer& buffer, std::int64_t k,
                                                    std::uint64_t seed) {
  std::vector<const BufferEntry*> flat;
  for (const auto& p : buffer.partitions)
    for (const auto& e : p.entries) flat.push_back(&e);
  if (flat.empty()) raise(Errc::BufferEmpty, "sample_replay_batch: buffer holds no entries");
  if (k > static_cast<std::int64_t>(flat.size()))
    raise(Errc::KTooLarge, "sample_replay_batch: k exceeds buffer size");
  SplitMix64 rng(seed);
  std::vector<BufferEntry> out;
  out.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.bounded(flat.size() - i));
    std::swap(flat[i], flat[j]);
    out.push_back(*flat[i]);
  }
  return out;
}

inline constexpr int kBufferStateVersion = 1;

inline nlohmann::json save_state(const GlobalBuffer& buffer) {
  nlohmann::json doc;
  doc["version"] = kBufferStateVersion;
  doc["beta"] = buffer.beta;
  doc["partitions"] = nlohmann::json::array();
  for (const auto& p : buffer.partitions) {
    nlohmann::json pj;
    pj["episode"] = p.episode;
    pj["entries"] = nlohmann::json::array();
    for (const auto& e : p.entries) {
      pj["entries"].push_back({{"sample_id", e.sample_id},
                               {"category", category_name(e.category)},
                               {"stored_score", e.stored_score},
                               {"prob_path", e.prob_path},
                               {"gt_path", e.gt_path},
                               {"modalities", e.modalities}});
    }
    doc["partitions"].push_back(std::move(pj));
  }
  return doc;
}

inline GlobalBuffer load_state(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version"))
    raise(Errc::CorruptState, "buffer state: missing version");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kBufferStateVersion)
    raise(Errc::SchemaMismatch, "buffer state: unsupported version");
  GlobalBuffer buffer;
  try {
    buffer.beta = doc.at("beta").get<std::int64_t>();
    if (buffer.beta < 1) raise(Errc::CorruptState, "buffer state: beta must be positive");
    std::int64_t last_episode = -1;
    std::int64_t total = 0;
    for (const auto& pj : doc.at("partitions")) {
      Partition p;
      p.episode = pj.at("episode").get<std::int64_t>();
      if (p.episode <= last_episode)
        raise(Errc::CorruptState, "buffer state: partitions out of episode order");
      last_episode = p.episode;
      std::vector<std::string> seen;
      for (const auto& ej : pj.at("entries")) {
        BufferEntry e;
        e.sample_id = ej.at("sample_id").get<std::string>();
        e.episode = p.episode;
        const auto cat = ej.at("category").get<std::string>();
        if (cat == "representative")
          e.category = Category::representative;
        else if (cat == "difficult")
          e.category = Category::difficult;
        else
          raise(Errc::CorruptState, "buffer state: unknown category " + cat);
        e.stored_score = ej.at("stored_score").get<double>();
        if (!(e.stored_score >= 0.0 && e.stored_score <= 1.0))
          raise(Errc::CorruptState, "buffer state: stored_score outside [0,1]");
        e.prob_path = ej.at("prob_path").get<std::string>();
        e.gt_path = ej.at("gt_path").get<std::string>();
        e.modalities = ej.at("modalities").get<std::vector<std::string>>();
        if (std::find(seen.begin(), seen.end(), e.sample_id) != seen.end())
          raise(Errc::CorruptState, "buffer state: duplicate sample id " + e.sample_id);
        seen.push_back(e.sample_id);
        p.entries.push_back(std::move(e));
      }
      total += p.size();
      buffer.partitions.push_back(std::move(p));
    }
    if (total > buffer.beta) raise(Errc::CorruptState, "buffer state: entries exceed capacity");
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("buffer state: ") + e.what());
  }
  return buffer;
}

inline bool buffers_equal(const GlobalBuffer& a, const GlobalBuffer& b) {
  return save_state(a) == save_state(b);
}

}  // namespace rforge

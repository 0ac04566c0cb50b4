#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "chorus/latent_io.hpp"
#include "chorus/types.hpp"
#include "chorus/world.hpp"

namespace chorus {

struct CacheEntry {
  std::uint64_t id = 0;
  world::PromptTokens tokens;
  Vecd embedding;           // unit L2 norm, world::kEmbedDim
  world::Scene scene;
  Trajectory<float> trajectory;  // N+1 latents, index 0 = initial noise
  io::LatentDims dims;           // grid shape of the trajectory latents
  std::uint64_t seq = 0;         // insertion sequence number, assigned on insert

  const Matf& final_latent() const { return trajectory.back(); }
};

struct MatchResult {
  const CacheEntry* entry = nullptr;
  double m = -std::numeric_limits<double>::infinity();
  bool hit = false;
};

// Inter-request cache: exhaustive top-1 cosine retrieval over unit
// embeddings, miss-only insertion policy (enforced by the serving layer),
// no eviction. Single writer, concurrent readers; the simulator drives it
// strictly sequentially.
class Cache {
 public:
  // Top-1 by cosine over all entries; ties broken by smallest insertion
  // sequence number; empty cache misses with m = -inf.
  MatchResult lookup(const Vecd& embedding, double tau) const;

  // Appends the entry and assigns the next sequence number.
  // Duplicate entry ids are an error.
  void insert(CacheEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }
  const std::vector<CacheEntry>& entries() const { return entries_; }

  // Directory layout: index.jsonl (id, tokens, embedding, scene, seq per
  // line) plus latents/<id>.chrl trajectory blobs.
  void save(const std::string& dir) const;
  static Cache load(const std::string& dir);

  // Index-line codec, exposed so round-trip checks can run against
  // in-memory streams.
  static std::string entry_to_index_line(const CacheEntry& entry);
  static CacheEntry entry_from_index_line(const std::string& line);

 private:
  std::vector<CacheEntry> entries_;
  std::unordered_set<std::uint64_t> ids_;
  std::uint64_t next_seq_ = 0;
  bool frozen_ = false;
};

}  // namespace chorus

#include "chorus/cache.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "chorus/latent_io.hpp"

namespace chorus {

namespace fs = std::filesystem;
using json = nlohmann::json;

MatchResult Cache::lookup(const Vecd& embedding, double tau) const {
  MatchResult best;
  for (const CacheEntry& entry : entries_) {
    const double m = embedding.dot(entry.embedding);
    // Strict > keeps the earliest (smallest seq) entry on ties; entries_ is
    // ordered by insertion.
    if (best.entry == nullptr || m > best.m) {
      best.entry = &entry;
      best.m = m;
    }
  }
  best.hit = best.entry != nullptr && best.m >= tau;
  return best;
}

void Cache::insert(CacheEntry entry) {
  if (!ids_.insert(entry.id).second)
    throw std::invalid_argument("duplicate cache entry id: " + std::to_string(entry.id));
  entry.seq = next_seq_++;
  entries_.push_back(std::move(entry));
}

std::string Cache::entry_to_index_line(const CacheEntry& entry) {
  json j;
  j["id"] = entry.id;
  j["seq"] = entry.seq;
  j["tokens"] = entry.tokens;
  std::vector<double> emb(entry.embedding.data(), entry.embedding.data() + entry.embedding.size());
  j["embedding"] = emb;
  j["scene"] = world::scene_to_json(entry.scene);
  return j.dump();
}

CacheEntry Cache::entry_from_index_line(const std::string& line) {
  const json j = json::parse(line);
  CacheEntry entry;
  entry.id = j.at("id").get<std::uint64_t>();
  entry.seq = j.at("seq").get<std::uint64_t>();
  entry.tokens = j.at("tokens").get<world::PromptTokens>();
  const auto emb = j.at("embedding").get<std::vector<double>>();
  entry.embedding = Eigen::Map<const Vecd>(emb.data(), static_cast<Eigen::Index>(emb.size()));
  entry.scene = world::scene_from_json(j.at("scene").get<std::string>());
  return entry;
}

void Cache::save(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "latents");
  const fs::path index_tmp = fs::path(dir) / "index.jsonl.tmp";
  {
    std::ofstream out(index_tmp);
    if (!out) throw std::runtime_error("cannot open cache index for writing: " + dir);
    for (const CacheEntry& entry : entries_) out << entry_to_index_line(entry) << '\n';
  }
  fs::rename(index_tmp, fs::path(dir) / "index.jsonl");

  for (const CacheEntry& entry : entries_) {
    if (entry.trajectory.empty()) continue;
    const fs::path blob = fs::path(dir) / "latents" / (std::to_string(entry.id) + ".chrl");
    io::write_trajectory_file(blob.string(), entry.trajectory, entry.dims);
  }
}

Cache Cache::load(const std::string& dir) {
  const fs::path index = fs::path(dir) / "index.jsonl";
  std::ifstream in(index);
  if (!in) throw std::runtime_error("cannot open cache index: " + index.string());

  std::vector<CacheEntry> loaded;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      loaded.push_back(entry_from_index_line(line));
    } catch (const json::exception& ex) {
      throw std::runtime_error("malformed cache index at line " + std::to_string(line_no) + ": " +
                               ex.what());
    }
  }
  std::sort(loaded.begin(), loaded.end(),
            [](const CacheEntry& a, const CacheEntry& b) { return a.seq < b.seq; });

  Cache cache;
  for (CacheEntry& entry : loaded) {
    const fs::path blob = fs::path(dir) / "latents" / (std::to_string(entry.id) + ".chrl");
    entry.trajectory = io::read_trajectory_file(blob.string(), &entry.dims);
    cache.ids_.insert(entry.id);
    cache.entries_.push_back(std::move(entry));
    cache.next_seq_ = std::max(cache.next_seq_, cache.entries_.back().seq + 1);
  }
  return cache;
}

}  // namespace chorus

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chorus/cache.hpp"
#include "chorus/dit.hpp"
#include "chorus/scheduler.hpp"
#include "chorus/tgaa.hpp"
#include "chorus/types.hpp"
#include "chorus/world.hpp"

namespace chorus::serving {

struct SrdParams {
  int radius_edit = 2;   // latent-space dilation radius for the edit mask
  int radius_see = 4;    // latent-space dilation radius for the context mask
  int pool_factor = 2;   // pixel resolution = latent grid * pool_factor
  int keyframe_group = 2;

  void validate() const {
    if (radius_edit < 0 || radius_see < radius_edit)
      throw std::invalid_argument("srd: need radius_see >= radius_edit >= 0");
    if (pool_factor < 1) throw std::invalid_argument("srd: pool_factor must be >= 1");
    if (keyframe_group < 1) throw std::invalid_argument("srd: keyframe_group must be >= 1");
  }
};

struct CacheParams {
  bool insert_on_hit = false;  // ablation flag; the default policy is miss-only
};

struct RunConfig {
  ModelConfig model;
  tgaa::TgaaParams tgaa;
  SrdParams srd;
  SchedulerParams sched;
  CacheParams cache;
  world::WorkloadParams workload;
  Mode mode = Mode::chorus;
  bool reference_oracle = false;
  bool dump_masks = false;
  std::string records_path = "records.jsonl";
  std::string summary_path = "summary.json";
  std::string csv_path;   // empty = no CSV
  std::string cache_dir;  // empty = do not persist the cache
  std::uint64_t seed = 1;

  void validate() const {
    model.validate();
    srd.validate();
    sched.validate();
    workload.validate();
  }
};

struct RequestRecord {
  int index = 0;
  Mode mode = Mode::chorus;
  int cluster = 0;
  world::PromptTokens tokens;
  double m = 0.0;
  bool has_match = false;  // a top-1 candidate existed (cache non-empty)
  bool hit = false;
  int k1 = 0, k2 = 0, steps = 0;
  std::int64_t source_id = -1;
  std::size_t base_popcount = 0, edit_popcount = 0, see_popcount = 0;
  std::uint64_t macs_stage2 = 0, macs_stage3 = 0, macs_total = 0, macs_full = 0;
  double compute_fraction = 1.0;
  double wall_seconds = 0.0;  // informational; excluded from determinism checks
  std::optional<world::AlignmentScore> alignment;
  std::optional<double> ref_distance;
};

// Weights plus the memoized full-compute references for this run.
struct ServingContext {
  RunConfig cfg;
  dit::DiTWeights<float> weights;
  std::map<std::string, Matf> references;

  explicit ServingContext(RunConfig config)
      : cfg(std::move(config)), weights(dit::init_weights<float>(cfg.model)) {
    cfg.validate();
  }
};

// Full-compute latent for the scene's own prompt (no reuse); memoized.
const Matf& compute_reference(const world::Scene& scene, ServingContext& ctx);

// One request through the pipeline: embed, top-1 lookup, stage planning,
// Stage-1 latent adoption, Stage-2 masked selective denoising with TGAA,
// Stage-3 full compute, MAC accounting, miss-only cache insertion.
std::pair<Matf, RequestRecord> process_request(const world::Scene& scene, int index, int cluster,
                                               Cache& cache, ServingContext& ctx);

// Full generation for each prefix entry in baseline (no-reuse) mode,
// inserting every result.
void warm_start(Cache& cache, const std::vector<world::WorkloadEntry>& prefix,
                ServingContext& ctx);

struct RunResult {
  std::vector<RequestRecord> records;
  Cache cache;
};

// Warm-start on the workload's warm section (frozen afterwards), then
// sequential processing of the test section.
RunResult run_stream(const std::vector<world::WorkloadEntry>& workload, const RunConfig& cfg);

struct WindowStats {
  int first_index = 0;
  int count = 0;
  double hit_rate = 0.0;
  double mean_fraction = 0.0;
};

struct Aggregates {
  int window = 0;
  std::size_t total = 0;
  std::vector<WindowStats> windows;
  double hit_rate = 0.0;
  double mean_fraction_all = 0.0;
  double mean_fraction_hit = 0.0;  // NaN when there are no hits
  double speedup_proxy = 0.0;      // 1 / mean_fraction_all
  double speedup_hit = 0.0;        // 1 / mean_fraction_hit, NaN when no hits
  std::map<Mode, double> mean_alignment;
  std::map<Mode, std::size_t> alignment_counts;
};

Aggregates aggregate(const std::vector<RequestRecord>& records, int window);

}  // namespace chorus::serving

#include "chorus/serving.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include "chorus/masks.hpp"
#include "chorus/srd.hpp"

namespace chorus::serving {

namespace {

double rms_distance(const Matf& a, const Matf& b) {
  return std::sqrt((a - b).cast<double>().array().square().mean());
}

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

const Matf& compute_reference(const world::Scene& scene, ServingContext& ctx) {
  const std::string key = world::scene_to_json(scene);
  const auto it = ctx.references.find(key);
  if (it != ctx.references.end()) return it->second;
  const auto prompt = world::make_prompt_embedding<float>(scene, ctx.cfg.model);
  Trajectory<float> traj = dit::full_denoise(prompt, ctx.cfg.model, ctx.weights);
  return ctx.references.emplace(key, std::move(traj.back())).first->second;
}

std::pair<Matf, RequestRecord> process_request(const world::Scene& scene, int index, int cluster,
                                               Cache& cache, ServingContext& ctx) {
  const ModelConfig& model = ctx.cfg.model;
  const int n_steps = model.steps;
  const std::uint64_t total_tokens = static_cast<std::uint64_t>(model.num_tokens());

  RequestRecord rec;
  rec.index = index;
  rec.mode = ctx.cfg.mode;
  rec.cluster = cluster;
  rec.steps = n_steps;
  rec.tokens = world::build_prompt(scene);
  rec.macs_full = dit::mac_count(dit::MacKind::full_run, total_tokens, rec.tokens.size(), model);

  const Vecd embedding = world::embed_prompt(rec.tokens);
  // Baseline mode shares the chorus code path with an unreachable threshold.
  const double effective_tau = ctx.cfg.mode == Mode::baseline
                                   ? std::numeric_limits<double>::infinity()
                                   : ctx.cfg.sched.tau;
  const MatchResult match = cache.lookup(embedding, effective_tau);
  rec.has_match = match.entry != nullptr;
  rec.m = match.m;
  rec.hit = match.hit;

  Matf final_latent;
  if (!match.hit) {
    const StagePlan plan = plan_stages(match.m, n_steps, ctx.cfg.sched, ctx.cfg.mode);
    rec.k1 = plan.k1;
    rec.k2 = plan.k2;
    const auto prompt = world::make_prompt_embedding<float>(scene, model);
    StopWatch watch;
    Trajectory<float> traj = dit::full_denoise(prompt, model, ctx.weights);
    rec.wall_seconds = watch.seconds();
    rec.macs_stage3 = rec.macs_full;  // all steps fully computed
    rec.macs_total = rec.macs_full;
    rec.compute_fraction = 1.0;
    final_latent = traj.back();

    if (ctx.cfg.reference_oracle)
      ctx.references.emplace(world::scene_to_json(scene), final_latent);

    if (!cache.frozen()) {
      CacheEntry entry;
      entry.id = static_cast<std::uint64_t>(index);
      entry.tokens = rec.tokens;
      entry.embedding = embedding;
      entry.scene = scene;
      entry.trajectory = std::move(traj);
      entry.dims = io::dims_of(model);
      cache.insert(std::move(entry));
    }
  } else {
    const CacheEntry& source = *match.entry;
    rec.source_id = static_cast<std::int64_t>(source.id);
    StagePlan plan = plan_stages(match.m, n_steps, ctx.cfg.sched, ctx.cfg.mode);
    rec.k1 = plan.k1;
    rec.k2 = plan.k2;

    const world::DiffReport diff = world::token_diff(rec.tokens, source.tokens);
    const auto prompt = world::make_prompt_embedding<float>(scene, model, diff.diff_indices);

    StopWatch watch;
    MaskSet masks;
    if (plan.k2 > plan.k1) {
      const BinaryMask pixel =
          world::region_oracle(source.scene, diff.divergent_objects, model, ctx.cfg.srd.pool_factor);
      const BinaryMask propagated = keyframe_propagate(pixel, ctx.cfg.srd.keyframe_group);
      const BinaryMask base = project_to_latent(propagated, ctx.cfg.srd.pool_factor);
      masks = build_mask_set(base, ctx.cfg.srd.radius_edit, ctx.cfg.srd.radius_see);
      rec.base_popcount = masks.base.popcount();
      rec.edit_popcount = masks.edit.popcount();
      rec.see_popcount = masks.see.popcount();
      if (ctx.cfg.dump_masks) {
        std::cout << "request " << index << " masks (base/edit/see popcounts " << rec.base_popcount
                  << "/" << rec.edit_popcount << "/" << rec.see_popcount << ")\n"
                  << "base:\n" << render_mask(masks.base) << "edit:\n" << render_mask(masks.edit)
                  << "see:\n" << render_mask(masks.see);
      }
    }
    const auto gamma = tgaa::schedule(plan, match.m, ctx.cfg.sched.tau, ctx.cfg.tgaa);

    // Stage 1: adopt the source trajectory's latent at K1, skipping steps
    // 0..K1-1 entirely.
    Matf x = source.trajectory.at(static_cast<std::size_t>(plan.k1));
    // Stage 2: selective region denoising against the source trajectory.
    for (int t = plan.k1; t < plan.k2; ++t) {
      const auto& g = gamma.at(static_cast<std::size_t>(t - plan.k1));
      x = srd::srd_step(x, source.trajectory.at(static_cast<std::size_t>(t) + 1), masks, prompt, t,
                        g.first, g.second, model, ctx.weights);
    }
    // Stage 3: full compute with neutral factors.
    for (int t = plan.k2; t < n_steps; ++t) {
      const auto& g = gamma.at(static_cast<std::size_t>(t - plan.k1));
      x = dit::denoise_step_full(x, prompt, t, g.first, g.second, model, ctx.weights);
    }
    rec.wall_seconds = watch.seconds();

    rec.macs_stage2 = static_cast<std::uint64_t>(plan.k2 - plan.k1) *
                      dit::mac_count(dit::MacKind::step, rec.see_popcount, rec.tokens.size(), model);
    rec.macs_stage3 = static_cast<std::uint64_t>(n_steps - plan.k2) *
                      dit::mac_count(dit::MacKind::step, total_tokens, rec.tokens.size(), model);
    rec.macs_total = rec.macs_stage2 + rec.macs_stage3;
    rec.compute_fraction = static_cast<double>(rec.macs_total) / static_cast<double>(rec.macs_full);
    final_latent = std::move(x);

    if (!diff.divergent_objects.empty()) {
      const BinaryMask region = world::divergent_region_mask(scene, source.scene, diff, model);
      if (region.popcount() > 0)
        rec.alignment = world::alignment_score(final_latent, scene, source.scene, model, &region);
    }

    if (ctx.cfg.cache.insert_on_hit && !cache.frozen()) {
      CacheEntry entry;
      entry.id = static_cast<std::uint64_t>(index);
      entry.tokens = rec.tokens;
      entry.embedding = embedding;
      entry.scene = scene;
      entry.trajectory = {source.trajectory.front(), final_latent};
      entry.dims = io::dims_of(model);
      cache.insert(std::move(entry));
    }
  }

  if (ctx.cfg.reference_oracle)
    rec.ref_distance = rms_distance(final_latent, compute_reference(scene, ctx));

  return {std::move(final_latent), std::move(rec)};
}

void warm_start(Cache& cache, const std::vector<world::WorkloadEntry>& prefix,
                ServingContext& ctx) {
  const Mode saved = ctx.cfg.mode;
  ctx.cfg.mode = Mode::baseline;
  for (const world::WorkloadEntry& entry : prefix)
    process_request(entry.scene, entry.index, entry.cluster, cache, ctx);
  ctx.cfg.mode = saved;
}

RunResult run_stream(const std::vector<world::WorkloadEntry>& workload, const RunConfig& cfg) {
  ServingContext ctx(cfg);
  RunResult result;

  std::vector<world::WorkloadEntry> warm, test;
  for (const auto& entry : workload) (entry.warm ? warm : test).push_back(entry);

  if (!warm.empty()) {
    warm_start(result.cache, warm, ctx);
    result.cache.set_frozen(true);
  }
  result.records.reserve(test.size());
  for (const auto& entry : test) {
    auto [latent, record] = process_request(entry.scene, entry.index, entry.cluster,
                                            result.cache, ctx);
    result.records.push_back(std::move(record));
  }
  return result;
}

Aggregates aggregate(const std::vector<RequestRecord>& records, int window) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  if (window < 1) throw std::invalid_argument("aggregate: window must be >= 1");

  Aggregates agg;
  agg.window = window;
  agg.total = records.size();

  double fraction_sum = 0.0, fraction_hit_sum = 0.0;
  std::size_t hits = 0;
  std::map<Mode, double> align_sum;
  for (std::size_t start = 0; start < records.size(); start += static_cast<std::size_t>(window)) {
    const std::size_t end = std::min(records.size(), start + static_cast<std::size_t>(window));
    WindowStats w;
    w.first_index = records[start].index;
    w.count = static_cast<int>(end - start);
    std::size_t window_hits = 0;
    double window_fraction = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      window_hits += records[i].hit ? 1 : 0;
      window_fraction += records[i].compute_fraction;
    }
    w.hit_rate = static_cast<double>(window_hits) / static_cast<double>(w.count);
    w.mean_fraction = window_fraction / static_cast<double>(w.count);
    agg.windows.push_back(w);
  }
  for (const RequestRecord& rec : records) {
    fraction_sum += rec.compute_fraction;
    if (rec.hit) {
      ++hits;
      fraction_hit_sum += rec.compute_fraction;
    }
    if (rec.alignment) {
      align_sum[rec.mode] += rec.alignment->normalized;
      agg.alignment_counts[rec.mode] += 1;
    }
  }
  agg.hit_rate = static_cast<double>(hits) / static_cast<double>(records.size());
  agg.mean_fraction_all = fraction_sum / static_cast<double>(records.size());
  agg.speedup_proxy = 1.0 / agg.mean_fraction_all;
  if (hits > 0) {
    agg.mean_fraction_hit = fraction_hit_sum / static_cast<double>(hits);
    agg.speedup_hit = 1.0 / agg.mean_fraction_hit;
  } else {
    agg.mean_fraction_hit = std::numeric_limits<double>::quiet_NaN();
    agg.speedup_hit = std::numeric_limits<double>::quiet_NaN();
  }
  for (const auto& [mode, sum] : align_sum)
    agg.mean_alignment[mode] = sum / static_cast<double>(agg.alignment_counts[mode]);
  return agg;
}

}  // namespace chorus::serving

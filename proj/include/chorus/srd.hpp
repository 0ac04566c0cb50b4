#pragma once

#include <cstdint>
#include <stdexcept>

#include "chorus/dit.hpp"
#include "chorus/masks.hpp"
#include "chorus/types.hpp"

namespace chorus::srd {

// One selective-region denoising step. Tokens where see = 1 are gathered
// and run through the full block stack (attention restricted to the
// gathered subsequence); the candidate update is fused with the cached
// source latent: cells with edit = 1 take the candidate, every other cell
// (including see-but-not-edit context tokens) takes the source value.
// source_next is the source trajectory's latent at step t+1, so purely
// reused regions replay the source evolution exactly.
template <class Scalar>
Latent<Scalar> srd_step(const Latent<Scalar>& x, const Latent<Scalar>& source_next,
                        const MaskSet& masks, const PromptEmbedding<Scalar>& prompt, int t,
                        double gamma_k, double gamma_o, const ModelConfig& cfg,
                        const dit::DiTWeights<Scalar>& weights) {
  if (t < 0 || t >= cfg.steps) throw std::out_of_range("denoise step index out of range");
  if (static_cast<int>(masks.see.size()) != cfg.num_tokens())
    throw std::invalid_argument("mask shape does not match the latent grid");

  const GatherMap gather = make_gather_map(masks.see);
  if (gather.count() == 0) return source_next;  // degenerate step: pure reuse

  const auto n = static_cast<Eigen::Index>(gather.count());
  MatX<Scalar> x_active(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    x_active.row(i) = x.row(gather.indices[static_cast<std::size_t>(i)]);

  const MatX<Scalar> h =
      dit::run_block_stack(x_active, prompt, gamma_k, gamma_o, cfg, weights, gather.row_of_cell);
  const MatX<Scalar> candidate =
      x_active + static_cast<Scalar>(cfg.eta(t)) * (h - x_active);

  Latent<Scalar> out = source_next;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int32_t cell = gather.indices[static_cast<std::size_t>(i)];
    if (masks.edit.bits[static_cast<std::size_t>(cell)]) out.row(cell) = candidate.row(i);
  }
  return out;
}

// MACs of the gathered step relative to the full step, aggregated over the
// stage-2 window (the Compute(%) metric for stage 2).
inline double stage2_mac_fraction(const MaskSet& masks, const ModelConfig& cfg,
                                  std::uint64_t prompt_len, int steps_in_stage2) {
  if (steps_in_stage2 <= 0) return 0.0;
  const std::uint64_t full =
      dit::mac_count(dit::MacKind::step, static_cast<std::uint64_t>(cfg.num_tokens()), prompt_len, cfg);
  const std::uint64_t sparse =
      dit::mac_count(dit::MacKind::step, masks.see.popcount(), prompt_len, cfg);
  const double total_full = static_cast<double>(full) * steps_in_stage2;
  const double total_sparse = static_cast<double>(sparse) * steps_in_stage2;
  return total_full > 0.0 ? total_sparse / total_full : 0.0;
}

}  // namespace chorus::srd

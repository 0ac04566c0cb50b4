#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chorus/rng.hpp"
#include "chorus/types.hpp"

namespace chorus::dit {

inline constexpr double kLayerNormEpsilon = 1e-6;
// Scale of the shared initial noise latent. Kept well below the unit-norm
// reference fields so a converged run is dominated by conditioning, not by
// the leftover noise floor.
inline constexpr double kInitNoiseScale = 0.1;
// Gain on the FFN output projection (entries ~ gain/sqrt(hidden)). The
// pointwise branch carries no prompt signal; its residual delta has to stay
// small relative to the cross-attention pull for generation to converge.
inline constexpr double kFfnOutputGain = 0.1;

template <class Scalar>
struct BlockWeights {
  MatX<Scalar> self_q, self_k, self_v, self_o;
  MatX<Scalar> cross_q, cross_k;
  MatX<Scalar> ffn_w1, ffn_w2;
  VecX<Scalar> ffn_b1, ffn_b2;
};

template <class Scalar>
struct DiTWeights {
  std::vector<BlockWeights<Scalar>> blocks;
};

// Deterministic function of weight_seed: every matrix gets its own derived
// stream, filled in row-major order. Attention projections are Gaussian
// scaled by 1/sqrt(d); the FFN output projection additionally carries
// kFfnOutputGain. Biases start at zero.
template <class Scalar>
DiTWeights<Scalar> init_weights(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.channels;
  const int hidden = cfg.ffn_hidden();
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double ffn_out_scale = kFfnOutputGain / std::sqrt(static_cast<double>(hidden));

  DiTWeights<Scalar> w;
  w.blocks.resize(static_cast<std::size_t>(cfg.blocks));
  for (int b = 0; b < cfg.blocks; ++b) {
    auto stream = [&](int tag) {
      return Rng(derive_seed(cfg.weight_seed, static_cast<std::uint64_t>(b) * 16 + tag));
    };
    auto& bw = w.blocks[static_cast<std::size_t>(b)];
    Rng r0 = stream(0);
    bw.self_q = gaussian_matrix<Scalar>(r0, d, d, attn_scale);
    Rng r1 = stream(1);
    bw.self_k = gaussian_matrix<Scalar>(r1, d, d, attn_scale);
    Rng r2 = stream(2);
    bw.self_v = gaussian_matrix<Scalar>(r2, d, d, attn_scale);
    Rng r3 = stream(3);
    bw.self_o = gaussian_matrix<Scalar>(r3, d, d, attn_scale);
    Rng r4 = stream(4);
    bw.cross_q = gaussian_matrix<Scalar>(r4, d, d, attn_scale);
    Rng r5 = stream(5);
    bw.cross_k = gaussian_matrix<Scalar>(r5, d, d, attn_scale);
    Rng r6 = stream(6);
    bw.ffn_w1 = gaussian_matrix<Scalar>(r6, d, hidden, attn_scale);
    Rng r7 = stream(7);
    bw.ffn_w2 = gaussian_matrix<Scalar>(r7, hidden, d, ffn_out_scale);
    bw.ffn_b1 = VecX<Scalar>::Zero(hidden);
    bw.ffn_b2 = VecX<Scalar>::Zero(d);
  }
  return w;
}

// Shared initial latent: identical for every request in a run so cached
// trajectories stay compatible across requests.
template <class Scalar>
Latent<Scalar> init_noise(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.noise_seed, 0x6e6f697365ULL));
  return gaussian_matrix<Scalar>(rng, cfg.num_tokens(), cfg.channels, kInitNoiseScale);
}

template <class Scalar>
void check_finite(const MatX<Scalar>& x) {
  if (!x.allFinite()) throw std::domain_error("non-finite latent");
}

// Per-token standardization (mean 0, variance 1 across channels).
template <class Scalar>
MatX<Scalar> layer_norm(const MatX<Scalar>& x) {
  const VecX<Scalar> mean = x.rowwise().mean();
  MatX<Scalar> centered = x;
  centered.array().colwise() -= mean.array();
  const VecX<Scalar> var = centered.array().square().rowwise().mean();
  const VecX<Scalar> denom =
      (var.array() + static_cast<Scalar>(kLayerNormEpsilon)).sqrt();
  centered.array().colwise() /= denom.array();
  return centered;
}

// Numerically stable row softmax; every row sums to 1 up to rounding.
template <class Scalar>
void softmax_rows(MatX<Scalar>& logits) {
  const VecX<Scalar> row_max = logits.rowwise().maxCoeff();
  logits.array().colwise() -= row_max.array();
  logits = logits.array().exp();
  const VecX<Scalar> row_sum = logits.rowwise().sum();
  logits.array().colwise() /= row_sum.array();
}

// Multi-head scaled dot-product attention over exactly the given token
// subsequence. Returns the projected attention result (the residual delta).
template <class Scalar>
MatX<Scalar> self_attention(const MatX<Scalar>& x, const BlockWeights<Scalar>& w, int heads) {
  check_finite(x);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const Scalar inv_sqrt_dh = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));

  const MatX<Scalar> q = x * w.self_q;
  const MatX<Scalar> k = x * w.self_k;
  const MatX<Scalar> v = x * w.self_v;
  MatX<Scalar> mixed(n, d);
  for (int h = 0; h < heads; ++h) {
    MatX<Scalar> logits =
        q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * inv_sqrt_dh;
    softmax_rows(logits);
    mixed.middleCols(h * dh, dh) = logits * v.middleCols(h * dh, dh);
  }
  return mixed * w.self_o;
}

// Single-head cross-attention from latent tokens to prompt tokens.
// Key rows at diff_indices are scaled by gamma_k before the logit product;
// (cell, token) pairs inside the token's region prior get a logit bias;
// values are the prompt paint vectors; the result is scaled by gamma_o.
// row_of_cell maps global latent cell index -> row of x (-1 if inactive).
template <class Scalar>
MatX<Scalar> cross_attention(const MatX<Scalar>& x, const PromptEmbedding<Scalar>& prompt,
                             double gamma_k, double gamma_o, double region_bias,
                             const BlockWeights<Scalar>& w,
                             const std::vector<std::int32_t>& row_of_cell) {
  check_finite(x);
  const Eigen::Index d = x.cols();
  const Scalar inv_sqrt_d = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(d)));

  const MatX<Scalar> q = x * w.cross_q;
  MatX<Scalar> k = prompt.tokens * w.cross_k;
  for (const std::int32_t j : prompt.diff_indices)
    k.row(j) *= static_cast<Scalar>(gamma_k);

  MatX<Scalar> logits = q * k.transpose() * inv_sqrt_d;
  if (region_bias != 0.0) {
    const Scalar bias = static_cast<Scalar>(region_bias);
    for (Eigen::Index j = 0; j < prompt.length(); ++j)
      for (const std::int32_t cell : prompt.region_of_token[static_cast<std::size_t>(j)]) {
        const std::int32_t row = row_of_cell[static_cast<std::size_t>(cell)];
        if (row >= 0) logits(row, j) += bias;
      }
  }
  softmax_rows(logits);
  return static_cast<Scalar>(gamma_o) * (logits * prompt.paints);
}

// Two-layer pointwise network with z*tanh(z) gating; no cross-token mixing.
template <class Scalar>
MatX<Scalar> ffn(const MatX<Scalar>& x, const BlockWeights<Scalar>& w) {
  check_finite(x);
  MatX<Scalar> h = (x * w.ffn_w1).rowwise() + w.ffn_b1.transpose();
  h = h.array() * h.array().tanh();
  return (h * w.ffn_w2).rowwise() + w.ffn_b2.transpose();
}

// The transformer block stack over an active token subsequence. Shared by
// the full denoise step (identity row_of_cell) and the gathered SRD step,
// so the two paths are numerically identical on a full mask.
template <class Scalar>
MatX<Scalar> run_block_stack(const MatX<Scalar>& x_active, const PromptEmbedding<Scalar>& prompt,
                             double gamma_k, double gamma_o, const ModelConfig& cfg,
                             const DiTWeights<Scalar>& weights,
                             const std::vector<std::int32_t>& row_of_cell) {
  MatX<Scalar> h = x_active;
  for (const auto& bw : weights.blocks) {
    h += self_attention(layer_norm(h), bw, cfg.heads);
    h += cross_attention(layer_norm(h), prompt, gamma_k, gamma_o, cfg.region_bias, bw,
                         row_of_cell);
    h += ffn(layer_norm(h), bw);
  }
  return h;
}

inline std::vector<std::int32_t> identity_cells(int total) {
  std::vector<std::int32_t> cells(static_cast<std::size_t>(total));
  std::iota(cells.begin(), cells.end(), 0);
  return cells;
}

// One full denoising step: x + eta_t * (h - x), where h is the block-stack
// output with residual sublayers.
template <class Scalar>
Latent<Scalar> denoise_step_full(const Latent<Scalar>& x, const PromptEmbedding<Scalar>& prompt,
                                 int t, double gamma_k, double gamma_o, const ModelConfig& cfg,
                                 const DiTWeights<Scalar>& weights) {
  if (t < 0 || t >= cfg.steps) throw std::out_of_range("denoise step index out of range");
  const std::vector<std::int32_t> all = identity_cells(cfg.num_tokens());
  const MatX<Scalar> h = run_block_stack(x, prompt, gamma_k, gamma_o, cfg, weights, all);
  return x + static_cast<Scalar>(cfg.eta(t)) * (h - x);
}

// N-step generation from the shared initial noise; records every
// intermediate latent (trajectory index t = 0..N). The optional schedule
// supplies per-step (gamma_k, gamma_o) pairs indexed by t; empty = neutral.
template <class Scalar>
Trajectory<Scalar> full_denoise(const PromptEmbedding<Scalar>& prompt, const ModelConfig& cfg,
                                const DiTWeights<Scalar>& weights,
                                const std::vector<std::pair<double, double>>& schedule = {}) {
  Trajectory<Scalar> traj;
  traj.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.push_back(init_noise<Scalar>(cfg));
  for (int t = 0; t < cfg.steps; ++t) {
    double gk = 1.0, go = 1.0;
    if (!schedule.empty()) {
      const auto& g = schedule.at(static_cast<std::size_t>(t));
      gk = g.first;
      go = g.second;
    }
    traj.push_back(denoise_step_full(traj.back(), prompt, t, gk, go, cfg, weights));
  }
  return traj;
}

enum class MacKind { self_attn, cross_attn, ffn, step, full_run };

// Exact multiply-accumulate model. n is the active token count, prompt_len
// the prompt length; an empty active set costs nothing for every kind.
inline std::uint64_t mac_count(MacKind kind, std::uint64_t n, std::uint64_t prompt_len,
                               const ModelConfig& cfg) {
  if (n == 0) return 0;
  const std::uint64_t d = static_cast<std::uint64_t>(cfg.channels);
  const std::uint64_t hidden = static_cast<std::uint64_t>(cfg.ffn_hidden());
  const std::uint64_t self_macs = 4 * n * d * d + 2 * n * n * d;
  const std::uint64_t cross_macs = 2 * n * d * d + 2 * prompt_len * d * d + 2 * n * prompt_len * d;
  const std::uint64_t ffn_macs = 2 * n * d * hidden;
  switch (kind) {
    case MacKind::self_attn: return self_macs;
    case MacKind::cross_attn: return cross_macs;
    case MacKind::ffn: return ffn_macs;
    case MacKind::step:
      return static_cast<std::uint64_t>(cfg.blocks) * (self_macs + cross_macs + ffn_macs);
    case MacKind::full_run:
      return static_cast<std::uint64_t>(cfg.steps) * static_cast<std::uint64_t>(cfg.blocks) *
             (self_macs + cross_macs + ffn_macs);
  }
  return 0;
}

}  // namespace chorus::dit

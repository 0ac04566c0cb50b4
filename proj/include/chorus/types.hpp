#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace chorus {

// Dense row-major storage so a latent's memory order is
// (frame, row, col, channel), matching the on-disk layout.
template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matf = MatX<float>;
using Matd = MatX<double>;
using Vecf = VecX<float>;
using Vecd = VecX<double>;

// The denoising state: one row per latent token (frame-major grid order),
// one column per channel.
template <class Scalar>
using Latent = MatX<Scalar>;

template <class Scalar>
using Trajectory = std::vector<Latent<Scalar>>;

struct ModelConfig {
  int frames = 4;
  int grid_h = 16;
  int grid_w = 16;
  int channels = 32;
  int heads = 4;
  int blocks = 2;
  int ffn_mult = 4;
  int steps = 4;
  double eta_max = 0.5;
  double eta_min = 0.1;
  double region_bias = 4.0;
  std::uint64_t weight_seed = 1;
  std::uint64_t noise_seed = 1001;

  int num_tokens() const { return frames * grid_h * grid_w; }
  int head_dim() const { return channels / heads; }
  int ffn_hidden() const { return ffn_mult * channels; }

  // Step size at step t: eta_min + (eta_max - eta_min) * (1 - t/N).
  double eta(int t) const {
    return eta_min + (eta_max - eta_min) * (1.0 - static_cast<double>(t) / steps);
  }

  void validate() const {
    if (frames < 1 || grid_h < 1 || grid_w < 1)
      throw std::invalid_argument("model: grid dimensions must be >= 1");
    if (channels < 1 || heads < 1 || channels % heads != 0)
      throw std::invalid_argument("model: channels must be divisible by heads");
    if (blocks < 1 || ffn_mult < 1)
      throw std::invalid_argument("model: blocks and ffn_mult must be >= 1");
    if (steps < 1) throw std::invalid_argument("model: steps must be >= 1");
    if (eta_min < 0.0 || eta_max < eta_min)
      throw std::invalid_argument("model: need eta_max >= eta_min >= 0");
  }
};

// Latent-grid index helpers (frame-major, then row, then col).
inline int cell_index(const ModelConfig& cfg, int frame, int row, int col) {
  return (frame * cfg.grid_h + row) * cfg.grid_w + col;
}

// Prompt-side conditioning handed to cross-attention: per-token key/query
// features, per-token paint vectors (the cross-attention values), the
// differential-token positions to amplify, and the region prior mapping
// each token to the latent cells it binds to (empty for non-object tokens).
template <class Scalar>
struct PromptEmbedding {
  MatX<Scalar> tokens;  // L' x d features
  MatX<Scalar> paints;  // L' x d value vectors
  std::vector<std::int32_t> diff_indices;
  std::vector<std::vector<std::int32_t>> region_of_token;

  Eigen::Index length() const { return tokens.rows(); }
};

}  // namespace chorus

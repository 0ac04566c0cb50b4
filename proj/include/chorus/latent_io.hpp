#pragma once

#include <iosfwd>
#include <string>

#include "chorus/types.hpp"

namespace chorus::io {

inline constexpr char kLatentMagic[4] = {'C', 'H', 'R', 'L'};
inline constexpr std::uint32_t kLatentVersion = 1;

struct LatentDims {
  std::uint32_t frames = 0, grid_h = 0, grid_w = 0, channels = 0;
};

// One record: magic "CHRL", version (u32 LE), frames/grid_h/grid_w/channels
// (u32 LE), then frames*grid_h*grid_w*channels IEEE-754 float32 LE values in
// (frame, row, col, channel) order.
void write_latent(std::ostream& out, const Matf& latent, const LatentDims& dims);
Matf read_latent(std::istream& in, LatentDims* dims_out = nullptr);

// A trajectory blob is a back-to-back sequence of latent records.
void write_trajectory(std::ostream& out, const Trajectory<float>& traj, const LatentDims& dims);
Trajectory<float> read_trajectory(std::istream& in, LatentDims* dims_out = nullptr);

void write_trajectory_file(const std::string& path, const Trajectory<float>& traj,
                           const LatentDims& dims);
Trajectory<float> read_trajectory_file(const std::string& path, LatentDims* dims_out = nullptr);

inline LatentDims dims_of(const ModelConfig& cfg) {
  return {static_cast<std::uint32_t>(cfg.frames), static_cast<std::uint32_t>(cfg.grid_h),
          static_cast<std::uint32_t>(cfg.grid_w), static_cast<std::uint32_t>(cfg.channels)};
}

}  // namespace chorus::io

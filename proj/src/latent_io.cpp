#include "chorus/latent_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace chorus::io {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw std::runtime_error("incompatible cache format");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

static_assert(sizeof(float) == 4);

}  // namespace

void write_latent(std::ostream& out, const Matf& latent, const LatentDims& dims) {
  const std::uint64_t cells =
      static_cast<std::uint64_t>(dims.frames) * dims.grid_h * dims.grid_w;
  if (static_cast<std::uint64_t>(latent.rows()) != cells ||
      static_cast<std::uint32_t>(latent.cols()) != dims.channels)
    throw std::invalid_argument("latent shape does not match the declared dimensions");

  out.write(kLatentMagic, 4);
  put_u32(out, kLatentVersion);
  put_u32(out, dims.frames);
  put_u32(out, dims.grid_h);
  put_u32(out, dims.grid_w);
  put_u32(out, dims.channels);
  // Row-major storage is already (frame, row, col, channel) order.
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(latent.data()),
              static_cast<std::streamsize>(latent.size() * sizeof(float)));
  } else {
    for (Eigen::Index i = 0; i < latent.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, latent.data() + i, 4);
      put_u32(out, bits);
    }
  }
  if (!out) throw std::runtime_error("failed writing latent record");
}

Matf read_latent(std::istream& in, LatentDims* dims_out) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kLatentMagic, 4) != 0)
    throw std::runtime_error("incompatible cache format");
  const std::uint32_t version = get_u32(in);
  if (version != kLatentVersion) throw std::runtime_error("incompatible cache format");

  LatentDims dims;
  dims.frames = get_u32(in);
  dims.grid_h = get_u32(in);
  dims.grid_w = get_u32(in);
  dims.channels = get_u32(in);
  const std::uint64_t cells =
      static_cast<std::uint64_t>(dims.frames) * dims.grid_h * dims.grid_w;
  if (cells == 0 || dims.channels == 0) throw std::runtime_error("incompatible cache format");

  Matf latent(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(dims.channels));
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(latent.data()),
            static_cast<std::streamsize>(latent.size() * sizeof(float)));
    if (!in) throw std::runtime_error("incompatible cache format");
  } else {
    for (Eigen::Index i = 0; i < latent.size(); ++i) {
      const std::uint32_t bits = get_u32(in);
      std::memcpy(latent.data() + i, &bits, 4);
    }
  }
  if (dims_out) *dims_out = dims;
  return latent;
}

void write_trajectory(std::ostream& out, const Trajectory<float>& traj, const LatentDims& dims) {
  for (const Matf& latent : traj) write_latent(out, latent, dims);
}

Trajectory<float> read_trajectory(std::istream& in, LatentDims* dims_out) {
  Trajectory<float> traj;
  while (true) {
    if (in.peek() == std::char_traits<char>::eof()) break;
    LatentDims dims;
    traj.push_back(read_latent(in, &dims));
    if (dims_out) *dims_out = dims;
  }
  if (traj.empty()) throw std::runtime_error("incompatible cache format");
  return traj;
}

void write_trajectory_file(const std::string& path, const Trajectory<float>& traj,
                           const LatentDims& dims) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open latent file for writing: " + path);
    write_trajectory(out, traj, dims);
  }
  std::filesystem::rename(tmp, path);
}

Trajectory<float> read_trajectory_file(const std::string& path, LatentDims* dims_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open latent file: " + path);
  return read_trajectory(in, dims_out);
}

}  // namespace chorus::io

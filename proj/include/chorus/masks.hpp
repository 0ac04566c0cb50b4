#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace chorus {

// Binary mask over a frames x rows x cols grid, one byte per cell.
// Used both in latent space (rows/cols = latent grid) and in pixel space
// (rows/cols = latent grid * pool factor).
struct BinaryMask {
  int frames = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;

  static BinaryMask zeros(int frames, int rows, int cols) {
    BinaryMask m;
    m.frames = frames;
    m.rows = rows;
    m.cols = cols;
    m.bits.assign(static_cast<std::size_t>(frames) * rows * cols, 0);
    return m;
  }
  static BinaryMask ones(int frames, int rows, int cols) {
    BinaryMask m = zeros(frames, rows, cols);
    std::fill(m.bits.begin(), m.bits.end(), std::uint8_t{1});
    return m;
  }

  std::size_t size() const { return bits.size(); }
  int index(int f, int r, int c) const { return (f * rows + r) * cols + c; }
  bool test(int f, int r, int c) const { return bits[index(f, r, c)] != 0; }
  void set(int f, int r, int c, bool v = true) { bits[index(f, r, c)] = v ? 1 : 0; }

  std::size_t popcount() const {
    return static_cast<std::size_t>(
        std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
  }
  std::size_t popcount(int frame) const {
    const auto begin = bits.begin() + static_cast<std::ptrdiff_t>(frame) * rows * cols;
    return static_cast<std::size_t>(
        std::count_if(begin, begin + rows * cols, [](std::uint8_t b) { return b != 0; }));
  }

  bool same_shape(const BinaryMask& o) const {
    return frames == o.frames && rows == o.rows && cols == o.cols;
  }
  // Bitwise containment: every set cell of this mask is set in `outer`.
  bool contained_in(const BinaryMask& outer) const {
    if (!same_shape(outer)) return false;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i] && !outer.bits[i]) return false;
    return true;
  }
  bool operator==(const BinaryMask& o) const {
    return same_shape(o) && bits == o.bits;
  }
};

// Key-frame strategy: frames are partitioned into consecutive groups of g
// and every frame in a group takes the mask of the group's first frame.
inline BinaryMask keyframe_propagate(const BinaryMask& mask, int group_size) {
  if (group_size < 1) throw std::invalid_argument("keyframe group size must be >= 1");
  BinaryMask out = mask;
  const int plane = mask.rows * mask.cols;
  for (int f = 0; f < mask.frames; ++f) {
    const int key = (f / group_size) * group_size;
    if (key == f) continue;
    std::copy(mask.bits.begin() + static_cast<std::ptrdiff_t>(key) * plane,
              mask.bits.begin() + static_cast<std::ptrdiff_t>(key + 1) * plane,
              out.bits.begin() + static_cast<std::ptrdiff_t>(f) * plane);
  }
  return out;
}

// Max-pool projection from pixel space to latent space: a latent cell is set
// iff any pixel in its p x p block is set.
inline BinaryMask project_to_latent(const BinaryMask& pixel_mask, int pool_factor) {
  if (pool_factor < 1) throw std::invalid_argument("pool factor must be >= 1");
  if (pixel_mask.rows % pool_factor != 0 || pixel_mask.cols % pool_factor != 0)
    throw std::invalid_argument("pixel mask dimensions are not a multiple of the pool factor");
  BinaryMask out = BinaryMask::zeros(pixel_mask.frames, pixel_mask.rows / pool_factor,
                                     pixel_mask.cols / pool_factor);
  for (int f = 0; f < pixel_mask.frames; ++f)
    for (int r = 0; r < pixel_mask.rows; ++r)
      for (int c = 0; c < pixel_mask.cols; ++c)
        if (pixel_mask.test(f, r, c)) out.set(f, r / pool_factor, c / pool_factor);
  return out;
}

// Morphological dilation with an all-ones (2r+1)^2 square kernel, applied
// per frame (spatial only), zero padded at the borders. Implemented as a
// separable two-pass max filter.
inline BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 0) throw std::invalid_argument("dilation radius must be >= 0");
  if (radius == 0) return mask;
  BinaryMask horiz = BinaryMask::zeros(mask.frames, mask.rows, mask.cols);
  for (int f = 0; f < mask.frames; ++f)
    for (int r = 0; r < mask.rows; ++r)
      for (int c = 0; c < mask.cols; ++c) {
        const int lo = std::max(0, c - radius);
        const int hi = std::min(mask.cols - 1, c + radius);
        for (int k = lo; k <= hi; ++k)
          if (mask.test(f, r, k)) {
            horiz.set(f, r, c);
            break;
          }
      }
  BinaryMask out = BinaryMask::zeros(mask.frames, mask.rows, mask.cols);
  for (int f = 0; f < mask.frames; ++f)
    for (int r = 0; r < mask.rows; ++r)
      for (int c = 0; c < mask.cols; ++c) {
        const int lo = std::max(0, r - radius);
        const int hi = std::min(mask.rows - 1, r + radius);
        for (int k = lo; k <= hi; ++k)
          if (horiz.test(f, k, c)) {
            out.set(f, r, c);
            break;
          }
      }
  return out;
}

// Hierarchical masks: edit = dilate(base, r), see = dilate(base, r').
// Invariant: see contains edit contains base.
struct MaskSet {
  BinaryMask base;
  BinaryMask edit;
  BinaryMask see;
  int r = 0;
  int r_prime = 0;
};

inline MaskSet build_mask_set(const BinaryMask& base, int r, int r_prime) {
  if (r_prime < r) throw std::invalid_argument("mask radii must satisfy r_prime >= r");
  MaskSet set;
  set.base = base;
  set.edit = dilate(base, r);
  set.see = dilate(base, r_prime);
  set.r = r;
  set.r_prime = r_prime;
  if (!set.base.contained_in(set.edit) || !set.edit.contained_in(set.see))
    throw std::logic_error("mask containment hierarchy violated");
  return set;
}

// Ordered latent-token indices where see = 1, plus the inverse lookup
// (-1 for cells outside the gather set).
struct GatherMap {
  std::vector<std::int32_t> indices;
  std::vector<std::int32_t> row_of_cell;

  std::size_t count() const { return indices.size(); }
};

inline GatherMap make_gather_map(const BinaryMask& see) {
  GatherMap map;
  map.row_of_cell.assign(see.size(), -1);
  map.indices.reserve(see.popcount());
  for (std::size_t i = 0; i < see.size(); ++i)
    if (see.bits[i]) {
      map.row_of_cell[i] = static_cast<std::int32_t>(map.indices.size());
      map.indices.push_back(static_cast<std::int32_t>(i));
    }
  return map;
}

// Per-frame text rendering ('.'/'#') with popcounts, for the mask debug dump.
inline std::string render_mask(const BinaryMask& mask) {
  std::string out;
  for (int f = 0; f < mask.frames; ++f) {
    out += "frame " + std::to_string(f) + " (popcount " +
           std::to_string(mask.popcount(f)) + ")\n";
    for (int r = 0; r < mask.rows; ++r) {
      for (int c = 0; c < mask.cols; ++c) out += mask.test(f, r, c) ? '#' : '.';
      out += '\n';
    }
  }
  return out;
}

}  // namespace chorus

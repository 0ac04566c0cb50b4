#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chorus/masks.hpp"
#include "chorus/rng.hpp"
#include "chorus/types.hpp"

namespace chorus::world {

inline constexpr int kEmbedDim = 64;
inline constexpr int kMaxPromptTokens = 16;

// Token ids encode their class: backgrounds 0xx, objects 1xx,
// attributes 2xx, verbs 3xx.
enum class TokenClass { background = 0, object = 1, attribute = 2, verb = 3 };

inline TokenClass token_class(std::int32_t id) {
  return static_cast<TokenClass>(id / 100);
}

struct Vocabulary {
  std::vector<std::int32_t> backgrounds;
  std::vector<std::int32_t> objects;
  std::vector<std::int32_t> attributes;
  std::vector<std::int32_t> verbs;

  const std::vector<std::int32_t>& of_class(TokenClass c) const {
    switch (c) {
      case TokenClass::background: return backgrounds;
      case TokenClass::object: return objects;
      case TokenClass::attribute: return attributes;
      case TokenClass::verb: return verbs;
    }
    throw std::logic_error("bad token class");
  }
};

const Vocabulary& vocab();
const char* token_name(std::int32_t id);
const char* token_class_name(std::int32_t id);

using PromptTokens = std::vector<std::int32_t>;

// One placed object: its tokens plus a frame-shared rectangle that drifts
// by (motion_row, motion_col) cells per frame, clipped to the grid.
struct SceneObject {
  std::int32_t object = 0;
  std::int32_t attribute = 0;
  std::int32_t verb = 0;
  int rect_row = 0, rect_col = 0, rect_h = 1, rect_w = 1;
  int motion_row = 0, motion_col = 0;
};

struct Scene {
  std::int32_t background = 0;
  std::vector<SceneObject> objects;
};

// Effective rectangle of an object in a given frame (may be empty after
// clipping). Returns {row0, col0, row1, col1} half-open.
struct FrameRect {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  bool empty() const { return row0 >= row1 || col0 >= col1; }
};

inline FrameRect object_frame_rect(const SceneObject& obj, int frame, int grid_h, int grid_w) {
  FrameRect r;
  const int base_r = obj.rect_row + frame * obj.motion_row;
  const int base_c = obj.rect_col + frame * obj.motion_col;
  r.row0 = std::max(0, base_r);
  r.col0 = std::max(0, base_c);
  r.row1 = std::min(grid_h, base_r + obj.rect_h);
  r.col1 = std::min(grid_w, base_c + obj.rect_w);
  return r;
}

// Latent-space mask of one object's per-frame effective regions.
BinaryMask object_region_mask(const SceneObject& obj, const ModelConfig& cfg);

// Canonical token sequence: [background, then per object: attribute,
// object, verb].
PromptTokens build_prompt(const Scene& scene);

struct DiffReport {
  enum class SlotChange { unchanged, attribute_changed, object_changed };
  struct Divergent {
    int slot = 0;
    std::int32_t source_attribute = 0;
    std::int32_t source_object = 0;
  };
  std::vector<std::int32_t> diff_indices;   // positions differing in the target
  std::vector<Divergent> divergent_objects; // source-side phrase per changed slot
  std::vector<SlotChange> slot_changes;

  bool empty() const { return diff_indices.empty(); }
};

// Positional comparison over the canonical template. Throws
// "incomparable prompts" when the prompts do not share the template.
DiffReport token_diff(const PromptTokens& target, const PromptTokens& source);

// Pixel-space base masks: union of the divergent objects' per-frame
// regions of the source scene, at latent resolution times pool_factor.
BinaryMask region_oracle(const Scene& source_scene,
                         const std::vector<DiffReport::Divergent>& divergent,
                         const ModelConfig& cfg, int pool_factor);

// Deterministic per-token vectors. Values are drawn in double precision and
// narrowed, so float and double instantiations agree.
Vecd token_hash_vector(std::int32_t id);                 // unit, kEmbedDim
Vecd token_paint_vector_d(std::int32_t id, int dims);    // unit, d
Vecd token_feature_vector_d(std::int32_t id, int dims);  // unit-scale entries, d

template <class Scalar>
VecX<Scalar> token_paint(std::int32_t id, int dims) {
  return token_paint_vector_d(id, dims).cast<Scalar>();
}
template <class Scalar>
VecX<Scalar> token_feature(std::int32_t id, int dims) {
  return token_feature_vector_d(id, dims).cast<Scalar>();
}

// L2-normalized sum of per-token hash vectors.
Vecd embed_prompt(const PromptTokens& tokens);

// Prompt conditioning for the denoiser: token features as keys/queries,
// paint vectors as values, region prior binding each object's attribute and
// object tokens to the object's cells (background and verb tokens bind to
// nothing).
template <class Scalar>
PromptEmbedding<Scalar> make_prompt_embedding(const Scene& scene, const ModelConfig& cfg,
                                              std::vector<std::int32_t> diff_indices = {}) {
  const PromptTokens tokens = build_prompt(scene);
  const int d = cfg.channels;
  PromptEmbedding<Scalar> prompt;
  prompt.tokens.resize(static_cast<Eigen::Index>(tokens.size()), d);
  prompt.paints.resize(static_cast<Eigen::Index>(tokens.size()), d);
  prompt.region_of_token.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    prompt.tokens.row(static_cast<Eigen::Index>(i)) = token_feature<Scalar>(tokens[i], d).transpose();
    prompt.paints.row(static_cast<Eigen::Index>(i)) = token_paint<Scalar>(tokens[i], d).transpose();
  }
  for (std::size_t slot = 0; slot < scene.objects.size(); ++slot) {
    const BinaryMask region = object_region_mask(scene.objects[slot], cfg);
    std::vector<std::int32_t> cells;
    cells.reserve(region.popcount());
    for (std::size_t i = 0; i < region.size(); ++i)
      if (region.bits[i]) cells.push_back(static_cast<std::int32_t>(i));
    prompt.region_of_token[1 + 3 * slot] = cells;  // attribute
    prompt.region_of_token[2 + 3 * slot] = cells;  // object
  }
  prompt.diff_indices = std::move(diff_indices);
  return prompt;
}

// Analytic reference field V(prompt): background paint outside all object
// regions; inside an object's per-frame region, the normalized sum of the
// object and attribute paints. Overlaps: later object in the list wins.
template <class Scalar>
Latent<Scalar> render_reference(const Scene& scene, const ModelConfig& cfg) {
  const int d = cfg.channels;
  const Vecd bg = token_paint_vector_d(scene.background, d);
  Matd field = bg.transpose().replicate(cfg.num_tokens(), 1);
  for (const SceneObject& obj : scene.objects) {
    Vecd paint = token_paint_vector_d(obj.object, d) + token_paint_vector_d(obj.attribute, d);
    const double norm = paint.norm();
    if (norm > 0.0) paint /= norm;
    for (int f = 0; f < cfg.frames; ++f) {
      const FrameRect r = object_frame_rect(obj, f, cfg.grid_h, cfg.grid_w);
      for (int row = r.row0; row < r.row1; ++row)
        for (int col = r.col0; col < r.col1; ++col)
          field.row(cell_index(cfg, f, row, col)) = paint.transpose();
    }
  }
  return field.cast<Scalar>();
}

// Latent-space union of the divergent slots' regions in both scenes
// (symmetric under swapping target and source).
BinaryMask divergent_region_mask(const Scene& target_scene, const Scene& source_scene,
                                 const DiffReport& diff, const ModelConfig& cfg);

struct AlignmentScore {
  double d_target = 0.0;
  double d_source = 0.0;
  double normalized = 0.0;  // (d_source - d_target) / (d_source + d_target)
};

// Distance-based semantic proxy: mean squared distance from x to the two
// scenes' reference fields over the evaluation region. Positive normalized
// means closer to the target semantics.
template <class Scalar>
AlignmentScore alignment_score(const Latent<Scalar>& x, const Scene& target_scene,
                               const Scene& source_scene, const ModelConfig& cfg,
                               const BinaryMask* region = nullptr) {
  BinaryMask fallback;
  if (region == nullptr) {
    const DiffReport diff =
        token_diff(build_prompt(target_scene), build_prompt(source_scene));
    fallback = divergent_region_mask(target_scene, source_scene, diff, cfg);
    region = &fallback;
  }
  if (region->popcount() == 0) throw std::runtime_error("empty evaluation region");

  const Matd xd = x.template cast<double>();
  const Matd ref_t = render_reference<double>(target_scene, cfg);
  const Matd ref_s = render_reference<double>(source_scene, cfg);
  double sum_t = 0.0, sum_s = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < region->size(); ++i) {
    if (!region->bits[i]) continue;
    const auto row = static_cast<Eigen::Index>(i);
    sum_t += (xd.row(row) - ref_t.row(row)).squaredNorm();
    sum_s += (xd.row(row) - ref_s.row(row)).squaredNorm();
    ++cells;
  }
  AlignmentScore score;
  const double denom = static_cast<double>(cells) * cfg.channels;
  score.d_target = sum_t / denom;
  score.d_source = sum_s / denom;
  const double total = score.d_target + score.d_source;
  score.normalized = total > 0.0 ? (score.d_source - score.d_target) / total : 0.0;
  return score;
}

struct WorkloadParams {
  int clusters = 10;
  int prompts_per_cluster = 20;
  int objects_per_scene = 2;
  double p_object = 0.10;
  double p_attribute = 0.35;
  double p_background = 0.05;
  double p_verb = 0.15;
  std::uint64_t stream_seed = 42;
  int warm_start = 100;

  void validate() const;
};

struct WorkloadEntry {
  int index = 0;
  bool warm = false;
  int cluster = 0;
  Scene scene;
};

// Clustered synthetic workload: one base scene per cluster plus token
// substitutions with the configured probabilities; the stream interleaves
// clusters with a seeded shuffle and marks the first warm_start entries.
std::vector<WorkloadEntry> gen_workload(const WorkloadParams& params, int grid_h, int grid_w);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& json_text);

void write_workload(const std::string& path, const std::vector<WorkloadEntry>& entries);
std::vector<WorkloadEntry> read_workload(const std::string& path);
void write_vocabulary(const std::string& path);

}  // namespace chorus::world

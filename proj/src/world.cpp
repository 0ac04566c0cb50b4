#include "chorus/world.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace chorus::world {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kHashSalt = 0x68617368ULL;
constexpr std::uint64_t kPaintSalt = 0x7061696e74ULL;
constexpr std::uint64_t kFeatureSalt = 0x66656174ULL;

struct NamedToken {
  std::int32_t id;
  const char* name;
};

const NamedToken kBackgrounds[] = {
    {0, "meadow"},   {1, "beach"},  {2, "forest"}, {3, "city_street"},
    {4, "desert"},   {5, "snowfield"}, {6, "studio"}, {7, "harbor"},
};
const NamedToken kObjects[] = {
    {100, "dog"},    {101, "cat"},   {102, "fox"},    {103, "horse"},
    {104, "parrot"}, {105, "car"},   {106, "robot"},  {107, "dancer"},
    {108, "dragon"}, {109, "sailboat"},
};
const NamedToken kAttributes[] = {
    {200, "spotted"}, {201, "wild"},  {202, "striped"}, {203, "golden"},
    {204, "silver"},  {205, "fluffy"}, {206, "sleek"},   {207, "giant"},
    {208, "tiny"},    {209, "crimson"}, {210, "pale"},    {211, "glowing"},
};
const NamedToken kVerbs[] = {
    {300, "running"},  {301, "sleeping"}, {302, "jumping"},  {303, "spinning"},
    {304, "flying"},   {305, "swimming"}, {306, "walking"},  {307, "bowing"},
    {308, "chasing"},  {309, "drifting"},
};

Vocabulary build_vocab() {
  Vocabulary v;
  for (const auto& t : kBackgrounds) v.backgrounds.push_back(t.id);
  for (const auto& t : kObjects) v.objects.push_back(t.id);
  for (const auto& t : kAttributes) v.attributes.push_back(t.id);
  for (const auto& t : kVerbs) v.verbs.push_back(t.id);
  return v;
}

const std::map<std::int32_t, const char*>& name_table() {
  static const std::map<std::int32_t, const char*> table = [] {
    std::map<std::int32_t, const char*> m;
    for (const auto& t : kBackgrounds) m[t.id] = t.name;
    for (const auto& t : kObjects) m[t.id] = t.name;
    for (const auto& t : kAttributes) m[t.id] = t.name;
    for (const auto& t : kVerbs) m[t.id] = t.name;
    return m;
  }();
  return table;
}

void check_template(const PromptTokens& p) {
  if (p.empty() || (p.size() - 1) % 3 != 0 || p.size() > kMaxPromptTokens)
    throw std::invalid_argument("incomparable prompts");
  if (token_class(p[0]) != TokenClass::background)
    throw std::invalid_argument("incomparable prompts");
  for (std::size_t slot = 0; slot * 3 + 1 < p.size(); ++slot) {
    if (token_class(p[1 + 3 * slot]) != TokenClass::attribute ||
        token_class(p[2 + 3 * slot]) != TokenClass::object ||
        token_class(p[3 + 3 * slot]) != TokenClass::verb)
      throw std::invalid_argument("incomparable prompts");
  }
}

// Substitute within the class, always to a different token.
std::int32_t substitute_token(std::int32_t current, const std::vector<std::int32_t>& pool,
                              Rng& rng) {
  if (pool.size() < 2) return current;
  std::int32_t pick = current;
  while (pick == current)
    pick = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
  return pick;
}

json scene_json(const Scene& scene) {
  json objs = json::array();
  for (const SceneObject& o : scene.objects) {
    objs.push_back({{"object", o.object},
                    {"attribute", o.attribute},
                    {"verb", o.verb},
                    {"rect", {o.rect_row, o.rect_col, o.rect_h, o.rect_w}},
                    {"motion", {o.motion_row, o.motion_col}}});
  }
  return json{{"background", scene.background}, {"objects", objs}};
}

Scene scene_from(const json& j) {
  Scene s;
  s.background = j.at("background").get<std::int32_t>();
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.object = o.at("object").get<std::int32_t>();
    obj.attribute = o.at("attribute").get<std::int32_t>();
    obj.verb = o.at("verb").get<std::int32_t>();
    const auto& rect = o.at("rect");
    obj.rect_row = rect.at(0).get<int>();
    obj.rect_col = rect.at(1).get<int>();
    obj.rect_h = rect.at(2).get<int>();
    obj.rect_w = rect.at(3).get<int>();
    const auto& motion = o.at("motion");
    obj.motion_row = motion.at(0).get<int>();
    obj.motion_col = motion.at(1).get<int>();
    s.objects.push_back(obj);
  }
  return s;
}

}  // namespace

const Vocabulary& vocab() {
  static const Vocabulary v = build_vocab();
  return v;
}

const char* token_name(std::int32_t id) {
  const auto& table = name_table();
  const auto it = table.find(id);
  return it == table.end() ? "?" : it->second;
}

const char* token_class_name(std::int32_t id) {
  switch (token_class(id)) {
    case TokenClass::background: return "background";
    case TokenClass::object: return "object";
    case TokenClass::attribute: return "attribute";
    case TokenClass::verb: return "verb";
  }
  return "?";
}

BinaryMask object_region_mask(const SceneObject& obj, const ModelConfig& cfg) {
  BinaryMask mask = BinaryMask::zeros(cfg.frames, cfg.grid_h, cfg.grid_w);
  for (int f = 0; f < cfg.frames; ++f) {
    const FrameRect r = object_frame_rect(obj, f, cfg.grid_h, cfg.grid_w);
    for (int row = r.row0; row < r.row1; ++row)
      for (int col = r.col0; col < r.col1; ++col) mask.set(f, row, col);
  }
  return mask;
}

PromptTokens build_prompt(const Scene& scene) {
  if (1 + 3 * scene.objects.size() > kMaxPromptTokens)
    throw std::invalid_argument("scene has too many objects for the prompt template");
  PromptTokens tokens;
  tokens.push_back(scene.background);
  for (const SceneObject& o : scene.objects) {
    tokens.push_back(o.attribute);
    tokens.push_back(o.object);
    tokens.push_back(o.verb);
  }
  return tokens;
}

DiffReport token_diff(const PromptTokens& target, const PromptTokens& source) {
  check_template(target);
  check_template(source);
  if (target.size() != source.size()) throw std::invalid_argument("incomparable prompts");

  DiffReport report;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] != source[i]) report.diff_indices.push_back(static_cast<std::int32_t>(i));

  const std::size_t slots = (target.size() - 1) / 3;
  report.slot_changes.assign(slots, DiffReport::SlotChange::unchanged);
  for (std::size_t slot = 0; slot < slots; ++slot) {
    const std::size_t a = 1 + 3 * slot, o = 2 + 3 * slot;
    DiffReport::SlotChange change = DiffReport::SlotChange::unchanged;
    if (target[o] != source[o])
      change = DiffReport::SlotChange::object_changed;
    else if (target[a] != source[a])
      change = DiffReport::SlotChange::attribute_changed;
    report.slot_changes[slot] = change;
    if (change != DiffReport::SlotChange::unchanged)
      report.divergent_objects.push_back(
          {static_cast<int>(slot), source[a], source[o]});
  }
  return report;
}

BinaryMask region_oracle(const Scene& source_scene,
                         const std::vector<DiffReport::Divergent>& divergent,
                         const ModelConfig& cfg, int pool_factor) {
  BinaryMask mask =
      BinaryMask::zeros(cfg.frames, cfg.grid_h * pool_factor, cfg.grid_w * pool_factor);
  for (const auto& div : divergent) {
    const SceneObject& obj = source_scene.objects.at(static_cast<std::size_t>(div.slot));
    for (int f = 0; f < cfg.frames; ++f) {
      const FrameRect r = object_frame_rect(obj, f, cfg.grid_h, cfg.grid_w);
      for (int row = r.row0 * pool_factor; row < r.row1 * pool_factor; ++row)
        for (int col = r.col0 * pool_factor; col < r.col1 * pool_factor; ++col)
          mask.set(f, row, col);
    }
  }
  return mask;
}

Vecd token_hash_vector(std::int32_t id) {
  Rng rng(derive_seed(kHashSalt, static_cast<std::uint64_t>(id)));
  Vecd v = gaussian_vector<double>(rng, kEmbedDim);
  v /= v.norm();
  return v;
}

Vecd token_paint_vector_d(std::int32_t id, int dims) {
  Rng rng(derive_seed(kPaintSalt, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(dims)));
  Vecd v = gaussian_vector<double>(rng, dims);
  v /= v.norm();
  return v;
}

Vecd token_feature_vector_d(std::int32_t id, int dims) {
  Rng rng(derive_seed(kFeatureSalt, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(dims)));
  return gaussian_vector<double>(rng, dims);
}

Vecd embed_prompt(const PromptTokens& tokens) {
  if (tokens.empty()) throw std::invalid_argument("empty prompt");
  Vecd sum = Vecd::Zero(kEmbedDim);
  for (const std::int32_t id : tokens) sum += token_hash_vector(id);
  const double norm = sum.norm();
  if (norm > 0.0) sum /= norm;
  return sum;
}

BinaryMask divergent_region_mask(const Scene& target_scene, const Scene& source_scene,
                                 const DiffReport& diff, const ModelConfig& cfg) {
  BinaryMask mask = BinaryMask::zeros(cfg.frames, cfg.grid_h, cfg.grid_w);
  for (const auto& div : diff.divergent_objects) {
    for (const Scene* scene : {&target_scene, &source_scene}) {
      if (static_cast<std::size_t>(div.slot) >= scene->objects.size()) continue;
      const BinaryMask region = object_region_mask(scene->objects[div.slot], cfg);
      for (std::size_t i = 0; i < region.size(); ++i)
        if (region.bits[i]) mask.bits[i] = 1;
    }
  }
  return mask;
}

void WorkloadParams::validate() const {
  if (clusters < 1 || prompts_per_cluster < 1)
    throw std::invalid_argument("workload: clusters and prompts_per_cluster must be >= 1");
  if (objects_per_scene < 1 || 1 + 3 * objects_per_scene > kMaxPromptTokens)
    throw std::invalid_argument("workload: objects_per_scene out of range");
  for (const double p : {p_object, p_attribute, p_background, p_verb})
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("workload: substitution probabilities must be in [0, 1]");
  if (warm_start < 0 || warm_start > clusters * prompts_per_cluster)
    throw std::invalid_argument("workload: warm_start exceeds the workload size");
}

std::vector<WorkloadEntry> gen_workload(const WorkloadParams& params, int grid_h, int grid_w) {
  params.validate();
  const Vocabulary& v = vocab();

  std::vector<WorkloadEntry> entries;
  entries.reserve(static_cast<std::size_t>(params.clusters) * params.prompts_per_cluster);
  for (int c = 0; c < params.clusters; ++c) {
    Rng rng(derive_seed(params.stream_seed, static_cast<std::uint64_t>(c), 0xba5eULL));
    Scene base;
    base.background =
        v.backgrounds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.backgrounds.size()) - 1))];
    for (int k = 0; k < params.objects_per_scene; ++k) {
      SceneObject obj;
      obj.object =
          v.objects[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.objects.size()) - 1))];
      obj.attribute =
          v.attributes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.attributes.size()) - 1))];
      obj.verb = v.verbs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.verbs.size()) - 1))];
      obj.rect_h = rng.uniform_int(2, std::max(2, grid_h / 3));
      obj.rect_w = rng.uniform_int(2, std::max(2, grid_w / 3));
      obj.rect_row = rng.uniform_int(0, grid_h - obj.rect_h);
      obj.rect_col = rng.uniform_int(0, grid_w - obj.rect_w);
      obj.motion_row = rng.uniform_int(-1, 1);
      obj.motion_col = rng.uniform_int(-1, 1);
      base.objects.push_back(obj);
    }

    for (int p = 0; p < params.prompts_per_cluster; ++p) {
      Scene scene = base;
      if (p > 0) {
        if (rng.bernoulli(params.p_background))
          scene.background = substitute_token(scene.background, v.backgrounds, rng);
        for (SceneObject& obj : scene.objects) {
          if (rng.bernoulli(params.p_object))
            obj.object = substitute_token(obj.object, v.objects, rng);
          if (rng.bernoulli(params.p_attribute))
            obj.attribute = substitute_token(obj.attribute, v.attributes, rng);
          if (rng.bernoulli(params.p_verb))
            obj.verb = substitute_token(obj.verb, v.verbs, rng);
        }
      }
      WorkloadEntry entry;
      entry.cluster = c;
      entry.scene = scene;
      entries.push_back(std::move(entry));
    }
  }

  // Seeded Fisher-Yates interleave across clusters.
  Rng shuffle_rng(derive_seed(params.stream_seed, 0x5487ff1eULL));
  for (std::size_t i = entries.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(entries[i - 1], entries[j]);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].index = static_cast<int>(i);
    entries[i].warm = static_cast<int>(i) < params.warm_start;
  }
  return entries;
}

std::string scene_to_json(const Scene& scene) { return scene_json(scene).dump(); }

Scene scene_from_json(const std::string& json_text) {
  return scene_from(json::parse(json_text));
}

void write_workload(const std::string& path, const std::vector<WorkloadEntry>& entries) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open workload file for writing: " + path);
    for (const WorkloadEntry& e : entries) {
      json j{{"index", e.index},
             {"section", e.warm ? "warm" : "test"},
             {"cluster", e.cluster},
             {"scene", scene_json(e.scene)}};
      out << j.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<WorkloadEntry> read_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open workload file: " + path);
  std::vector<WorkloadEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      WorkloadEntry e;
      e.index = j.at("index").get<int>();
      e.warm = j.at("section").get<std::string>() == "warm";
      e.cluster = j.at("cluster").get<int>();
      e.scene = scene_from(json::parse(j.at("scene").get<std::string>()));
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw std::runtime_error("malformed workload record at line " + std::to_string(line_no) +
                               ": " + ex.what());
    }
  }
  return entries;
}

void write_vocabulary(const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open vocabulary file for writing: " + path);
    const Vocabulary& v = vocab();
    for (const auto* list : {&v.backgrounds, &v.objects, &v.attributes, &v.verbs})
      for (const std::int32_t id : *list) {
        json j{{"id", id}, {"class", token_class_name(id)}, {"name", token_name(id)}};
        out << j.dump() << '\n';
      }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace chorus::world

#include "mkg/storyboard.hpp"

#include <fstream>

namespace mkg::storyboard {

std::size_t first_path(const std::vector<CognitivePath>&) { return 0; }

Templates templates_from_json(const nlohmann::json& j) {
  Templates t;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "storyboard templates must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    auto kind = parse_entity_kind(key);
    if (!kind || *kind == EntityKind::User || *kind == EntityKind::Image)
      throw Error(ErrorCode::ParseError, "no storyboard template slot for '" + key + "'");
    if (!val.is_string() || val.get<std::string>().empty())
      throw Error(ErrorCode::ParseError, "template for " + key + " must be a non-empty string");
    t.by_kind[*kind] = val.get<std::string>();
  }
  return t;
}

Templates read_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return templates_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

Storyboard generate_storyboard(const KnowledgeGraph& kg, std::string_view item_id, const PathSelector& selector,
                               const Templates& templates) {
  const Entity* item = kg.find(item_id);
  if (!item || item->kind != EntityKind::Item)
    throw Error(ErrorCode::UnknownItem, "no item '" + std::string(item_id) + "'");
  const auto paths = kg.cognitive_paths(item_id);
  if (paths.empty()) throw Error(ErrorCode::NoPath, "item '" + std::string(item_id) + "' has no cognitive path");
  const std::size_t pick = selector(paths);
  if (pick >= paths.size()) throw Error(ErrorCode::InvalidConfig, "path selector returned an out-of-range index");
  const CognitivePath& path = paths[pick];

  static constexpr EntityKind kOrder[5] = {EntityKind::Scenario, EntityKind::Problem, EntityKind::POI,
                                           EntityKind::PropertyValue, EntityKind::Item};
  static constexpr const char* kSlots[5] = {"{scenario}", "{problem}", "{poi}", "{property_value}", "{item}"};
  std::string labels[5];
  for (std::size_t i = 0; i < 5; ++i) labels[i] = kg.at(path[i]).label;

  Storyboard out;
  out.item = item->id;
  for (std::size_t i = 0; i < 5; ++i) {
    Frame f;
    f.node = path[i];
    f.kind = kOrder[i];
    f.utterance = templates.by_kind.at(kOrder[i]);
    for (std::size_t s = 0; s < 5; ++s) {
      const std::string slot = kSlots[s];
      for (auto pos = f.utterance.find(slot); pos != std::string::npos;
           pos = f.utterance.find(slot, pos + labels[s].size()))
        f.utterance.replace(pos, slot.size(), labels[s]);
    }
    for (const auto& nb : kg.neighbors(path[i], RelationKind::has_image, Direction::out))
      f.images.push_back(nb.entity->id);
    out.frames.push_back(std::move(f));
  }
  return out;
}

nlohmann::json to_json(const Storyboard& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames)
    frames.push_back(
        {{"node", f.node}, {"kind", std::string(to_string(f.kind))}, {"utterance", f.utterance}, {"images", f.images}});
  return {{"item", s.item}, {"frames", frames}};
}

}  // namespace mkg::storyboard

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mkg/kg.hpp"

namespace mkg::storyboard {

struct Frame {
  std::string node;
  EntityKind kind = EntityKind::Scenario;
  std::string utterance;
  std::vector<std::string> images;

  bool operator==(const Frame&) const = default;
};

struct Storyboard {
  std::string item;
  std::vector<Frame> frames;  // Scenario, Problem, POI, PropertyValue, Item
};

// Per-kind utterance templates. Placeholders {scenario}, {problem}, {poi},
// {property_value} and {item} are replaced by the labels of the path nodes.
struct Templates {
  std::map<EntityKind, std::string> by_kind = {
      {EntityKind::Scenario, "{scenario}容易导致{problem}。"},
      {EntityKind::Problem, "{problem}的时候，你需要的是{poi}。"},
      {EntityKind::POI, "想要{poi}，可以试试{property_value}。"},
      {EntityKind::PropertyValue, "{property_value}能帮你实现{poi}。"},
      {EntityKind::Item, "推荐这款含有{property_value}的{item}。"},
  };
};

// Keys are entity kind names ("Scenario", ...); missing kinds keep defaults.
Templates read_templates(const std::filesystem::path& path);
Templates templates_from_json(const nlohmann::json& j);

// Picks one path out of a non-empty list (in cognitive_paths order).
using PathSelector = std::function<std::size_t(const std::vector<CognitivePath>&)>;

std::size_t first_path(const std::vector<CognitivePath>& paths);

// Throws UnknownItem for a missing item and NoPath when the item has no
// complete Scenario-Problem-POI-PropertyValue-Item chain.
Storyboard generate_storyboard(const KnowledgeGraph& kg, std::string_view item_id,
                               const PathSelector& selector = first_path, const Templates& templates = {});

nlohmann::json to_json(const Storyboard& s);

}  // namespace mkg::storyboard

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mkg/error.hpp"

namespace mkg {

enum class EntityKind { User, Item, Scenario, Problem, POI, PropertyValue, Image };
inline constexpr std::size_t kEntityKindCount = 7;

enum class RelationKind { cause, need, satisfy, has_property, has_image, has_problem, has_poi, prefer };
inline constexpr std::size_t kRelationKindCount = 8;

enum class Provenance { asserted, derived };

std::string_view to_string(EntityKind k);
std::string_view to_string(RelationKind r);
std::string_view to_string(Provenance p);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
std::optional<RelationKind> parse_relation_kind(std::string_view s);
std::optional<Provenance> parse_provenance(std::string_view s);

// True when (source, target) is an allowed endpoint pair for the relation.
bool signature_allows(RelationKind r, EntityKind source, EntityKind target);

// Only has_poi and prefer may be produced by completion.
bool derivable(RelationKind r);

// Attribute key that locates the raster file of an Image entity.
inline constexpr std::string_view kImagePathAttr = "path";

struct Entity {
  std::string id;
  EntityKind kind = EntityKind::Item;
  std::string label;
  std::vector<std::string> aliases;
  std::map<std::string, std::string> attributes;

  bool operator==(const Entity&) const = default;
};

struct Triple {
  std::string source;
  RelationKind relation = RelationKind::cause;
  std::string target;
  std::optional<std::string> qualifier;
  Provenance provenance = Provenance::asserted;

  bool operator==(const Triple&) const = default;
};

enum class Direction { out, in };

enum class InsertResult { Inserted, AlreadyPresent };

struct Neighbor {
  const Triple* triple;
  const Entity* entity;  // far end
};

// Scenario, Problem, POI, PropertyValue, Item.
using CognitivePath = std::array<std::string, 5>;

struct GraphStats {
  std::array<std::size_t, kEntityKindCount> entities{};
  std::array<std::size_t, kRelationKindCount> asserted{};
  std::array<std::size_t, kRelationKindCount> derived{};

  std::size_t entity_total() const;
  std::size_t triple_total() const;
};

// Ontology-typed triple store. Not internally synchronized; see GraphStore
// for the shared-snapshot wrapper used by concurrent readers.
class KnowledgeGraph {
 public:
  const std::string& add_entity(Entity e);
  InsertResult add_triple(Triple t);
  // Like add_triple but also accepts derived triples; used when reloading
  // a persisted graph.
  InsertResult restore_triple(Triple t);

  // Applies the item-POI and user-preference rules until fixpoint; returns
  // the number of derived triples added.
  std::size_t run_completion();

  const Entity* find(std::string_view id) const;
  const Entity& at(std::string_view id) const;  // throws UnknownEntity
  const Entity* find_by_label(EntityKind kind, std::string_view label) const;

  std::vector<Neighbor> neighbors(std::string_view id, std::optional<RelationKind> relation,
                                  Direction direction) const;
  bool contains(const Triple& t) const;

  std::vector<CognitivePath> cognitive_paths(std::string_view item_id) const;

  GraphStats stats() const;

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Triple>& triples() const { return triples_; }

  // Full-scan checks used by tests and at load time.
  bool indexes_consistent() const;

 private:
  InsertResult insert(Triple t);
  static std::string key_of(const Triple& t);
  static std::string edge_key(std::string_view id, RelationKind r);

  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::map<std::pair<EntityKind, std::string>, std::size_t> label_index_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::size_t> triple_keys_;
  std::unordered_map<std::string, std::vector<std::size_t>> out_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> in_index_;
};

KnowledgeGraph import_jsonl(const std::filesystem::path& path);
KnowledgeGraph import_jsonl(std::istream& in);
void export_jsonl(const KnowledgeGraph& kg, const std::filesystem::path& path);
void export_jsonl(const KnowledgeGraph& kg, std::ostream& out);

// Readers take immutable snapshots; writers run a batch against a private
// copy that is published in one step, so no reader sees a partial batch.
class GraphStore {
 public:
  explicit GraphStore(KnowledgeGraph kg = {});

  std::shared_ptr<const KnowledgeGraph> snapshot() const;
  void update(const std::function<void(KnowledgeGraph&)>& batch);

 private:
  mutable std::shared_mutex mutex_;
  std::mutex writer_;
  std::shared_ptr<const KnowledgeGraph> current_;
};

}  // namespace mkg

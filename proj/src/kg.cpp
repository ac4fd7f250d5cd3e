#include "mkg/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "json.hpp"

namespace mkg {

namespace {

constexpr std::array<std::string_view, kEntityKindCount> kEntityNames = {
    "User", "Item", "Scenario", "Problem", "POI", "PropertyValue", "Image"};
constexpr std::array<std::string_view, kRelationKindCount> kRelationNames = {
    "cause", "need", "satisfy", "has_property", "has_image", "has_problem", "has_poi", "prefer"};

}  // namespace

std::string_view to_string(EntityKind k) { return kEntityNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(RelationKind r) { return kRelationNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Provenance p) { return p == Provenance::asserted ? "asserted" : "derived"; }

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEntityNames.size(); ++i)
    if (kEntityNames[i] == s) return static_cast<EntityKind>(i);
  return std::nullopt;
}

std::optional<RelationKind> parse_relation_kind(std::string_view s) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i)
    if (kRelationNames[i] == s) return static_cast<RelationKind>(i);
  return std::nullopt;
}

std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "asserted") return Provenance::asserted;
  if (s == "derived") return Provenance::derived;
  return std::nullopt;
}

bool signature_allows(RelationKind r, EntityKind s, EntityKind t) {
  using K = EntityKind;
  switch (r) {
    case RelationKind::cause: return s == K::Scenario && t == K::Problem;
    case RelationKind::need: return s == K::Problem && t == K::POI;
    case RelationKind::satisfy: return s == K::PropertyValue && t == K::POI;
    case RelationKind::has_property: return s == K::Item && t == K::PropertyValue;
    case RelationKind::has_image: return s != K::Image && t == K::Image;
    case RelationKind::has_problem: return s == K::User && t == K::Problem;
    case RelationKind::has_poi: return s == K::Item && t == K::POI;
    case RelationKind::prefer: return s == K::User && t == K::POI;
  }
  return false;
}

bool derivable(RelationKind r) { return r == RelationKind::has_poi || r == RelationKind::prefer; }

std::size_t GraphStats::entity_total() const {
  std::size_t n = 0;
  for (auto c : entities) n += c;
  return n;
}

std::size_t GraphStats::triple_total() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kRelationKindCount; ++i) n += asserted[i] + derived[i];
  return n;
}

// ---------------------------------------------------------------------------

const std::string& KnowledgeGraph::add_entity(Entity e) {
  if (e.label.empty()) throw Error(ErrorCode::EmptyLabel, "entity '" + e.id + "'");
  if (e.id.empty()) throw Error(ErrorCode::InvalidEntity, "empty id");
  if (entity_index_.count(e.id)) throw Error(ErrorCode::DuplicateId, e.id);
  if (e.kind == EntityKind::Image && !e.attributes.count(std::string(kImagePathAttr)))
    throw Error(ErrorCode::InvalidEntity, "image '" + e.id + "' has no path attribute");

  const std::size_t idx = entities_.size();
  entity_index_.emplace(e.id, idx);
  label_index_.emplace(std::make_pair(e.kind, e.label), idx);
  entities_.push_back(std::move(e));
  return entities_.back().id;
}

std::string KnowledgeGraph::key_of(const Triple& t) {
  std::string key = t.source;
  key += '\x1f';
  key += to_string(t.relation);
  key += '\x1f';
  if (t.qualifier) key += *t.qualifier;
  key += '\x1f';
  key += t.target;
  return key;
}

std::string KnowledgeGraph::edge_key(std::string_view id, RelationKind r) {
  std::string key(id);
  key += '\x1f';
  key += to_string(r);
  return key;
}

InsertResult KnowledgeGraph::add_triple(Triple t) {
  if (t.provenance != Provenance::asserted)
    throw Error(ErrorCode::InvalidProvenance, "add_triple accepts asserted triples only");
  return insert(std::move(t));
}

InsertResult KnowledgeGraph::restore_triple(Triple t) { return insert(std::move(t)); }

InsertResult KnowledgeGraph::insert(Triple t) {
  const Entity* src = find(t.source);
  if (!src) throw Error(ErrorCode::UnknownEntity, t.source);
  const Entity* dst = find(t.target);
  if (!dst) throw Error(ErrorCode::UnknownEntity, t.target);
  if (!signature_allows(t.relation, src->kind, dst->kind)) {
    throw Error(ErrorCode::SignatureViolation,
                std::string(to_string(src->kind)) + " -" + std::string(to_string(t.relation)) + "-> " +
                    std::string(to_string(dst->kind)));
  }
  if (t.provenance == Provenance::derived && !derivable(t.relation))
    throw Error(ErrorCode::InvalidProvenance,
                "relation " + std::string(to_string(t.relation)) + " cannot be derived");
  if (t.relation == RelationKind::has_property && !t.qualifier)
    throw Error(ErrorCode::SignatureViolation, "has_property needs a property qualifier");
  if (t.relation != RelationKind::has_property && t.qualifier)
    throw Error(ErrorCode::SignatureViolation, "only has_property carries a qualifier");

  std::string key = key_of(t);
  if (triple_keys_.count(key)) return InsertResult::AlreadyPresent;

  const std::size_t idx = triples_.size();
  triple_keys_.emplace(std::move(key), idx);
  out_index_[edge_key(t.source, t.relation)].push_back(idx);
  in_index_[edge_key(t.target, t.relation)].push_back(idx);
  triples_.push_back(std::move(t));
  return InsertResult::Inserted;
}

bool KnowledgeGraph::contains(const Triple& t) const { return triple_keys_.count(key_of(t)) > 0; }

const Entity* KnowledgeGraph::find(std::string_view id) const {
  auto it = entity_index_.find(std::string(id));
  return it == entity_index_.end() ? nullptr : &entities_[it->second];
}

const Entity& KnowledgeGraph::at(std::string_view id) const {
  const Entity* e = find(id);
  if (!e) throw Error(ErrorCode::UnknownEntity, std::string(id));
  return *e;
}

const Entity* KnowledgeGraph::find_by_label(EntityKind kind, std::string_view label) const {
  auto it = label_index_.find(std::make_pair(kind, std::string(label)));
  return it == label_index_.end() ? nullptr : &entities_[it->second];
}

std::size_t KnowledgeGraph::run_completion() {
  // Rule body: (a, first, b) and (b, second, c) => (a, head, c).
  struct Rule {
    RelationKind first, second, head;
  };
  static constexpr Rule kRules[] = {
      {RelationKind::has_property, RelationKind::satisfy, RelationKind::has_poi},
      {RelationKind::has_problem, RelationKind::need, RelationKind::prefer},
  };

  std::size_t added = 0;
  for (;;) {
    std::vector<Triple> fresh;
    for (const Rule& rule : kRules) {
      for (const Triple& t : triples_) {
        if (t.relation != rule.first) continue;
        auto it = out_index_.find(edge_key(t.target, rule.second));
        if (it == out_index_.end()) continue;
        for (std::size_t j : it->second) {
          Triple d{t.source, rule.head, triples_[j].target, std::nullopt, Provenance::derived};
          if (!contains(d)) fresh.push_back(std::move(d));
        }
      }
    }
    std::size_t round = 0;
    for (auto& t : fresh)
      if (insert(std::move(t)) == InsertResult::Inserted) ++round;
    added += round;
    if (round == 0) break;
  }
  return added;
}

std::vector<Neighbor> KnowledgeGraph::neighbors(std::string_view id, std::optional<RelationKind> relation,
                                                Direction direction) const {
  at(id);
  const auto& index = direction == Direction::out ? out_index_ : in_index_;
  std::vector<Neighbor> out;
  auto collect = [&](RelationKind r) {
    auto it = index.find(edge_key(id, r));
    if (it == index.end()) return;
    for (std::size_t j : it->second) {
      const Triple& t = triples_[j];
      out.push_back({&t, &at(direction == Direction::out ? t.target : t.source)});
    }
  };
  if (relation) {
    collect(*relation);
  } else {
    for (std::size_t r = 0; r < kRelationKindCount; ++r) collect(static_cast<RelationKind>(r));
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return std::tie(a.triple->relation, a.entity->id, a.triple->qualifier) <
           std::tie(b.triple->relation, b.entity->id, b.triple->qualifier);
  });
  return out;
}

std::vector<CognitivePath> KnowledgeGraph::cognitive_paths(std::string_view item_id) const {
  const Entity& item = at(item_id);
  std::set<CognitivePath> paths;
  if (item.kind != EntityKind::Item) return {};
  for (const auto& pv : neighbors(item_id, RelationKind::has_property, Direction::out)) {
    for (const auto& poi : neighbors(pv.entity->id, RelationKind::satisfy, Direction::out)) {
      for (const auto& problem : neighbors(poi.entity->id, RelationKind::need, Direction::in)) {
        for (const auto& scenario : neighbors(problem.entity->id, RelationKind::cause, Direction::in)) {
          paths.insert({scenario.entity->id, problem.entity->id, poi.entity->id, pv.entity->id, item.id});
        }
      }
    }
  }
  return {paths.begin(), paths.end()};
}

GraphStats KnowledgeGraph::stats() const {
  GraphStats s;
  for (const auto& e : entities_) ++s.entities[static_cast<std::size_t>(e.kind)];
  for (const auto& t : triples_) {
    auto& bucket = t.provenance == Provenance::asserted ? s.asserted : s.derived;
    ++bucket[static_cast<std::size_t>(t.relation)];
  }
  return s;
}

bool KnowledgeGraph::indexes_consistent() const {
  if (triple_keys_.size() != triples_.size()) return false;
  std::size_t out_total = 0, in_total = 0;
  for (const auto& [k, v] : out_index_) out_total += v.size();
  for (const auto& [k, v] : in_index_) in_total += v.size();
  if (out_total != triples_.size() || in_total != triples_.size()) return false;
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    const Triple& t = triples_[i];
    auto it = triple_keys_.find(key_of(t));
    if (it == triple_keys_.end() || it->second != i) return false;
    const auto& o = out_index_.at(edge_key(t.source, t.relation));
    const auto& n = in_index_.at(edge_key(t.target, t.relation));
    if (std::find(o.begin(), o.end(), i) == o.end()) return false;
    if (std::find(n.begin(), n.end(), i) == n.end()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSONL persistence

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::size_t line) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorCode::ParseError, "unknown field '" + key + "'", line);
  }
}

std::string required_string(const json& j, const char* field, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw Error(ErrorCode::ParseError, std::string("missing string field '") + field + "'", line);
  return it->get<std::string>();
}

Entity parse_entity(const json& j, std::size_t line) {
  reject_unknown(j, {"rec", "id", "kind", "label", "aliases", "attributes"}, line);
  Entity e;
  e.id = required_string(j, "id", line);
  auto kind = parse_entity_kind(required_string(j, "kind", line));
  if (!kind) throw Error(ErrorCode::ParseError, "unknown entity kind", line);
  e.kind = *kind;
  e.label = required_string(j, "label", line);
  if (auto it = j.find("aliases"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::ParseError, "aliases must be an array", line);
    for (const auto& a : *it) {
      if (!a.is_string()) throw Error(ErrorCode::ParseError, "alias must be a string", line);
      e.aliases.push_back(a.get<std::string>());
    }
  }
  if (auto it = j.find("attributes"); it != j.end()) {
    if (!it->is_object()) throw Error(ErrorCode::ParseError, "attributes must be an object", line);
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw Error(ErrorCode::ParseError, "attribute values must be strings", line);
      e.attributes.emplace(k, v.get<std::string>());
    }
  }
  return e;
}

Triple parse_triple(const json& j, std::size_t line) {
  reject_unknown(j, {"rec", "source", "relation", "qualifier", "target", "provenance"}, line);
  Triple t;
  t.source = required_string(j, "source", line);
  t.target = required_string(j, "target", line);
  auto rel = parse_relation_kind(required_string(j, "relation", line));
  if (!rel) throw Error(ErrorCode::ParseError, "unknown relation", line);
  t.relation = *rel;
  if (j.contains("qualifier")) t.qualifier = required_string(j, "qualifier", line);
  auto prov = parse_provenance(required_string(j, "provenance", line));
  if (!prov) throw Error(ErrorCode::ParseError, "unknown provenance", line);
  t.provenance = *prov;
  return t;
}

}  // namespace

KnowledgeGraph import_jsonl(std::istream& in) {
  KnowledgeGraph kg;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what(), line);
    }
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "record is not an object", line);
    const std::string rec = required_string(j, "rec", line);
    try {
      if (rec == "entity") {
        kg.add_entity(parse_entity(j, line));
      } else if (rec == "triple") {
        Triple t = parse_triple(j, line);
        // Derived records are restored as-is so provenance round-trips.
        if (t.provenance == Provenance::asserted) {
          kg.add_triple(std::move(t));
        } else {
          kg.restore_triple(std::move(t));
        }
      } else {
        throw Error(ErrorCode::ParseError, "unknown record type '" + rec + "'", line);
      }
    } catch (const Error& e) {
      if (e.line() != 0) throw;
      throw Error(e.code(), e.detail(), line);
    }
  }
  return kg;
}

KnowledgeGraph import_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return import_jsonl(in);
}

void export_jsonl(const KnowledgeGraph& kg, std::ostream& out) {
  for (const Entity& e : kg.entities()) {
    json j = {{"rec", "entity"}, {"id", e.id}, {"kind", to_string(e.kind)}, {"label", e.label},
              {"aliases", e.aliases}, {"attributes", e.attributes}};
    out << j.dump() << '\n';
  }
  for (const Triple& t : kg.triples()) {
    json j = {{"rec", "triple"}, {"source", t.source}, {"relation", to_string(t.relation)}, {"target", t.target},
              {"provenance", to_string(t.provenance)}};
    if (t.qualifier) j["qualifier"] = *t.qualifier;
    out << j.dump() << '\n';
  }
}

void export_jsonl(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  export_jsonl(kg, out);
}

// ---------------------------------------------------------------------------

GraphStore::GraphStore(KnowledgeGraph kg) : current_(std::make_shared<const KnowledgeGraph>(std::move(kg))) {}

std::shared_ptr<const KnowledgeGraph> GraphStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return current_;
}

void GraphStore::update(const std::function<void(KnowledgeGraph&)>& batch) {
  std::lock_guard writer(writer_);
  auto next = std::make_shared<KnowledgeGraph>(*snapshot());
  batch(*next);
  std::unique_lock lock(mutex_);
  current_ = std::move(next);
}

}  // namespace mkg

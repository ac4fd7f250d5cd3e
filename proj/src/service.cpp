#include "mkg/service.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "mkg/xmodal/checkpoint.hpp"
#include "mkg/xmodal/faq.hpp"

namespace mkg::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const json& v, const char* key) {
  if (!v.is_string() || v.get<std::string>().empty())
    throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a non-empty path string");
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

}  // namespace

ServiceConfig config_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "service config must be a JSON object");
  static const std::set<std::string> known = {
      "listen",      "kg",    "semantic_lexicons", "property_lexicon", "faq",    "templates", "storyboard_templates",
      "checkpoint",  "index", "faq_backend",       "theta",            "search_k", "weights", "default_reply",
      "intent",      "session_ttl_seconds"};
  for (const auto& [key, val] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  for (const char* key : {"kg", "semantic_lexicons", "property_lexicon", "faq"})
    if (!j.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string("config is missing '") + key + "'");

  ServiceConfig c;
  try {
    if (j.contains("listen")) {
      c.host = j["listen"].value("host", c.host);
      c.port = j["listen"].value("port", c.port);
      if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::InvalidConfig, "listen.port out of range");
    }
    c.kg = resolve(base, j["kg"], "kg");
    const auto& lex = j["semantic_lexicons"];
    if (lex.is_string()) {
      c.semantic_lexicons.push_back(resolve(base, lex, "semantic_lexicons"));
    } else if (lex.is_array() && !lex.empty()) {
      for (const auto& p : lex) c.semantic_lexicons.push_back(resolve(base, p, "semantic_lexicons"));
    } else {
      throw Error(ErrorCode::InvalidConfig, "semantic_lexicons must be a path or a non-empty list of paths");
    }
    c.property_lexicon = resolve(base, j["property_lexicon"], "property_lexicon");
    c.faq = resolve(base, j["faq"], "faq");
    if (j.contains("templates")) c.templates = resolve(base, j["templates"], "templates");
    if (j.contains("storyboard_templates"))
      c.storyboard_templates = resolve(base, j["storyboard_templates"], "storyboard_templates");
    if (j.contains("checkpoint")) c.checkpoint = resolve(base, j["checkpoint"], "checkpoint");
    if (j.contains("index")) c.index = resolve(base, j["index"], "index");
    c.faq_backend = j.value("faq_backend", c.faq_backend);
    c.theta = j.value("theta", c.theta);
    const auto k = j.value("search_k", static_cast<long long>(c.search_k));
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "search_k must be at least 1");
    c.search_k = static_cast<std::size_t>(k);
    if (j.contains("weights")) c.weights = j["weights"].get<retrieval::ScoreWeights>();
    c.default_reply = j.value("default_reply", c.default_reply);
    if (j.contains("intent")) c.rules = j["intent"].get<qa::IntentRules>();
    const auto ttl = j.value("session_ttl_seconds", static_cast<long long>(c.session_ttl.count()));
    if (ttl < 1) throw Error(ErrorCode::InvalidConfig, "session_ttl_seconds must be positive");
    c.session_ttl = std::chrono::seconds(ttl);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (c.theta < 0.0 || c.theta > 1.0) throw Error(ErrorCode::InvalidConfig, "theta must lie in [0,1]");
  if (c.faq_backend != "tfidf" && c.faq_backend != "encoder")
    throw Error(ErrorCode::InvalidConfig, "faq_backend must be 'tfidf' or 'encoder'");
  if (c.faq_backend == "encoder" && !c.checkpoint)
    throw Error(ErrorCode::InvalidConfig, "faq_backend 'encoder' needs a checkpoint");
  if (c.index && !c.checkpoint) throw Error(ErrorCode::InvalidConfig, "an index needs a checkpoint to encode queries");
  if (c.default_reply.empty()) throw Error(ErrorCode::InvalidConfig, "default_reply must not be empty");
  return c;
}

ServiceConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> item_comments(const Entity& item) {
  std::vector<std::string> out;
  for (const auto& [key, val] : item.attributes)
    if (key == "comment" || key.rfind("comment.", 0) == 0) out.push_back(val);
  return out;
}

namespace {

std::vector<std::string> images_of(const KnowledgeGraph& kg, const std::string& id) {
  std::vector<std::string> out;
  for (const auto& nb : kg.neighbors(id, RelationKind::has_image, Direction::out)) out.push_back(nb.entity->id);
  return out;
}

}  // namespace

ItemCard item_card(const KnowledgeGraph& kg, std::string_view item_id) {
  const Entity* item = kg.find(item_id);
  if (!item || item->kind != EntityKind::Item)
    throw Error(ErrorCode::UnknownItem, "no item '" + std::string(item_id) + "'");
  ItemCard card;
  card.id = item->id;
  card.title = item->label;
  card.appearance = images_of(kg, item->id);
  for (const auto& nb : kg.neighbors(item->id, RelationKind::has_poi, Direction::out))
    card.poi.push_back({nb.entity->id, nb.entity->label, images_of(kg, nb.entity->id), nb.triple->provenance});
  card.comments = item_comments(*item);
  for (const auto& nb : kg.neighbors(item->id, RelationKind::has_property, Direction::out))
    card.properties.push_back(
        {nb.triple->qualifier.value_or(""), nb.entity->label, nb.entity->id, images_of(kg, nb.entity->id)});
  return card;
}

json to_json(const ItemCard& card) {
  json poi = json::array();
  for (const auto& p : card.poi)
    poi.push_back({{"id", p.id},
                   {"label", p.label},
                   {"images", p.images},
                   {"provenance", std::string(to_string(p.provenance))}});
  json props = json::array();
  for (const auto& p : card.properties)
    props.push_back({{"name", p.name}, {"value", p.value}, {"value_id", p.value_id}, {"images", p.images}});
  return {{"id", card.id},
          {"title", card.title},
          {"sections", {{"appearance", card.appearance}, {"poi", poi}, {"comment", card.comments}}},
          {"properties", props}};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Assistant> Assistant::load(const ServiceConfig& cfg) {
  std::unique_ptr<Assistant> a(new Assistant());
  a->cfg_ = cfg;
  a->kg_ = import_jsonl(cfg.kg);
  a->kg_.run_completion();
  if (!a->kg_.indexes_consistent()) throw Error(ErrorCode::InvalidConfig, cfg.kg.string() + ": inconsistent graph");
  for (const auto& e : a->kg_.entities())
    if (e.kind == EntityKind::Image)
      if (auto f = a->image_file(e.id); !f || !fs::is_regular_file(*f))
        std::cerr << "warning: image " << e.id << " has no readable file\n";

  for (const auto& p : cfg.semantic_lexicons) retrieval::merge_lexicon(a->semantic_, p);
  a->properties_ = retrieval::read_lexicon(cfg.property_lexicon);
  a->catalog_ = retrieval::Catalog(a->kg_, a->semantic_);
  a->faq_ = qa::read_faq(cfg.faq);
  if (cfg.templates) a->knowledge_.templates = qa::read_templates(*cfg.templates);
  if (cfg.storyboard_templates) a->story_ = storyboard::read_templates(*cfg.storyboard_templates);
  cfg.weights.validate();

  if (cfg.checkpoint) a->model_ = std::make_unique<xmodal::Model>(xmodal::load_checkpoint(*cfg.checkpoint));
  if (cfg.index) {
    a->index_ = std::make_unique<xmodal::EmbeddingIndex>(xmodal::load_index(*cfg.index));
    if (a->index_->dim() != a->model_->enc.cfg.d_model)
      throw Error(ErrorCode::InvalidConfig, cfg.index->string() + ": index dimension " +
                                                std::to_string(a->index_->dim()) + " does not match the checkpoint");
  }
  if (cfg.faq_backend == "encoder")
    a->matcher_ = std::make_unique<xmodal::EncoderFaqMatcher>(*a->model_, a->faq_);
  else
    a->matcher_ = std::make_unique<qa::TfidfMatcher>(a->faq_);

  auto& k = a->knowledge_;
  k.kg = &a->kg_;
  k.semantic = &a->semantic_;
  k.properties = &a->properties_;
  k.catalog = &a->catalog_;
  k.faq = &a->faq_;
  k.matcher = a->matcher_.get();
  k.rules = cfg.rules;
  k.weights = cfg.weights;
  k.theta = cfg.theta;
  k.search_k = cfg.search_k;
  k.default_reply = cfg.default_reply;
  return a;
}

std::optional<fs::path> Assistant::image_file(std::string_view id) const {
  const Entity* e = kg_.find(id);
  if (!e || e->kind != EntityKind::Image) return std::nullopt;
  auto it = e->attributes.find("path");
  if (it == e->attributes.end() || it->second.empty()) return std::nullopt;
  fs::path p = it->second;
  return p.is_absolute() ? p : cfg_.kg.parent_path() / p;
}

// ---------------------------------------------------------------------------

SessionTable::SessionTable(std::chrono::seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {}

void SessionTable::with(const std::string& id, const std::function<void(qa::Session&)>& fn) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(m_);
    const auto now = clock_();
    for (auto it = slots_.begin(); it != slots_.end();)
      it = now - it->second->s.last_access > ttl_ ? slots_.erase(it) : std::next(it);
    auto& entry = slots_[id];
    if (!entry) {
      entry = std::make_shared<Slot>();
      entry->s.id = id;
    }
    // last_access is only touched under the table lock
    entry->s.last_access = now;
    slot = entry;
  }
  std::lock_guard lock(slot->m);
  fn(slot->s);
}

bool SessionTable::contains(const std::string& id) const {
  std::lock_guard lock(m_);
  auto it = slots_.find(id);
  return it != slots_.end() && clock_() - it->second->s.last_access <= ttl_;
}

std::size_t SessionTable::size() const {
  std::lock_guard lock(m_);
  return slots_.size();
}

std::size_t SessionTable::evict_expired() {
  std::lock_guard lock(m_);
  const auto now = clock_();
  return std::erase_if(slots_, [&](const auto& kv) { return now - kv.second->s.last_access > ttl_; });
}

// ---------------------------------------------------------------------------

namespace {

Reply json_reply(const json& body, int status = 200) { return {status, body.dump(), "application/json"}; }

Reply error_reply(int status, const std::string& code, const std::string& message) {
  return json_reply({{"error", code}, {"message", message}}, status);
}

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownItem:
    case ErrorCode::UnknownEntity:
    case ErrorCode::NoPath:
    case ErrorCode::EmptyIndex:
      return 404;
    case ErrorCode::Io:
      return 500;
    default:
      return 400;
  }
}

Reply library_error(const Error& e) { return error_reply(status_for(e.code()), to_string(e.code()), e.what()); }

json ranked_json(const KnowledgeGraph& kg, const std::vector<retrieval::Ranked>& items) {
  json out = json::array();
  for (const auto& r : items) {
    const Entity& e = kg.at(r.item_id);
    const auto imgs = images_of(kg, e.id);
    out.push_back({{"id", e.id},
                   {"title", e.label},
                   {"score", r.score},
                   {"image", imgs.empty() ? json(nullptr) : json(imgs.front())}});
  }
  return out;
}

json answer_json(const qa::AnswerPayload& a) {
  return {{"type", "answer"},
          {"text", a.text},
          {"images", a.images},
          {"source", std::string(qa::to_string(a.source))},
          {"unanswered_properties", a.unanswered_properties}};
}

std::optional<std::size_t> parse_k(const std::optional<std::string>& k, std::size_t fallback) {
  if (!k) return fallback;
  if (k->empty() || k->size() > 6 || k->find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  const std::size_t v = std::stoul(*k);
  if (v == 0) return std::nullopt;
  return v;
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".pgm") return "image/x-portable-graymap";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

Service::Service(std::shared_ptr<const Assistant> assistant, Clock clock)
    : assistant_(std::move(assistant)), sessions_(assistant_->config().session_ttl, std::move(clock)) {}

Reply Service::query(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error_reply(400, "BadRequest", "body must be a JSON object");
  if (!j.contains("session_id") || !j["session_id"].is_string() || j["session_id"].get<std::string>().empty())
    return error_reply(400, "BadRequest", "session_id must be a non-empty string");
  if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty())
    return error_reply(400, "BadRequest", "text must be a non-empty string");
  const std::string sid = j["session_id"];
  const std::string text = j["text"];

  const auto& k = assistant_->knowledge();
  qa::Response r;
  try {
    sessions_.with(sid, [&](qa::Session& s) { r = qa::handle(text, s, k); });
  } catch (const Error& e) {
    return library_error(e);
  }
  json payload;
  if (r.intent == qa::Intent::ViewItem) {
    payload = {{"type", "items"},
               {"items", ranked_json(*k.kg, r.items)},
               {"selected", r.selected ? json(*r.selected) : json(nullptr)}};
  } else {
    payload = answer_json(*r.answer);
  }
  return json_reply({{"session_id", sid}, {"intent", std::string(qa::to_string(r.intent))}, {"payload", payload}});
}

Reply Service::item(const std::string& id) const {
  try {
    return json_reply(to_json(item_card(assistant_->kg(), id)));
  } catch (const Error& e) {
    return library_error(e);
  }
}

Reply Service::select(const std::string& session_id, const std::string& body) {
  if (session_id.empty()) return error_reply(400, "BadRequest", "empty session id");
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("item_id") || !j["item_id"].is_string())
    return error_reply(400, "BadRequest", "body must be {\"item_id\": string}");
  const std::string item = j["item_id"];
  const Entity* e = assistant_->kg().find(item);
  if (!e || e->kind != EntityKind::Item) return error_reply(404, "UnknownItem", "no item '" + item + "'");
  sessions_.with(session_id, [&](qa::Session& s) { qa::select_item(s, item, assistant_->kg()); });
  return json_reply({{"ok", true}, {"session_id", session_id}, {"current_item", item}});
}

Reply Service::storyboard(const std::string& id) const {
  try {
    return json_reply(storyboard::to_json(storyboard::generate_storyboard(
        assistant_->kg(), id, storyboard::first_path, assistant_->storyboard_templates())));
  } catch (const Error& e) {
    return library_error(e);
  }
}

Reply Service::search(const std::optional<std::string>& q, const std::optional<std::string>& k) const {
  if (!q || q->empty()) return error_reply(400, "BadRequest", "q must be a non-empty string");
  const auto kk = parse_k(k, assistant_->config().search_k);
  if (!kk) return error_reply(400, "BadRequest", "k must be a positive integer");
  const auto& know = assistant_->knowledge();
  std::vector<retrieval::Ranked> ranked;
  if (!know.catalog->docs().empty()) ranked = retrieval::search(*q, *know.catalog, *know.semantic, know.weights, *kk);
  return json_reply({{"query", *q}, {"items", ranked_json(*know.kg, ranked)}});
}

Reply Service::image(const std::string& id) const {
  const auto path = assistant_->image_file(id);
  if (!path) return error_reply(404, "UnknownEntity", "no image '" + id + "'");
  std::ifstream in(*path, std::ios::binary);
  if (!in) return error_reply(404, "Io", "image file for '" + id + "' is missing");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return {200, bytes.str(), content_type_for(*path)};
}

Reply Service::match(const std::optional<std::string>& q, const std::optional<std::string>& k) const {
  if (!assistant_->index()) return error_reply(404, "EmptyIndex", "no embedding index is loaded");
  if (!q || q->empty()) return error_reply(400, "BadRequest", "q must be a non-empty string");
  const auto kk = parse_k(k, 10);
  if (!kk) return error_reply(400, "BadRequest", "k must be a positive integer");
  try {
    json hits = json::array();
    for (const auto& h : xmodal::match(*assistant_->model(), *assistant_->index(), *q, *kk))
      hits.push_back({{"id", h.id}, {"score", h.score}});
    return json_reply({{"query", *q}, {"hits", hits}});
  } catch (const Error& e) {
    return library_error(e);
  }
}

}  // namespace mkg::service

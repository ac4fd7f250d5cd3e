#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mkg/kg.hpp"
#include "mkg/qa.hpp"
#include "mkg/retrieval.hpp"
#include "mkg/storyboard.hpp"
#include "mkg/xmodal/index.hpp"

namespace mkg::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path kg;
  std::vector<std::filesystem::path> semantic_lexicons;
  std::filesystem::path property_lexicon;
  std::filesystem::path faq;
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> storyboard_templates;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> index;
  std::string faq_backend = "tfidf";  // or "encoder" (needs checkpoint)
  double theta = 0.3;
  std::size_t search_k = 10;
  retrieval::ScoreWeights weights;
  std::string default_reply = "抱歉，这个问题我暂时无法回答。";
  qa::IntentRules rules;
  std::chrono::seconds session_ttl{1800};
};

// Relative paths are resolved against `base` (the config file's directory).
// Throws InvalidConfig on a bad value or a missing required key.
ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base);
ServiceConfig load_config(const std::filesystem::path& path);

struct PoiEntry {
  std::string id;
  std::string label;
  std::vector<std::string> images;
  Provenance provenance = Provenance::asserted;
};

struct PropertyEntry {
  std::string name;  // has_property qualifier, empty when absent
  std::string value;
  std::string value_id;
  std::vector<std::string> images;
};

// Item exhibition: appearance, POI and comment sections plus the property
// table.
struct ItemCard {
  std::string id;
  std::string title;
  std::vector<std::string> appearance;
  std::vector<PoiEntry> poi;
  std::vector<std::string> comments;
  std::vector<PropertyEntry> properties;
};

// Item attributes named "comment" or "comment.<suffix>", in key order.
std::vector<std::string> item_comments(const Entity& item);

ItemCard item_card(const KnowledgeGraph& kg, std::string_view item_id);  // throws UnknownItem
nlohmann::json to_json(const ItemCard& card);

// Everything loaded at startup; read-only afterwards.
class Assistant {
 public:
  // Imports the KG, runs completion and validates every input. Throws Error
  // with a diagnostic on the first problem.
  static std::unique_ptr<Assistant> load(const ServiceConfig& cfg);

  const ServiceConfig& config() const { return cfg_; }
  const KnowledgeGraph& kg() const { return kg_; }
  const qa::Knowledge& knowledge() const { return knowledge_; }
  const storyboard::Templates& storyboard_templates() const { return story_; }
  const xmodal::Model* model() const { return model_.get(); }
  const xmodal::EmbeddingIndex* index() const { return index_.get(); }

  // File behind an Image entity (relative paths resolve against the KG file).
  std::optional<std::filesystem::path> image_file(std::string_view id) const;

 private:
  Assistant() = default;

  ServiceConfig cfg_;
  KnowledgeGraph kg_;
  retrieval::Lexicon semantic_;
  retrieval::Lexicon properties_;
  retrieval::Catalog catalog_;
  std::vector<qa::FaqEntry> faq_;
  std::unique_ptr<qa::FaqMatcher> matcher_;
  storyboard::Templates story_;
  std::unique_ptr<xmodal::Model> model_;
  std::unique_ptr<xmodal::EmbeddingIndex> index_;
  qa::Knowledge knowledge_;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;

// In-memory sessions with idle-time eviction. Each session has its own lock,
// so requests of one session run one at a time while sessions proceed in
// parallel.
class SessionTable {
 public:
  SessionTable(std::chrono::seconds ttl, Clock clock);

  // Runs fn on the locked session, creating it when absent or expired.
  void with(const std::string& id, const std::function<void(qa::Session&)>& fn);

  bool contains(const std::string& id) const;  // present and not expired
  std::size_t size() const;
  std::size_t evict_expired();

 private:
  struct Slot {
    std::mutex m;
    qa::Session s;
  };

  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex m_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Transport-independent request handlers. JSON bodies are compact dumps, so
// identical state and requests give identical bytes.
class Service {
 public:
  explicit Service(std::shared_ptr<const Assistant> assistant, Clock clock = std::chrono::steady_clock::now);

  Reply query(const std::string& body);
  Reply item(const std::string& id) const;
  Reply select(const std::string& session_id, const std::string& body);
  Reply storyboard(const std::string& id) const;
  Reply search(const std::optional<std::string>& q, const std::optional<std::string>& k) const;
  Reply image(const std::string& id) const;
  // Text-to-image match over the loaded embedding index.
  Reply match(const std::optional<std::string>& q, const std::optional<std::string>& k) const;

  const SessionTable& sessions() const { return sessions_; }
  const Assistant& assistant() const { return *assistant_; }

 private:
  std::shared_ptr<const Assistant> assistant_;
  SessionTable sessions_;
};

// cpp-httplib front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  // Throws Io when the address cannot be bound.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void wait_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mkg::service

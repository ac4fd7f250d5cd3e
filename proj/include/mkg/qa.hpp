#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mkg/kg.hpp"
#include "mkg/retrieval.hpp"

namespace mkg::qa {

enum class Intent { ViewItem, ItemQuestion, OutOfScope };
enum class AnswerSource { kbqa, faq, fallback };

std::string_view to_string(Intent i);
std::string_view to_string(AnswerSource s);

struct Session {
  std::string id;
  std::optional<std::string> current_item;
  std::vector<retrieval::Ranked> last_list;
  std::chrono::steady_clock::time_point last_access{};
};

struct IntentRules {
  std::vector<std::string> view_triggers = {"看看", "看", "show"};
  std::vector<std::string> question_markers = {"吗", "?", "？", "多大", "什么"};
  std::vector<std::string> view_span_types = {"category", "brand"};
};

void from_json(const nlohmann::json& j, IntentRules& r);
void to_json(nlohmann::json& j, const IntentRules& r);

// Rule cascade, first hit wins:
//   ViewItem      trigger phrase and (category/brand span or item mention)
//   ItemQuestion  session item set and (property span or question marker)
//   OutOfScope    otherwise
Intent classify_intent(std::string_view query, const Session& session, const KnowledgeGraph& kg,
                       const retrieval::Lexicon& semantic, const retrieval::Lexicon& properties,
                       const IntentRules& rules);

// Case-insensitive (ASCII) label or alias occurrence of any Item in query.
bool mentions_item(std::string_view query, const KnowledgeGraph& kg);

struct AnswerPayload {
  std::string text;
  std::vector<std::string> images;  // Image entity ids
  AnswerSource source = AnswerSource::fallback;
  std::vector<std::string> unanswered_properties;  // further properties in the question

  bool operator==(const AnswerPayload&) const = default;
};

// property name -> template with {item}, {property}, {value}
struct AnswerTemplates {
  std::string default_template = "{item}的{property}是{value}。";
  std::map<std::string, std::string> per_property;

  std::string render(const std::string& item, const std::string& property, const std::string& value) const;
};

AnswerTemplates read_templates(const std::filesystem::path& path);

// Answers from the first property span of the query (the property lexicon
// maps surfaces to property names, i.e. has_property qualifiers). Several
// values of the same property are joined with "、" in id order. nullopt when
// no property is identified or the item has no value for it. Throws
// UnknownItem.
std::optional<AnswerPayload> kbqa(std::string_view query, std::string_view item_id, const KnowledgeGraph& kg,
                                  const retrieval::Lexicon& properties, const AnswerTemplates& templates);

struct FaqEntry {
  std::string question;
  std::string answer;
};

std::vector<FaqEntry> read_faq(const std::filesystem::path& path);  // JSONL {"q","a"}
std::vector<FaqEntry> read_faq(std::istream& in);

struct FaqMatch {
  std::size_t index = 0;
  double similarity = 0.0;
};

// Similarity backend over a fixed FAQ store.
class FaqMatcher {
 public:
  virtual ~FaqMatcher() = default;
  virtual std::vector<double> similarities(std::string_view query) const = 0;
};

// Cosine over TF-IDF vectors of tokenize() tokens. idf = ln((1+N)/(1+df)) + 1
// computed over the stored questions.
class TfidfMatcher : public FaqMatcher {
 public:
  explicit TfidfMatcher(const std::vector<FaqEntry>& entries);
  std::vector<double> similarities(std::string_view query) const override;

  std::map<std::string, double> vectorize(std::string_view text) const;
  double idf(const std::string& token) const;

 private:
  std::map<std::string, double> idf_;
  std::vector<std::map<std::string, double>> docs_;
  std::vector<double> norms_;
};

// Best entry by similarity, ties by insertion order; nullopt for an empty store.
std::optional<FaqMatch> best_faq(const FaqMatcher& matcher, std::string_view query);

AnswerPayload faq_fallback(std::string_view query, const std::vector<FaqEntry>& store, const FaqMatcher& matcher,
                           double theta, const std::string& default_reply);

// Everything the handler reads; immutable while serving.
struct Knowledge {
  const KnowledgeGraph* kg = nullptr;
  const retrieval::Lexicon* semantic = nullptr;
  const retrieval::Lexicon* properties = nullptr;
  const retrieval::Catalog* catalog = nullptr;
  const std::vector<FaqEntry>* faq = nullptr;
  const FaqMatcher* matcher = nullptr;
  AnswerTemplates templates;
  IntentRules rules;
  retrieval::ScoreWeights weights;
  double theta = 0.3;
  std::size_t search_k = 10;
  std::string default_reply = "抱歉，这个问题我暂时无法回答。";
};

struct Response {
  Intent intent = Intent::OutOfScope;
  std::vector<retrieval::Ranked> items;  // ViewItem
  std::optional<std::string> selected;   // set when a search returns exactly one item
  std::optional<AnswerPayload> answer;   // ItemQuestion / OutOfScope
};

// Records the processing steps in order ("classify", "search", "kbqa",
// "faq", "fallback").
using Trace = std::vector<std::string>;

Response handle(std::string_view query, Session& session, const Knowledge& k, Trace* trace = nullptr);

// Sets the current item; throws UnknownItem when the id is not an Item.
void select_item(Session& session, std::string_view item_id, const KnowledgeGraph& kg);

}  // namespace mkg::qa

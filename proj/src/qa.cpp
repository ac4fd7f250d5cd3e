#include "mkg/qa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mkg/tokenize.hpp"

namespace mkg::qa {

std::string_view to_string(Intent i) {
  switch (i) {
    case Intent::ViewItem: return "ViewItem";
    case Intent::ItemQuestion: return "ItemQuestion";
    case Intent::OutOfScope: return "OutOfScope";
  }
  return "OutOfScope";
}

std::string_view to_string(AnswerSource s) {
  switch (s) {
    case AnswerSource::kbqa: return "kbqa";
    case AnswerSource::faq: return "faq";
    case AnswerSource::fallback: return "fallback";
  }
  return "fallback";
}

void from_json(const nlohmann::json& j, IntentRules& r) {
  r.view_triggers = j.value("view_triggers", r.view_triggers);
  r.question_markers = j.value("question_markers", r.question_markers);
  r.view_span_types = j.value("view_span_types", r.view_span_types);
}

void to_json(nlohmann::json& j, const IntentRules& r) {
  j = {{"view_triggers", r.view_triggers},
       {"question_markers", r.question_markers},
       {"view_span_types", r.view_span_types}};
}

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  return out;
}

bool contains_any(const std::string& haystack, const std::vector<std::string>& needles) {
  for (const auto& n : needles)
    if (!n.empty() && haystack.find(lower_ascii(n)) != std::string::npos) return true;
  return false;
}

}  // namespace

bool mentions_item(std::string_view query, const KnowledgeGraph& kg) {
  const std::string q = lower_ascii(query);
  for (const auto& e : kg.entities()) {
    if (e.kind != EntityKind::Item) continue;
    if (q.find(lower_ascii(e.label)) != std::string::npos) return true;
    for (const auto& a : e.aliases)
      if (!a.empty() && q.find(lower_ascii(a)) != std::string::npos) return true;
  }
  return false;
}

Intent classify_intent(std::string_view query, const Session& session, const KnowledgeGraph& kg,
                       const retrieval::Lexicon& semantic, const retrieval::Lexicon& properties,
                       const IntentRules& rules) {
  const std::string q = lower_ascii(query);
  if (contains_any(q, rules.view_triggers)) {
    const auto tagged = retrieval::ner_tag(query, semantic);
    const bool typed_span = std::any_of(tagged.spans.begin(), tagged.spans.end(), [&](const retrieval::Span& s) {
      return std::find(rules.view_span_types.begin(), rules.view_span_types.end(), s.type) !=
             rules.view_span_types.end();
    });
    if (typed_span || mentions_item(query, kg)) return Intent::ViewItem;
  }
  if (session.current_item) {
    if (!retrieval::ner_tag(query, properties).spans.empty() || contains_any(q, rules.question_markers))
      return Intent::ItemQuestion;
  }
  return Intent::OutOfScope;
}

// ---------------------------------------------------------------------------

std::string AnswerTemplates::render(const std::string& item, const std::string& property,
                                    const std::string& value) const {
  auto it = per_property.find(property);
  std::string out = it == per_property.end() ? default_template : it->second;
  const std::pair<std::string, const std::string*> fills[] = {
      {"{item}", &item}, {"{property}", &property}, {"{value}", &value}};
  for (const auto& [key, val] : fills)
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + val->size()))
      out.replace(pos, key.size(), *val);
  return out;
}

AnswerTemplates read_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open templates " + path.string());
  AnswerTemplates t;
  try {
    const auto j = nlohmann::json::parse(in);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": expected a JSON object");
    for (const auto& [key, val] : j.items()) {
      if (key == "default") t.default_template = val.get<std::string>();
      else t.per_property[key] = val.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return t;
}

std::optional<AnswerPayload> kbqa(std::string_view query, std::string_view item_id, const KnowledgeGraph& kg,
                                  const retrieval::Lexicon& properties, const AnswerTemplates& templates) {
  const Entity* item = kg.find(item_id);
  if (!item || item->kind != EntityKind::Item)
    throw Error(ErrorCode::UnknownItem, "no item '" + std::string(item_id) + "'");
  const auto tagged = retrieval::ner_tag(query, properties);
  if (tagged.spans.empty()) return std::nullopt;
  const std::string& property = tagged.spans.front().type;

  std::vector<const Entity*> values;
  for (const auto& nb : kg.neighbors(item_id, RelationKind::has_property, Direction::out))
    if (nb.triple->qualifier == property) values.push_back(nb.entity);
  if (values.empty()) return std::nullopt;

  AnswerPayload out;
  out.source = AnswerSource::kbqa;
  std::string joined;
  for (const Entity* v : values) {
    joined += (joined.empty() ? "" : "、") + v->label;
    for (const auto& img : kg.neighbors(v->id, RelationKind::has_image, Direction::out))
      out.images.push_back(img.entity->id);
  }
  out.text = templates.render(item->label, property, joined);
  for (std::size_t i = 1; i < tagged.spans.size(); ++i) {
    const auto& p = tagged.spans[i].type;
    if (p != property && std::find(out.unanswered_properties.begin(), out.unanswered_properties.end(), p) ==
                             out.unanswered_properties.end())
      out.unanswered_properties.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<FaqEntry> read_faq(std::istream& in) {
  std::vector<FaqEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FaqEntry e{j.at("q").get<std::string>(), j.at("a").get<std::string>()};
      if (e.question.empty() || e.answer.empty()) throw Error(ErrorCode::ParseError, "empty question or answer", lineno);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what(), lineno);
    }
  }
  return out;
}

std::vector<FaqEntry> read_faq(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open FAQ store " + path.string());
  try {
    return read_faq(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail(), e.line());
  }
}

TfidfMatcher::TfidfMatcher(const std::vector<FaqEntry>& entries) {
  std::map<std::string, std::size_t> df;
  std::vector<std::map<std::string, double>> tf;
  for (const auto& e : entries) {
    std::map<std::string, double> counts;
    for (const auto& t : tokenize(e.question)) counts[t] += 1.0;
    for (const auto& [t, c] : counts) ++df[t];
    tf.push_back(std::move(counts));
  }
  const double n = static_cast<double>(entries.size());
  for (const auto& [t, d] : df) idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0;
  for (auto& counts : tf) {
    double norm = 0.0;
    for (auto& [t, w] : counts) {
      w *= idf_[t];
      norm += w * w;
    }
    docs_.push_back(std::move(counts));
    norms_.push_back(norm);
  }
}

double TfidfMatcher::idf(const std::string& token) const {
  auto it = idf_.find(token);
  return it == idf_.end() ? 0.0 : it->second;
}

std::map<std::string, double> TfidfMatcher::vectorize(std::string_view text) const {
  std::map<std::string, double> v;
  for (const auto& t : tokenize(text))
    if (auto it = idf_.find(t); it != idf_.end()) v[t] += 1.0;
  for (auto& [t, w] : v) w *= idf_.at(t);
  return v;
}

std::vector<double> TfidfMatcher::similarities(std::string_view query) const {
  const auto q = vectorize(query);
  double qnorm = 0.0;
  for (const auto& [t, w] : q) qnorm += w * w;
  std::vector<double> out(docs_.size(), 0.0);
  if (qnorm == 0.0) return out;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (norms_[i] == 0.0) continue;
    double dot = 0.0;
    for (const auto& [t, w] : docs_[i])
      if (auto it = q.find(t); it != q.end()) dot += w * it->second;
    // sqrt of a product keeps an exact self-match at exactly 1
    out[i] = std::min(1.0, dot / std::sqrt(qnorm * norms_[i]));
  }
  return out;
}

std::optional<FaqMatch> best_faq(const FaqMatcher& matcher, std::string_view query) {
  const auto sims = matcher.similarities(query);
  if (sims.empty()) return std::nullopt;
  FaqMatch best{0, sims[0]};
  for (std::size_t i = 1; i < sims.size(); ++i)
    if (sims[i] > best.similarity) best = {i, sims[i]};
  return best;
}

AnswerPayload faq_fallback(std::string_view query, const std::vector<FaqEntry>& store, const FaqMatcher& matcher,
                           double theta, const std::string& default_reply) {
  if (theta < 0.0 || theta > 1.0) throw Error(ErrorCode::InvalidConfig, "theta must lie in [0,1]");
  if (auto best = best_faq(matcher, query); best && best->similarity >= theta && best->index < store.size())
    return AnswerPayload{store[best->index].answer, {}, AnswerSource::faq, {}};
  return AnswerPayload{default_reply, {}, AnswerSource::fallback, {}};
}

// ---------------------------------------------------------------------------

void select_item(Session& session, std::string_view item_id, const KnowledgeGraph& kg) {
  const Entity* e = kg.find(item_id);
  if (!e || e->kind != EntityKind::Item) throw Error(ErrorCode::UnknownItem, "no item '" + std::string(item_id) + "'");
  session.current_item = e->id;
}

Response handle(std::string_view query, Session& session, const Knowledge& k, Trace* trace) {
  auto step = [&](const char* name) {
    if (trace) trace->push_back(name);
  };
  Response r;
  step("classify");
  r.intent = classify_intent(query, session, *k.kg, *k.semantic, *k.properties, k.rules);
  switch (r.intent) {
    case Intent::ViewItem: {
      step("search");
      r.items = k.catalog->docs().empty()
                    ? std::vector<retrieval::Ranked>{}
                    : retrieval::search(query, *k.catalog, *k.semantic, k.weights, k.search_k);
      session.last_list = r.items;
      if (r.items.size() == 1) {
        session.current_item = r.items.front().item_id;
        r.selected = session.current_item;
      }
      break;
    }
    case Intent::ItemQuestion: {
      step("kbqa");
      r.answer = kbqa(query, *session.current_item, *k.kg, *k.properties, k.templates);
      if (!r.answer) {
        step("faq");
        r.answer = faq_fallback(query, *k.faq, *k.matcher, k.theta, k.default_reply);
      }
      break;
    }
    case Intent::OutOfScope:
      step("fallback");
      r.answer = AnswerPayload{k.default_reply, {}, AnswerSource::fallback, {}};
      break;
  }
  return r;
}

}  // namespace mkg::qa

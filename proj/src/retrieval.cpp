#include "mkg/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "mkg/tokenize.hpp"

namespace mkg::retrieval {

namespace {

std::string join_key(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key += '\x1f';
    key += tokens[i];
  }
  return key;
}

}  // namespace

std::optional<std::string> Lexicon::add(std::string_view surface, std::string type) {
  const auto tokens = tokenize(surface);
  if (tokens.empty()) throw Error(ErrorCode::InvalidConfig, "lexicon surface '" + std::string(surface) + "' has no tokens");
  if (type.empty()) throw Error(ErrorCode::InvalidConfig, "lexicon entry '" + std::string(surface) + "' has no type");
  max_tokens_ = std::max(max_tokens_, tokens.size());
  const std::string key = join_key(tokens, 0, tokens.size());
  auto [it, inserted] = entries_.try_emplace(key, Entry{std::string(surface), type});
  if (inserted) return std::nullopt;
  std::string previous = it->second.type;
  it->second = Entry{std::string(surface), std::move(type)};
  return previous;
}

const Lexicon::Entry* Lexicon::lookup(const std::vector<std::string>& tokens, std::size_t begin,
                                      std::size_t end) const {
  auto it = entries_.find(join_key(tokens, begin, end));
  return it == entries_.end() ? nullptr : &it->second;
}

std::set<std::string> Lexicon::types() const {
  std::set<std::string> out;
  for (const auto& [key, e] : entries_) out.insert(e.type);
  return out;
}

namespace {

void load_into(Lexicon& lex, std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::ParseError, origin + ": expected surface<TAB>type", lineno);
    std::string type = line.substr(tab + 1);
    while (!type.empty() && (type.back() == ' ' || type.back() == '\t')) type.pop_back();
    try {
      if (auto prev = lex.add(line.substr(0, tab), type); prev && *prev != type)
        std::cerr << "lexicon " << origin << ":" << lineno << ": '" << line.substr(0, tab) << "' retyped " << *prev
                  << " -> " << type << "\n";
    } catch (const Error& e) {
      throw Error(e.code(), origin + ": " + e.detail(), lineno);
    }
  }
}

}  // namespace

Lexicon read_lexicon(std::istream& in, const std::string& origin) {
  Lexicon lex;
  load_into(lex, in, origin);
  return lex;
}

Lexicon read_lexicon(const std::filesystem::path& path) {
  Lexicon lex;
  merge_lexicon(lex, path);
  return lex;
}

void merge_lexicon(Lexicon& into, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open lexicon " + path.string());
  load_into(into, in, path.string());
}

TaggedText ner_tag_tokens(std::vector<std::string> tokens, const Lexicon& lexicon) {
  TaggedText out;
  out.tokens = std::move(tokens);
  const std::size_t n = out.tokens.size();
  std::size_t i = 0;
  while (i < n) {
    const Lexicon::Entry* hit = nullptr;
    std::size_t len = std::min(lexicon.max_tokens(), n - i);
    for (; len > 0; --len)
      if ((hit = lexicon.lookup(out.tokens, i, i + len))) break;
    if (!hit) {
      ++i;
      continue;
    }
    out.spans.push_back({i, i + len, hit->surface, hit->type});
    i += len;
  }
  return out;
}

TaggedText ner_tag(std::string_view text, const Lexicon& lexicon) { return ner_tag_tokens(tokenize(text), lexicon); }

// ---------------------------------------------------------------------------

ItemDoc make_item_doc(const KnowledgeGraph& kg, const Entity& item, const Lexicon& lexicon) {
  ItemDoc doc;
  doc.item_id = item.id;
  std::string text = item.label;
  for (const auto& a : item.aliases) text += " " + a;
  if (auto it = item.attributes.find(std::string(kProfileAttr)); it != item.attributes.end())
    text += " " + it->second;
  doc.text = ner_tag(text, lexicon);
  doc.token_set.insert(doc.text.tokens.begin(), doc.text.tokens.end());
  for (const auto& s : doc.text.spans) doc.typed[s.type].insert(s.surface);

  const auto types = lexicon.types();
  for (const auto& nb : kg.neighbors(item.id, RelationKind::has_property, Direction::out)) {
    for (const auto& s : ner_tag(nb.entity->label, lexicon).spans) doc.typed[s.type].insert(s.surface);
    if (nb.triple->qualifier && types.count(*nb.triple->qualifier)) {
      // the value is typed by the property name itself; use the lexicon
      // surface when the label is a lexicon entry
      const auto tokens = tokenize(nb.entity->label);
      const auto* e = tokens.empty() ? nullptr : lexicon.lookup(tokens, 0, tokens.size());
      doc.typed[*nb.triple->qualifier].insert(e ? e->surface : nb.entity->label);
    }
  }
  return doc;
}

double ScoreWeights::beta_for(const std::string& type) const {
  auto it = beta.find(type);
  return it == beta.end() ? default_beta : it->second;
}

void ScoreWeights::validate() const {
  bool ok = alpha >= 0 && default_beta >= 0;
  for (const auto& [t, b] : beta) ok = ok && b >= 0;
  if (!ok) throw Error(ErrorCode::InvalidConfig, "score weights must be non-negative");
}

void from_json(const nlohmann::json& j, ScoreWeights& w) {
  w.alpha = j.value("alpha", w.alpha);
  w.default_beta = j.value("default_beta", w.default_beta);
  if (j.contains("beta"))
    for (const auto& [t, b] : j.at("beta").items()) w.beta[t] = b.get<double>();
  w.validate();
}

void to_json(nlohmann::json& j, const ScoreWeights& w) {
  j = {{"alpha", w.alpha}, {"beta", w.beta}, {"default_beta", w.default_beta}};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double score(const TaggedText& query, const ItemDoc& doc, const ScoreWeights& w) {
  const std::set<std::string> qtokens(query.tokens.begin(), query.tokens.end());
  double s = w.alpha * jaccard(qtokens, doc.token_set);
  std::set<std::string> matched;
  for (const auto& span : query.spans) {
    if (matched.count(span.type)) continue;
    auto it = doc.typed.find(span.type);
    if (it != doc.typed.end() && it->second.count(span.surface)) matched.insert(span.type);
  }
  for (const auto& t : matched) s += w.beta_for(t);
  return s;
}

Catalog::Catalog(const KnowledgeGraph& kg, const Lexicon& lexicon) {
  for (const auto& e : kg.entities())
    if (e.kind == EntityKind::Item) docs_.push_back(make_item_doc(kg, e, lexicon));
  std::sort(docs_.begin(), docs_.end(), [](const ItemDoc& a, const ItemDoc& b) { return a.item_id < b.item_id; });
}

const ItemDoc* Catalog::find(std::string_view item_id) const {
  auto it = std::lower_bound(docs_.begin(), docs_.end(), item_id,
                             [](const ItemDoc& d, std::string_view id) { return d.item_id < id; });
  return it != docs_.end() && it->item_id == item_id ? &*it : nullptr;
}

std::vector<Ranked> search(std::string_view query, const Catalog& catalog, const Lexicon& lexicon,
                           const ScoreWeights& w, std::size_t k) {
  if (catalog.docs().empty()) throw Error(ErrorCode::EmptyCatalog, "the catalog has no items");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  const TaggedText q = ner_tag(query, lexicon);
  std::vector<Ranked> out;
  for (const auto& doc : catalog.docs())
    if (const double s = score(q, doc, w); s > 0) out.push_back({doc.item_id, s});
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<Ranked> search(std::string_view query, const KnowledgeGraph& kg, const Lexicon& lexicon,
                           const ScoreWeights& w, std::size_t k) {
  return search(query, Catalog(kg, lexicon), lexicon, w, k);
}

}  // namespace mkg::retrieval

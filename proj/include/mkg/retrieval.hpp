#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mkg/kg.hpp"

namespace mkg::retrieval {

// Surface form -> semantic type. Surfaces are matched on their token
// sequence, so "SK-II" and "sk ii" are the same entry.
class Lexicon {
 public:
  struct Entry {
    std::string surface;
    std::string type;
  };

  // Returns the previous type when the surface was already present (the new
  // type wins). Throws InvalidConfig for a surface with no tokens or an
  // empty type.
  std::optional<std::string> add(std::string_view surface, std::string type);

  // Entry for an exact token sequence, or nullptr.
  const Entry* lookup(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t max_tokens() const { return max_tokens_; }
  std::set<std::string> types() const;

 private:
  std::unordered_map<std::string, Entry> entries_;  // key: tokens joined by \x1f
  std::size_t max_tokens_ = 0;
};

// TSV "surface<TAB>type"; blank lines and lines starting with '#' are
// skipped. Retyped surfaces are reported on stderr.
Lexicon read_lexicon(std::istream& in, const std::string& origin = "<stream>");
Lexicon read_lexicon(const std::filesystem::path& path);
// Loads several files into one lexicon, later files winning.
void merge_lexicon(Lexicon& into, const std::filesystem::path& path);

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive token index
  std::string surface;  // the lexicon's surface form
  std::string type;

  bool operator==(const Span&) const = default;
};

struct TaggedText {
  std::vector<std::string> tokens;
  std::vector<Span> spans;
};

// Greedy left-to-right longest match over token n-grams.
TaggedText ner_tag(std::string_view text, const Lexicon& lexicon);
TaggedText ner_tag_tokens(std::vector<std::string> tokens, const Lexicon& lexicon);

struct ItemDoc {
  std::string item_id;
  TaggedText text;                                     // label + aliases + profile
  std::set<std::string> token_set;                     // of text.tokens
  std::map<std::string, std::set<std::string>> typed;  // type -> surfaces
};

// Item attribute holding free profile text appended to the label.
inline constexpr std::string_view kProfileAttr = "profile";

// Tags the item's label, aliases and profile, plus the labels of its has_property
// targets; a has_property qualifier that names a lexicon type also
// contributes the value label under that type.
ItemDoc make_item_doc(const KnowledgeGraph& kg, const Entity& item, const Lexicon& lexicon);

struct ScoreWeights {
  double alpha = 1.0;
  std::map<std::string, double> beta = {{"category", 2.0}, {"brand", 1.5}};
  double default_beta = 1.0;

  double beta_for(const std::string& type) const;
  void validate() const;  // non-negative
};

void from_json(const nlohmann::json& j, ScoreWeights& w);
void to_json(nlohmann::json& j, const ScoreWeights& w);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// alpha * Jaccard(tokens) + sum over types t with a shared type-t surface of beta_t.
double score(const TaggedText& query, const ItemDoc& doc, const ScoreWeights& w);

struct Ranked {
  std::string item_id;
  double score = 0.0;

  bool operator==(const Ranked&) const = default;
};

// ItemDocs for every Item entity, ordered by id; immutable once built.
class Catalog {
 public:
  Catalog() = default;
  Catalog(const KnowledgeGraph& kg, const Lexicon& lexicon);

  const std::vector<ItemDoc>& docs() const { return docs_; }
  const ItemDoc* find(std::string_view item_id) const;

 private:
  std::vector<ItemDoc> docs_;
};

// Descending score, ties by item id; zero scores dropped; at most k items.
// Throws EmptyCatalog and InvalidConfig (k == 0).
std::vector<Ranked> search(std::string_view query, const Catalog& catalog, const Lexicon& lexicon,
                           const ScoreWeights& w, std::size_t k);
std::vector<Ranked> search(std::string_view query, const KnowledgeGraph& kg, const Lexicon& lexicon,
                           const ScoreWeights& w, std::size_t k);

}  // namespace mkg::retrieval

#include <random>
#include <sstream>

#include "doctest.h"
#include "mkg/error.hpp"
#include "mkg/retrieval.hpp"
#include "support/retrieval_oracle.hpp"

using namespace mkg;
using namespace mkg::retrieval;

namespace {

const std::vector<std::string> kAlphabet = {"口", "红", "色", "包", "水", "乳", "霜", "面", "膜", "ysl", "mac", "a"};
const std::vector<std::string> kTypes = {"category", "brand", "color", "size", "functionality"};

std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return s;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(kAlphabet[rng() % kAlphabet.size()]);
  return out;
}

Lexicon lexicon_of(const std::vector<std::pair<std::string, std::string>>& entries) {
  Lexicon lex;
  for (const auto& [s, t] : entries) lex.add(s, t);
  return lex;
}

Entity item(const std::string& id, const std::string& label, const std::string& profile = "") {
  Entity e{id, EntityKind::Item, label, {}, {}};
  if (!profile.empty()) e.attributes["profile"] = profile;
  return e;
}

}  // namespace

TEST_CASE("tagger examples") {
  auto lex = lexicon_of({{"口红", "category"}});
  auto t = ner_tag("看看口红", lex);
  REQUIRE(t.spans.size() == 1);
  CHECK(t.spans[0] == Span{2, 4, "口红", "category"});

  CHECK(ner_tag("看看口红", Lexicon{}).spans.empty());
  CHECK(ner_tag("", lex).spans.empty());

  auto both = lexicon_of({{"红", "color"}, {"口红", "category"}});
  auto longest = ner_tag("口红", both);
  REQUIRE(longest.spans.size() == 1);
  CHECK(longest.spans[0].type == "category");
  auto tail = ner_tag("红色口红", both);
  REQUIRE(tail.spans.size() == 2);
  CHECK(tail.spans[0] == Span{0, 1, "红", "color"});
  CHECK(tail.spans[1] == Span{2, 4, "口红", "category"});

  auto ascii = lexicon_of({{"YSL", "brand"}, {"ysl rouge", "category"}});
  auto a = ner_tag("ysl Rouge!", ascii);
  REQUIRE(a.spans.size() == 1);
  CHECK(a.spans[0].surface == "ysl rouge");
}

TEST_CASE("lexicon loading") {
  std::istringstream in("# comment\n口红\tcategory\n\nYSL\tbrand\r\n口红\tproduct\n");
  auto lex = read_lexicon(in);
  CHECK(lex.size() == 2);
  auto t = ner_tag("口红", lex);
  REQUIRE(t.spans.size() == 1);
  CHECK(t.spans[0].type == "product");  // last load wins

  std::istringstream bad("口红 category\n");
  CHECK_THROWS_AS(read_lexicon(bad), Error);
  std::istringstream empty_surface("!!\tbrand\n");
  CHECK_THROWS_AS(read_lexicon(empty_surface), Error);
}

TEST_CASE("tagger equals the exhaustive maximal-munch reference") {
  std::mt19937_64 rng(1);
  std::size_t overlaps = 0;
  for (int round = 0; round < 10000; ++round) {
    std::vector<testing::PlainEntry> entries;
    Lexicon lex;
    const std::size_t n_entries = rng() % 101;
    for (std::size_t e = 0; e < n_entries; ++e) {
      auto tokens = random_tokens(rng, 1 + rng() % 4);
      const std::string type = kTypes[rng() % kTypes.size()];
      entries.push_back({tokens, join(tokens), type});
      lex.add(join(tokens), type);
    }
    const auto text = random_tokens(rng, rng() % 61);
    const auto got = ner_tag_tokens(text, lex);
    const auto want = testing::maximal_munch_reference(text, entries);
    CHECK(got.spans == want);
    for (std::size_t i = 0; i < got.spans.size(); ++i) {
      const auto& s = got.spans[i];
      if (s.end <= s.start || s.end > text.size()) ++overlaps;
      if (i > 0 && got.spans[i - 1].end > s.start) ++overlaps;
      // no longer entry matches at the same start
      for (std::size_t len = s.end - s.start + 1; s.start + len <= text.size() && len <= 4; ++len)
        CHECK(lex.lookup(text, s.start, s.start + len) == nullptr);
    }
  }
  CHECK(overlaps == 0);
}

TEST_CASE("score arithmetic on a hand fixture") {
  KnowledgeGraph kg;
  kg.add_entity(item("item:a", "口红丝绒哑光"));     // 口 红 丝 绒 哑 光
  kg.add_entity(item("item:b", "看看丝绒质感"));     // 看 看 丝 绒 质 感
  auto lex = lexicon_of({{"口红", "category"}});
  const auto q = ner_tag("看看口红", lex);  // tokens {看, 口, 红}
  Catalog cat(kg, lex);
  const ScoreWeights w;
  // A: shared {口, 红}, union 7 tokens, plus the category bonus
  CHECK(score(q, *cat.find("item:a"), w) == doctest::Approx(2.0 / 7.0 + 2.0));
  // B: shared {看}, union {看, 口, 红, 丝, 绒, 质, 感}
  CHECK(score(q, *cat.find("item:b"), w) == doctest::Approx(1.0 / 7.0));
  auto ranked = search("看看口红", cat, lex, w, 10);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].item_id == "item:a");

  // identical tagged text: alpha + bonus
  ItemDoc self = make_item_doc(kg, kg.at("item:a"), lex);
  CHECK(score(self.text, self, w) == doctest::Approx(1.0 + 2.0));
  // disjoint
  CHECK(score(ner_tag("天气", lex), self, w) == 0.0);
}

TEST_CASE("property values contribute typed surfaces") {
  KnowledgeGraph kg;
  kg.add_entity(item("item:lip", "丝绒唇膏"));
  kg.add_entity({"pv:ysl", EntityKind::PropertyValue, "YSL", {}, {}});
  kg.add_entity({"pv:red", EntityKind::PropertyValue, "正红色", {}, {}});
  kg.add_triple({"item:lip", RelationKind::has_property, "pv:ysl", "brand", Provenance::asserted});
  kg.add_triple({"item:lip", RelationKind::has_property, "pv:red", "颜色", Provenance::asserted});
  auto lex = lexicon_of({{"ysl", "brand"}, {"红色", "color"}});
  auto doc = make_item_doc(kg, kg.at("item:lip"), lex);
  CHECK(doc.typed["brand"] == std::set<std::string>{"ysl"});
  CHECK(doc.typed["color"] == std::set<std::string>{"红色"});
  const ScoreWeights w;
  CHECK(score(ner_tag("YSL 红色", lex), doc, w) == doctest::Approx(1.5 + 1.0));
}

TEST_CASE("adding a matching typed surface never lowers the score") {
  std::mt19937_64 rng(2);
  auto lex = lexicon_of({{"口红", "category"}, {"ysl", "brand"}, {"红", "color"}});
  for (int round = 0; round < 200; ++round) {
    auto qtokens = random_tokens(rng, 1 + rng() % 6);
    auto q = ner_tag_tokens(qtokens, lex);
    ItemDoc d;
    d.text = ner_tag_tokens(random_tokens(rng, 1 + rng() % 8), lex);
    d.token_set.insert(d.text.tokens.begin(), d.text.tokens.end());
    for (const auto& s : d.text.spans) d.typed[s.type].insert(s.surface);
    const double before = score(q, d, ScoreWeights{});
    ItemDoc more = d;
    more.typed["category"].insert("口红");
    CHECK(score(q, more, ScoreWeights{}) >= before);
  }
}

TEST_CASE("search equals exhaustive scoring and a stable sort") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 100; ++round) {
    Lexicon lex;
    std::vector<std::string> type_pool;
    for (int e = 0; e < 15; ++e) lex.add(join(random_tokens(rng, 1 + rng() % 2)), kTypes[rng() % kTypes.size()]);
    KnowledgeGraph kg;
    const std::size_t n = 1 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) {
      std::string label;
      for (const auto& t : random_tokens(rng, 1 + rng() % 5)) label += t + " ";
      kg.add_entity(item("item:" + std::to_string(1000 + rng() % 9000) + "_" + std::to_string(i), label));
    }
    Catalog cat(kg, lex);
    ScoreWeights w;
    w.alpha = double(rng() % 3);
    const auto query = join(random_tokens(rng, 1 + rng() % 6));
    const auto q = ner_tag(query, lex);

    std::vector<Ranked> all;
    std::vector<ItemDoc> docs = cat.docs();
    std::sort(docs.begin(), docs.end(), [](const ItemDoc& a, const ItemDoc& b) { return a.item_id < b.item_id; });
    for (const auto& d : docs)
      if (double s = testing::reference_score(q, d, w); s > 0) all.push_back({d.item_id, s});
    std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    const std::size_t k = 1 + rng() % 60;
    if (all.size() > k) all.resize(k);
    const auto got = search(query, cat, lex, w, k);
    REQUIRE(got.size() == all.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].item_id == all[i].item_id);
      CHECK(got[i].score == doctest::Approx(all[i].score).epsilon(1e-12));
    }
    CHECK(search(query, cat, lex, w, k) == got);
  }
}

TEST_CASE("lipstick fixture ranks both lipsticks first") {
  KnowledgeGraph kg;
  kg.add_entity(item("item:lip_velvet", "丝绒口红", "哑光 显白"));
  kg.add_entity(item("item:lip_gloss", "水光口红", "滋润 不拔干"));
  kg.add_entity(item("item:mask", "补水面膜", "熬夜 急救"));
  kg.add_entity(item("item:tshirt", "纯棉T恤", "宽松 百搭"));
  kg.add_entity(item("item:cream", "保湿面霜", "口碑 红榜"));
  auto lex = lexicon_of({{"口红", "category"}, {"面膜", "category"}, {"T恤", "category"}, {"面霜", "category"}});
  auto ranked = search("看看口红", kg, lex, ScoreWeights{}, 10);
  REQUIRE(ranked.size() >= 2);
  std::set<std::string> top = {ranked[0].item_id, ranked[1].item_id};
  CHECK(top == std::set<std::string>{"item:lip_gloss", "item:lip_velvet"});
  for (std::size_t i = 2; i < ranked.size(); ++i) CHECK(ranked[i].score < ranked[1].score);

  KnowledgeGraph one;
  one.add_entity(item("item:only", "口红"));
  auto single = search("口红", one, lex, ScoreWeights{}, 3);
  REQUIRE(single.size() == 1);
  CHECK(single[0].item_id == "item:only");

  CHECK_THROWS_AS(search("口红", KnowledgeGraph{}, lex, ScoreWeights{}, 3), Error);
  CHECK_THROWS_AS(search("口红", one, lex, ScoreWeights{}, 0), Error);
}

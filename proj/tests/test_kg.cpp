#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "mkg/kg.hpp"
#include "support/kg_oracle.hpp"

using namespace mkg;

namespace {

Entity make(std::string id, EntityKind kind, std::string label) {
  Entity e{std::move(id), kind, std::move(label), {}, {}};
  if (kind == EntityKind::Image) e.attributes["path"] = "images/" + e.id + ".pgm";
  return e;
}

Triple link(std::string s, RelationKind r, std::string t, std::optional<std::string> q = std::nullopt) {
  return Triple{std::move(s), r, std::move(t), std::move(q), Provenance::asserted};
}

KnowledgeGraph mask_chain() { return import_jsonl(std::filesystem::path(MKG_TEST_DATA) / "mask_chain.jsonl"); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mkg::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("add_entity stores and indexes by id and label") {
  KnowledgeGraph kg;
  kg.add_entity(make("s1", EntityKind::Scenario, "熬夜 Stay up late"));
  REQUIRE(kg.find("s1") != nullptr);
  CHECK(kg.find("s1")->label == "熬夜 Stay up late");
  CHECK(kg.find_by_label(EntityKind::Scenario, "熬夜 Stay up late") == kg.find("s1"));
  CHECK(kg.find_by_label(EntityKind::Problem, "熬夜 Stay up late") == nullptr);

  CHECK(code_of([&] { kg.add_entity(make("s2", EntityKind::Scenario, "")); }) == ErrorCode::EmptyLabel);
  CHECK(code_of([&] { kg.add_entity(make("s1", EntityKind::Problem, "x")); }) == ErrorCode::DuplicateId);
  CHECK(code_of([&] { kg.add_entity(Entity{"img", EntityKind::Image, "chart", {}, {}}); }) ==
        ErrorCode::InvalidEntity);
}

TEST_CASE("add_triple enforces signatures and reports duplicates") {
  KnowledgeGraph kg;
  kg.add_entity(make("autumn", EntityKind::Scenario, "秋冬换季"));
  kg.add_entity(make("dry", EntityKind::Problem, "皮肤干"));
  kg.add_entity(make("pimple", EntityKind::Problem, "长痘痘"));
  kg.add_entity(make("antiacne", EntityKind::POI, "清痘抑痘"));
  kg.add_entity(make("item", EntityKind::Item, "洁面泡沫"));

  CHECK(kg.add_triple(link("autumn", RelationKind::cause, "dry")) == InsertResult::Inserted);
  CHECK(kg.add_triple(link("pimple", RelationKind::need, "antiacne")) == InsertResult::Inserted);
  CHECK(kg.add_triple(link("autumn", RelationKind::cause, "dry")) == InsertResult::AlreadyPresent);
  CHECK(kg.triples().size() == 2);

  CHECK(code_of([&] { kg.add_triple(link("item", RelationKind::cause, "dry")); }) ==
        ErrorCode::SignatureViolation);
  CHECK(code_of([&] { kg.add_triple(link("ghost", RelationKind::cause, "dry")); }) == ErrorCode::UnknownEntity);
  CHECK(code_of([&] {
          kg.add_triple(Triple{"autumn", RelationKind::cause, "pimple", std::nullopt, Provenance::derived});
        }) == ErrorCode::InvalidProvenance);
  CHECK(kg.indexes_consistent());
}

TEST_CASE("has_image accepts any non-image source") {
  KnowledgeGraph kg;
  kg.add_entity(make("img", EntityKind::Image, "chart"));
  kg.add_entity(make("img2", EntityKind::Image, "chart2"));
  for (int k = 0; k < 6; ++k) {
    const std::string id = "n" + std::to_string(k);
    kg.add_entity(make(id, static_cast<EntityKind>(k), id));
    CHECK(kg.add_triple(link(id, RelationKind::has_image, "img")) == InsertResult::Inserted);
  }
  CHECK(code_of([&] { kg.add_triple(link("img2", RelationKind::has_image, "img")); }) ==
        ErrorCode::SignatureViolation);
}

TEST_CASE("completion derives item POI and user preference") {
  KnowledgeGraph kg;
  CHECK(kg.run_completion() == 0);

  kg.add_entity(make("mask", EntityKind::Item, "面膜"));
  kg.add_entity(make("dg", EntityKind::PropertyValue, "甘草酸二钾"));
  kg.add_entity(make("fair", EntityKind::POI, "皮肤白皙"));
  kg.add_entity(make("u", EntityKind::User, "u"));
  kg.add_entity(make("pimple", EntityKind::Problem, "长痘痘"));
  kg.add_entity(make("antiacne", EntityKind::POI, "清痘抑痘"));
  kg.add_triple(link("mask", RelationKind::has_property, "dg", "ingredient"));
  kg.add_triple(link("dg", RelationKind::satisfy, "fair"));
  kg.add_triple(link("u", RelationKind::has_problem, "pimple"));
  kg.add_triple(link("pimple", RelationKind::need, "antiacne"));

  CHECK(kg.run_completion() == 2);
  CHECK(kg.contains(Triple{"mask", RelationKind::has_poi, "fair", std::nullopt, Provenance::derived}));
  CHECK(kg.contains(Triple{"u", RelationKind::prefer, "antiacne", std::nullopt, Provenance::derived}));
  CHECK(kg.run_completion() == 0);
  CHECK(kg.indexes_consistent());
}

TEST_CASE("completion never duplicates an asserted triple") {
  KnowledgeGraph kg;
  kg.add_entity(make("mask", EntityKind::Item, "面膜"));
  kg.add_entity(make("dg", EntityKind::PropertyValue, "甘草酸二钾"));
  kg.add_entity(make("fair", EntityKind::POI, "皮肤白皙"));
  kg.add_triple(link("mask", RelationKind::has_property, "dg", "ingredient"));
  kg.add_triple(link("dg", RelationKind::satisfy, "fair"));
  kg.add_triple(link("mask", RelationKind::has_poi, "fair"));
  CHECK(kg.run_completion() == 0);
  CHECK(kg.stats().derived[static_cast<std::size_t>(RelationKind::has_poi)] == 0);
}

TEST_CASE("completion matches brute-force join on random graphs") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 30);
    const auto expected = testing::brute_force_derived(kg);
    const std::size_t added = kg.run_completion();
    CHECK(added == expected.size());
    CHECK(testing::derived_set(kg) == expected);
    CHECK(kg.run_completion() == 0);
    CHECK(kg.indexes_consistent());
  }
}

TEST_CASE("completion matches brute-force join on dense graphs") {
  std::mt19937_64 rng(8);
  std::size_t derived = 0;
  for (int round = 0; round < 50; ++round) {
    KnowledgeGraph kg = testing::random_dense_graph(rng, 40);
    const auto expected = testing::brute_force_derived(kg);
    derived += kg.run_completion();
    CHECK(testing::derived_set(kg) == expected);
    CHECK(kg.run_completion() == 0);
  }
  CHECK(derived > 100);
}

TEST_CASE("completion is monotone under asserted additions") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 30; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 25);
    kg.run_completion();
    const auto before = testing::derived_set(kg);
    const auto& ents = kg.entities();
    for (std::size_t i = 0; i < ents.size(); ++i) {
      for (std::size_t j = 0; j < ents.size(); ++j) {
        if ((i * 31 + j * 17 + static_cast<std::size_t>(round)) % 11 != 0) continue;
        for (auto r : {RelationKind::has_property, RelationKind::satisfy, RelationKind::need}) {
          if (!signature_allows(r, ents[i].kind, ents[j].kind)) continue;
          Triple t = link(ents[i].id, r, ents[j].id);
          if (r == RelationKind::has_property) t.qualifier = "ingredient";
          kg.add_triple(t);
        }
      }
    }
    kg.run_completion();
    const auto after = testing::derived_set(kg);
    CHECK(std::includes(after.begin(), after.end(), before.begin(), before.end()));
  }
}

TEST_CASE("every derived triple has a witness") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 40);
    kg.run_completion();
    for (const auto& t : kg.triples()) {
      if (t.provenance != Provenance::derived) continue;
      const RelationKind first = t.relation == RelationKind::has_poi ? RelationKind::has_property
                                                                     : RelationKind::has_problem;
      const RelationKind second = t.relation == RelationKind::has_poi ? RelationKind::satisfy : RelationKind::need;
      bool witnessed = false;
      for (const auto& a : kg.triples())
        for (const auto& b : kg.triples())
          witnessed |= a.source == t.source && a.relation == first && a.target == b.source &&
                       b.relation == second && b.target == t.target;
      CHECK(witnessed);
    }
  }
}

TEST_CASE("neighbors reads back indexed edges in deterministic order") {
  KnowledgeGraph kg = mask_chain();
  kg.add_entity(make("img:b", EntityKind::Image, "b"));
  kg.add_entity(make("img:a", EntityKind::Image, "a"));
  kg.add_triple(link("item:facial_mask", RelationKind::has_image, "img:b"));
  kg.add_triple(link("item:facial_mask", RelationKind::has_image, "img:a"));

  auto imgs = kg.neighbors("item:facial_mask", RelationKind::has_image, Direction::out);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].entity->id == "img:a");
  CHECK(imgs[1].entity->id == "img:b");

  auto all = kg.neighbors("item:facial_mask", std::nullopt, Direction::out);
  REQUIRE(all.size() == 3);
  CHECK(all[0].triple->relation == RelationKind::has_property);

  CHECK_THROWS_AS(kg.neighbors("nope", std::nullopt, Direction::out), Error);
}

TEST_CASE("neighbors agrees with a full scan on random graphs") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 20; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 30);
    kg.run_completion();
    for (const auto& e : kg.entities()) {
      for (auto dir : {Direction::out, Direction::in}) {
        std::multiset<std::pair<std::string, std::string>> scan, got;
        for (const auto& t : kg.triples()) {
          if (t.relation != RelationKind::satisfy) continue;
          if (dir == Direction::out && t.source == e.id) scan.emplace(t.source, t.target);
          if (dir == Direction::in && t.target == e.id) scan.emplace(t.source, t.target);
        }
        for (const auto& n : kg.neighbors(e.id, RelationKind::satisfy, dir))
          got.emplace(n.triple->source, n.triple->target);
        CHECK(scan == got);
      }
    }
  }
}

TEST_CASE("cognitive path on the fixture") {
  KnowledgeGraph kg = mask_chain();
  auto paths = kg.cognitive_paths("item:facial_mask");
  REQUIRE(paths.size() == 1);
  std::vector<std::string> labels;
  for (const auto& id : paths[0]) labels.push_back(kg.at(id).label);
  CHECK(labels == std::vector<std::string>{"熬夜", "皮肤暗沉", "皮肤白皙", "甘草酸二钾", "面膜"});

  kg.add_entity(make("bare", EntityKind::Item, "bare item"));
  CHECK(kg.cognitive_paths("bare").empty());
  CHECK_THROWS_AS(kg.cognitive_paths("missing"), Error);
}

TEST_CASE("cognitive paths with two satisfying property values match enumeration") {
  KnowledgeGraph kg = mask_chain();
  kg.add_entity(make("pv:niacinamide", EntityKind::PropertyValue, "烟酰胺"));
  kg.add_triple(link("pv:niacinamide", RelationKind::satisfy, "poi:fair_skin"));
  kg.add_triple(link("item:facial_mask", RelationKind::has_property, "pv:niacinamide", "ingredient"));
  auto paths = kg.cognitive_paths("item:facial_mask");
  CHECK(paths.size() == 2);
  CHECK(paths == testing::brute_force_paths(kg, "item:facial_mask"));
  CHECK(std::is_sorted(paths.begin(), paths.end()));
}

TEST_CASE("cognitive paths match enumeration on random graphs") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 40; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 25);
    for (const auto& e : kg.entities())
      if (e.kind == EntityKind::Item) CHECK(kg.cognitive_paths(e.id) == testing::brute_force_paths(kg, e.id));
  }
  std::size_t nonempty = 0;
  for (int round = 0; round < 100; ++round) {
    KnowledgeGraph kg = testing::random_layered_graph(rng);
    for (const auto& e : kg.entities()) {
      if (e.kind != EntityKind::Item) continue;
      const auto want = testing::brute_force_paths(kg, e.id);
      CHECK(kg.cognitive_paths(e.id) == want);
      nonempty += !want.empty();
    }
  }
  CHECK(nonempty > 50);
}

TEST_CASE("stats") {
  KnowledgeGraph empty;
  CHECK(empty.stats().entity_total() == 0);
  CHECK(empty.stats().triple_total() == 0);

  GraphStats s = mask_chain().stats();
  CHECK(s.entity_total() == 5);
  CHECK(std::count(s.entities.begin(), s.entities.end(), 1u) == 5);
  std::size_t asserted = 0;
  for (auto c : s.asserted) asserted += c;
  CHECK(asserted == 4);

  std::mt19937_64 rng(17);
  for (int round = 0; round < 20; ++round) {
    KnowledgeGraph kg = testing::random_graph(rng, 40);
    kg.run_completion();
    GraphStats st = kg.stats();
    for (std::size_t k = 0; k < kEntityKindCount; ++k) {
      auto n = std::count_if(kg.entities().begin(), kg.entities().end(),
                             [&](const Entity& e) { return static_cast<std::size_t>(e.kind) == k; });
      CHECK(st.entities[k] == static_cast<std::size_t>(n));
    }
    for (std::size_t r = 0; r < kRelationKindCount; ++r) {
      std::size_t a = 0, d = 0;
      for (const auto& t : kg.triples()) {
        if (static_cast<std::size_t>(t.relation) != r) continue;
        (t.provenance == Provenance::asserted ? a : d)++;
      }
      CHECK(st.asserted[r] == a);
      CHECK(st.derived[r] == d);
    }
    CHECK(st.triple_total() == kg.triples().size());
  }
}

TEST_CASE("jsonl round trip preserves entities, triples and provenance") {
  KnowledgeGraph kg = mask_chain();
  kg.run_completion();
  std::stringstream buf;
  export_jsonl(kg, buf);
  KnowledgeGraph back = import_jsonl(buf);
  CHECK(back.entities() == kg.entities());
  CHECK(back.triples() == kg.triples());
  CHECK(back.contains(Triple{"item:facial_mask", RelationKind::has_poi, "poi:fair_skin", std::nullopt,
                             Provenance::derived}));
}

TEST_CASE("jsonl round trip on generated graphs") {
  std::mt19937_64 rng(23);
  KnowledgeGraph kg;
  for (std::size_t i = 0; i < 250; ++i) kg.add_entity(make("u" + std::to_string(i), EntityKind::User, "user"));
  KnowledgeGraph extra = testing::random_graph(rng, 200);
  for (const auto& e : extra.entities()) kg.add_entity(e);
  for (const auto& t : extra.triples()) kg.add_triple(t);
  kg.run_completion();
  // Top up with user problems until exactly 1000 records.
  std::size_t records = kg.entities().size() + kg.triples().size();
  for (std::size_t i = 0; records < 1000; ++i) {
    const std::string pid = "pr" + std::to_string(i);
    kg.add_entity(make(pid, EntityKind::Problem, pid));
    if (++records < 1000) {
      kg.add_triple(link("u" + std::to_string(i % 250), RelationKind::has_problem, pid));
      ++records;
    }
  }
  REQUIRE(records == 1000);
  std::stringstream buf;
  export_jsonl(kg, buf);
  KnowledgeGraph back = import_jsonl(buf);
  CHECK(back.entities().size() + back.triples().size() == 1000);
  CHECK(back.entities() == kg.entities());
  CHECK(back.triples() == kg.triples());
}

TEST_CASE("import reports the failing line") {
  auto failing = [](const std::string& text) {
    std::istringstream in(text);
    try {
      import_jsonl(in);
    } catch (const Error& e) {
      return std::make_pair(e.code(), e.line());
    }
    return std::make_pair(ErrorCode::Io, std::size_t{0});
  };
  const std::string head =
      R"({"rec":"entity","id":"i","kind":"Item","label":"x"})"
      "\n"
      R"({"rec":"entity","id":"p","kind":"Problem","label":"y"})"
      "\n";
  CHECK(failing(head + R"({"rec":"triple","source":"i","relation":"cause","target":"p","provenance":"asserted"})") ==
        std::make_pair(ErrorCode::SignatureViolation, std::size_t{3}));
  CHECK(failing(head + R"({"rec":"triple","source":"i","relation":"cause","target":"q","provenance":"asserted"})") ==
        std::make_pair(ErrorCode::UnknownEntity, std::size_t{3}));
  CHECK(failing(head + "{not json") == std::make_pair(ErrorCode::ParseError, std::size_t{3}));
  CHECK(failing(R"({"rec":"entity","id":"i","kind":"Item","label":"x","extra":1})") ==
        std::make_pair(ErrorCode::ParseError, std::size_t{1}));
  CHECK(failing(head + R"({"rec":"triple","source":"p","relation":"cause","target":"p","provenance":"derived"})")
            .first == ErrorCode::SignatureViolation);
}

TEST_CASE("graph store publishes whole batches") {
  GraphStore store(mask_chain());
  auto before = store.snapshot();
  store.update([](KnowledgeGraph& kg) { kg.run_completion(); });
  auto after = store.snapshot();
  CHECK(before->stats().derived[static_cast<std::size_t>(RelationKind::has_poi)] == 0);
  CHECK(after->stats().derived[static_cast<std::size_t>(RelationKind::has_poi)] == 1);
}

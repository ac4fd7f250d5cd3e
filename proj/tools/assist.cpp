// Live assistant: search, storyboards, stats and the HTTP service.
#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mkg/error.hpp"
#include "mkg/service.hpp"

using namespace mkg;
using nlohmann::json;

namespace {

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

json stats_json(const KnowledgeGraph& kg) {
  const auto s = kg.stats();
  json entities = json::object(), asserted = json::object(), derived = json::object();
  for (std::size_t i = 0; i < kEntityKindCount; ++i)
    entities[std::string(to_string(static_cast<EntityKind>(i)))] = s.entities[i];
  for (std::size_t i = 0; i < kRelationKindCount; ++i) {
    const std::string r(to_string(static_cast<RelationKind>(i)));
    asserted[r] = s.asserted[i];
    derived[r] = s.derived[i];
  }
  return {{"entities", entities},
          {"asserted", asserted},
          {"derived", derived},
          {"entity_total", s.entity_total()},
          {"triple_total", s.triple_total()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Live assistant over a multi-modal knowledge graph"};
  std::string config;
  app.add_option("--config", config, "service config JSON")->required();
  app.require_subcommand(1);

  auto* search = app.add_subcommand("search", "rank items for a query");
  std::string q;
  std::size_t k = 10;
  search->add_option("--q", q)->required();
  search->add_option("--k", k)->check(CLI::PositiveNumber);

  auto* story = app.add_subcommand("storyboard", "storyboard JSON for an item");
  std::string item;
  story->add_option("--item", item)->required();

  auto* card = app.add_subcommand("card", "item card JSON");
  card->add_option("--item", item)->required();

  auto* ask = app.add_subcommand("ask", "run queries through one session, one per line on stdin");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string host;
  int port = -1;
  serve->add_option("--host", host, "overrides listen.host");
  serve->add_option("--port", port, "overrides listen.port")->check(CLI::Range(0, 65535));

  auto* stats = app.add_subcommand("stats", "entity and triple counts after completion");

  CLI11_PARSE(app, argc, argv);
  try {
    auto cfg = service::load_config(config);
    std::shared_ptr<const service::Assistant> assistant = service::Assistant::load(cfg);
    service::Service svc(assistant);
    auto print = [](const service::Reply& r) {
      (r.status == 200 ? std::cout : std::cerr) << r.body << "\n";
      return r.status == 200 ? 0 : 1;
    };
    if (*search) return print(svc.search(q, std::to_string(k)));
    if (*story) return print(svc.storyboard(item));
    if (*card) return print(svc.item(item));
    if (*stats) {
      std::cout << stats_json(assistant->kg()).dump(2) << "\n";
      return 0;
    }
    if (*ask) {
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        print(svc.query(json{{"session_id", "cli"}, {"text", line}}.dump()));
      }
      return 0;
    }
    if (*serve) {
      service::HttpServer http(svc);
      const int bound = http.bind(host.empty() ? cfg.host : host, port < 0 ? cfg.port : port);
      g_server = &http;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << (host.empty() ? cfg.host : host) << ":" << bound << "\n";
      http.listen();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "assist: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
